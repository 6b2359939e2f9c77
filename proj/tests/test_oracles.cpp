// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "mlp/oracles.hpp"
#include "mlp/stat_tests.hpp"

using namespace mlp;

namespace {

LinearCase bm_case(double c, std::vector<double> xi, GKind g = GKind::squared_norm) {
    LinearCase lc;
    lc.c = c;
    lc.field = FieldKind::bm;
    lc.g = g;
    lc.xi = std::move(xi);
    return lc;
}

TerminalCondition cosine_g() {
    return {"cos", [](std::span<const double> x) { return std::cos(x[0]); }, Growth{1.0, 0.0, 0.0}};
}

} // namespace

TEST(LinearClosedForm, HeatSquaredNorm) {
    EXPECT_DOUBLE_EQ(linear_closed_form(bm_case(0.0, {0.0})).value, 1.0);
    EXPECT_NEAR(linear_closed_form(bm_case(1.0, {0.0, 0.0})).value, 2.0 * std::numbers::e, 1e-15);
    auto lc = bm_case(-0.5, {1.0, 2.0, -1.0});
    lc.T = 2.0;
    // e^{-1} (6 + 3 * 2)
    EXPECT_NEAR(linear_closed_form(lc).value, 12.0 * std::exp(-1.0), 1e-14);
}

TEST(LinearClosedForm, DriftlessGbmPreservesSum) {
    LinearCase lc;
    lc.field = FieldKind::gbm;
    lc.g = GKind::sum_of_coordinates;
    lc.xi = {1.0, 2.5, 0.5};
    lc.gbm = GbmParams::uncorrelated({0.0, 0.0, 0.0}, {0.3, 0.1, 0.2});
    EXPECT_DOUBLE_EQ(linear_closed_form(lc).value, 4.0);
}

TEST(LinearClosedForm, GbmSecondMoment) {
    LinearCase lc;
    lc.c = 0.2;
    lc.field = FieldKind::gbm;
    lc.g = GKind::squared_norm;
    lc.xi = {2.0};
    lc.T = 1.5;
    lc.gbm = GbmParams::uncorrelated({0.05}, {0.3});
    EXPECT_NEAR(linear_closed_form(lc).value, std::exp(0.3) * 4.0 * std::exp(0.19 * 1.5), 1e-13);
    lc.gbm.reset();
    EXPECT_THROW(linear_closed_form(lc), UsageError);
}

TEST(LinearClosedForm, ConstantTerminal) {
    auto lc = bm_case(0.5, {3.0}, GKind::constant);
    lc.g_constant = 2.0;
    EXPECT_NEAR(linear_closed_form(lc).value, 2.0 * std::exp(0.5), 1e-15);
}

TEST(LinearPicardIterate, Series) {
    auto const lc = bm_case(0.5, {0.0});
    EXPECT_EQ(linear_picard_iterate(lc, 0).value, 0.0);
    EXPECT_DOUBLE_EQ(linear_picard_iterate(lc, 1).value, 1.0);
    EXPECT_DOUBLE_EQ(linear_picard_iterate(lc, 2).value, 1.5);
    EXPECT_DOUBLE_EQ(linear_picard_iterate(lc, 3).value, 1.625);
    EXPECT_NEAR(linear_picard_iterate(lc, 30).value, std::exp(0.5), 1e-15);
    EXPECT_THROW(linear_picard_iterate(lc, -1), UsageError);
}

TEST(FiniteDifference, ConstantIsExact) {
    FdProblem pb;
    pb.g = constant_g(1.0);
    EXPECT_NEAR(fd_solve_1d(pb).value, 1.0, 1e-8);
    pb.field = FieldKind::gbm;
    pb.alpha = 0.05;
    pb.beta = 0.2;
    pb.xi = 60.0;
    EXPECT_NEAR(fd_solve_1d(pb).value, 1.0, 1e-8);
}

TEST(FiniteDifference, LinearHeatMatchesClosedForm) {
    for (double c : {0.0, 0.5, 1.0, -0.7}) {
        FdProblem pb;
        pb.f = linear_f(c);
        auto const r = fd_solve_1d(pb);
        double const exact = linear_closed_form(bm_case(c, {0.0})).value;
        EXPECT_NEAR(r.value, exact, r.error_estimate + 1e-6) << "c=" << c;
        EXPECT_EQ(r.method, OracleMethod::finite_difference);
    }
}

TEST(FiniteDifference, CosineHeat) {
    FdProblem pb;
    pb.xi = 0.4;
    pb.g = cosine_g();
    pb.f = linear_f(0.3);
    auto const r = fd_solve_1d(pb);
    double const exact = std::exp(0.3 - 0.5) * std::cos(0.4);
    EXPECT_NEAR(r.value, exact, r.error_estimate + 1e-6);
    EXPECT_GT(r.error_estimate, 0.0);
}

TEST(FiniteDifference, GbmMatchesClosedForm) {
    FdProblem pb;
    pb.field = FieldKind::gbm;
    pb.alpha = 0.05;
    pb.beta = 0.2;
    pb.xi = 1.5;
    pb.f = linear_f(0.4);
    pb.g = sum_of_coordinates_g();
    auto const r = fd_solve_1d(pb, FdGrid{400, 0, 0.0});
    double const exact = std::exp(0.4) * 1.5 * std::exp(0.05);
    EXPECT_NEAR(r.value, exact, r.error_estimate + 1e-5 * exact);
}

TEST(FiniteDifference, SecondOrderRefinement) {
    FdProblem pb;
    pb.xi = 0.4;
    pb.g = cosine_g();
    pb.f = linear_f(0.3);
    double const e1 = fd_solve_1d(pb, FdGrid{100, 0, 0.0}).error_estimate;
    double const e2 = fd_solve_1d(pb, FdGrid{200, 0, 0.0}).error_estimate;
    double const e3 = fd_solve_1d(pb, FdGrid{400, 0, 0.0}).error_estimate;
    EXPECT_NEAR(e1 / e2, 4.0, 0.6);
    EXPECT_NEAR(e2 / e3, 4.0, 0.6);
}

TEST(FiniteDifference, Preconditions) {
    FdProblem pb;
    EXPECT_THROW(fd_solve_1d(pb, FdGrid{49, 0, 0.0}), UsageError);
    try {
        fd_solve_1d(pb, FdGrid{100, 10, 0.0});
        FAIL() << "expected an instability error";
    } catch (const UsageError& e) {
        EXPECT_NE(std::string(e.what()).find("need at least S ="), std::string::npos);
    }
    pb.field = FieldKind::gbm;
    pb.xi = -1.0;
    EXPECT_THROW(fd_solve_1d(pb), UsageError);
}

TEST(NestedPicard, DepthZero) {
    auto const pb = make_linear_problem(bm_case(0.5, {0.0}));
    auto const r = nested_picard(pb, 0, 10, 1);
    EXPECT_EQ(r.value, 0.0);
    EXPECT_EQ(r.method, OracleMethod::nested_picard);
}

TEST(NestedPicard, DepthOneIsTerminalMean) {
    auto const lc = bm_case(0.8, {0.5});
    auto const r = nested_picard(make_linear_problem(lc), 1, 1000, 2);
    EXPECT_NEAR(r.value, linear_picard_iterate(lc, 1).value, 5.0 * r.error_estimate);
    EXPECT_NEAR(r.truncation_factor, 0.8, 1e-15);
}

TEST(NestedPicard, DepthTwoMatchesSeries) {
    auto const lc = bm_case(0.8, {0.5});
    auto const r = nested_picard(make_linear_problem(lc), 2, 300, 3);
    EXPECT_NEAR(r.value, linear_picard_iterate(lc, 2).value, 5.0 * r.error_estimate);
    EXPECT_NEAR(r.truncation_factor, 0.32, 1e-15);
}

TEST(NestedPicard, BudgetGuard) {
    auto const pb = make_linear_problem(bm_case(0.5, {0.0}));
    EXPECT_THROW(nested_picard(pb, 4, 10, 1), UsageError);
    EXPECT_THROW(nested_picard(pb, 1, 1001, 1), UsageError);
    EXPECT_THROW(nested_picard(pb, 3, 1000, 1), UsageError);
}

TEST(NestedPicard, IndependentOfWorkers) {
    auto const pb = make_linear_problem(bm_case(0.5, {0.0}));
    EXPECT_EQ(nested_picard(pb, 2, 50, 4, 1).value, nested_picard(pb, 2, 50, 4, 3).value);
}

// Default-risk instance in d = 1: deeper Picard iterates approach the FD value.
TEST(NestedPicard, ApproachesFiniteDifferenceOnDefaultRisk) {
    DefaultRiskParams const drp;
    auto const gp = GbmParams::uncorrelated({0.02}, {0.2});
    Problem<GbmField> const pb(1, 1.0, {60.0}, GbmField(gp), default_risk_nonlinearity(drp),
                               capped_min_g(60.0));
    FdProblem fd;
    fd.field = FieldKind::gbm;
    fd.alpha = 0.02;
    fd.beta = 0.2;
    fd.xi = 60.0;
    fd.f = pb.f;
    fd.g = pb.g;
    double const u = fd_solve_1d(fd).value;

    std::vector<double> gap(20);
    for (std::int64_t r = 0; r < 20; ++r) {
        double const u1 = nested_picard(pb, 1, 400, 100 + r).value;
        double const u3 = nested_picard(pb, 3, 60, 100 + r).value;
        gap[r] = std::abs(u1 - u) - std::abs(u3 - u);
    }
    auto const m = sample_moments(gap);
    EXPECT_GT(m.mean, 5.0 * m.stderr_of_mean()) << "mean gap " << m.mean;
}

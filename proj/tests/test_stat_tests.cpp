// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "mlp/stat_tests.hpp"

using namespace mlp;

namespace {

bool all_pass(const std::vector<CltVerdict>& vs) {
    for (auto const& v : vs)
        if (!v.pass) return false;
    return true;
}

LinearCase heat_case(double c) {
    LinearCase lc;
    lc.c = c;
    lc.xi = {0.0};
    return lc;
}

} // namespace

TEST(CltVerdict, PassRule) {
    auto const v = make_verdict("x", 1.0, 1.4, 0.1, 5.0);
    EXPECT_TRUE(v.pass);
    EXPECT_NEAR(v.z_score(), 4.0, 1e-12);
    EXPECT_FALSE(make_verdict("x", 1.0, 1.6, 0.1, 5.0).pass);
    EXPECT_TRUE(make_verdict("x", 2.0, 2.0, 0.0).pass);
    EXPECT_FALSE(make_verdict("x", 2.0, 2.1, 0.0).pass);
}

TEST(SampleMoments, MatchesTwoPass) {
    std::vector<double> const y{1.0, 4.0, 2.0, 8.0, -3.0};
    auto const m = sample_moments(y);
    EXPECT_DOUBLE_EQ(m.mean, 2.4);
    EXPECT_NEAR(m.variance, 16.3, 1e-12);
    EXPECT_EQ(m.count, 5u);
}

TEST(LeastSquares, ExactLine) {
    std::vector<double> const x{0.0, 1.0, 2.0, 3.0}, y{1.0, 3.0, 5.0, 7.0};
    auto const f = least_squares(x, y);
    EXPECT_NEAR(f.slope, 2.0, 1e-14);
    EXPECT_NEAR(f.intercept, 1.0, 1e-14);
    std::vector<double> const flat{1.0, 1.0};
    EXPECT_THROW(least_squares(flat, flat), UsageError);
}

TEST(KolmogorovSmirnov, SameAndShiftedSamples) {
    std::vector<double> a, b, c;
    auto const k = make_key(1, MultiIndex{0}, StreamTag::auxiliary);
    for (std::uint64_t i = 0; i < 2000; ++i) {
        a.push_back(uniform01(k, i));
        b.push_back(uniform01(k, i + 5000));
        c.push_back(uniform01(k, i + 9000) + 0.2);
    }
    EXPECT_GT(ks_two_sample(a, b).p_value, 1e-3);
    EXPECT_LT(ks_two_sample(a, c).p_value, 1e-10);
    EXPECT_NEAR(ks_two_sample(a, a).statistic, 0.0, 1e-15);
}

TEST(FlowProperty, IdentityCase) {
    GbmField const f(GbmParams::uncorrelated({0.05}, {0.2}));
    std::vector<double> const x{1.0};
    auto const vs = flow_property_test(f, 0.0, 0.0, 1.0, x, 10000, 3);
    EXPECT_TRUE(all_pass(vs));
    EXPECT_EQ(vs.size(), 2u);
}

TEST(FlowProperty, GbmOneDimension) {
    GbmField const f(GbmParams::uncorrelated({0.05}, {0.2}));
    std::vector<double> const x{1.0};
    auto const vs = flow_property_test(f, 0.0, 0.5, 1.0, x, 100000, 4);
    EXPECT_TRUE(all_pass(vs));
    // both mean estimates sit near x e^{alpha r}
    EXPECT_NEAR(vs[0].target, std::exp(0.05), 5.0 * vs[0].stderr_);
}

TEST(FlowProperty, BrownianThreeDimensions) {
    std::vector<double> const x{0.0, 1.0, -1.0};
    EXPECT_TRUE(all_pass(flow_property_test(BrownianField(3), 0.2, 0.5, 1.0, x, 20000, 5)));
}

TEST(FlowProperty, MismatchedDriftFails) {
    GbmField const f(GbmParams::uncorrelated({0.05}, {0.2}));
    GbmField const g(GbmParams::uncorrelated({0.25}, {0.2}));
    std::vector<double> const x{1.0};
    EXPECT_FALSE(all_pass(flow_property_test(f, g, 0.0, 0.5, 1.0, x, 100000, 6)));
}

TEST(FlowProperty, Preconditions) {
    std::vector<double> const x{0.0};
    EXPECT_THROW(flow_property_test(BrownianField(1), 0.0, 0.5, 0.4, x, 10000, 1), UsageError);
    EXPECT_THROW(flow_property_test(BrownianField(1), 0.0, 0.5, 1.0, x, 9999, 1), UsageError);
}

TEST(FlowProperty, KolmogorovSmirnovVariant) {
    GbmField const f(GbmParams::uncorrelated({0.05}, {0.2}));
    EXPECT_TRUE(flow_property_ks(f, 0.0, 0.5, 1.0, 1.0, 20000, 7).pass);
    EXPECT_THROW(flow_property_ks(BrownianField(2), 0.0, 0.5, 1.0, 1.0, 100, 7), UsageError);
}

TEST(EmRate, GbmStrongOrderHalf) {
    auto const p = GbmParams::uncorrelated({0.05}, {0.2});
    GbmField const exact(p);
    ExactEndpoint const ep = [&](double t, double s, std::span<const double> x,
                                 std::span<const double> dw) { return exact.endpoint(t, s, x, dw); };
    std::vector<double> const x{1.0};
    auto const r = em_rate_test(gbm_coefficients(p), ep, 0.0, 1.0, x, {4, 8, 16, 32, 64, 128}, 5000, 8);
    EXPECT_FALSE(r.deterministic);
    EXPECT_TRUE(r.verdict.pass) << "slope " << r.slope;
    EXPECT_TRUE(r.monotone);
}

TEST(EmRate, DeterministicDriftIsFirstOrder) {
    SdeCoefficients c;
    c.mu = [](double, std::span<const double> x, std::span<double> o) { o[0] = 0.5 * x[0]; };
    c.sigma = [](double, std::span<const double>, std::span<double> o) { o[0] = 0.0; };
    ExactEndpoint const ep = [](double t, double s, std::span<const double> x, std::span<const double>) {
        return std::vector<double>{x[0] * std::exp(0.5 * (s - t))};
    };
    std::vector<double> const x{1.0};
    auto const r = em_rate_test(c, ep, 0.0, 1.0, x, {4, 8, 16, 32}, 10, 9);
    EXPECT_TRUE(r.deterministic);
    EXPECT_NEAR(r.slope, 1.0, 0.1);
    EXPECT_EQ(r.verdict.note, "not applicable (deterministic)");
    EXPECT_TRUE(r.monotone);
}

TEST(EmRate, Preconditions) {
    auto const c = gbm_coefficients(GbmParams::uncorrelated({0.05}, {0.2}));
    ExactEndpoint const ep = [](double, double, std::span<const double> x, std::span<const double>) {
        return std::vector<double>(x.begin(), x.end());
    };
    std::vector<double> const x{1.0};
    EXPECT_THROW(em_rate_test(c, ep, 0.0, 1.0, x, {4, 8, 16}, 10, 1), UsageError);
    EXPECT_THROW(em_rate_test(c, ep, 0.0, 1.0, x, {4, 8, 12, 16}, 10, 1), UsageError);
    EXPECT_THROW(em_rate_test(c, ep, 0.0, 1.0, x, {5, 8, 16, 32}, 10, 1), UsageError);
}

TEST(MeanIdentity, LevelsOneAndTwo) {
    for (double c : {0.0, 1.0, -0.5}) {
        auto const lc = heat_case(c);
        EXPECT_TRUE(mean_identity_test(lc, 2, 1, 10000, 10).pass) << c;
        EXPECT_TRUE(mean_identity_test(lc, 2, 2, 10000, 11).pass) << c;
    }
    // two-step unroll for c = 1: E[g] (1 + cT) = 2
    EXPECT_DOUBLE_EQ(mean_identity_test(heat_case(1.0), 2, 2, 1000, 12).target, 2.0);
}

TEST(MeanIdentity, WrongTargetFails) {
    EXPECT_FALSE(mean_identity_test(heat_case(1.0), 2, 2, 10000, 13, 5.0, 1, 1).pass);
}

TEST(MeanIdentity, GbmSumOfCoordinates) {
    LinearCase lc;
    lc.c = 0.5;
    lc.field = FieldKind::gbm;
    lc.g = GKind::sum_of_coordinates;
    lc.xi = {1.0, 2.0};
    lc.gbm = GbmParams::uncorrelated({0.05, 0.02}, {0.2, 0.3});
    EXPECT_TRUE(mean_identity_test(lc, 3, 2, 5000, 14).pass);
}

TEST(MomentDomination, BrownianAndGbm) {
    std::vector<double> const powers{1.0, 2.0, 4.0};
    std::vector<double> const xi0{0.0};
    for (auto const& mc : moment_domination(BrownianField(1), 1.0, xi0, 1.0, 0.0, powers, 100000, 15))
        EXPECT_TRUE(mc.pass) << mc.p;
    auto const p = GbmParams::uncorrelated({0.05, 0.1}, {0.2, 0.3});
    std::vector<double> const xi{1.0, 2.0};
    for (auto const& mc : moment_domination(GbmField(p), 1.0, xi, 0.0, p.kappa(), powers, 100000, 16))
        EXPECT_TRUE(mc.pass) << mc.p;
}

TEST(MomentDomination, SecondMomentNearTruth) {
    std::vector<double> const powers{2.0};
    std::vector<double> const xi0{0.0};
    auto const mc = moment_domination(BrownianField(1), 1.0, xi0, 1.0, 0.0, powers, 100000, 17);
    EXPECT_NEAR(mc[0].empirical, 1.0, 5.0 * std::sqrt(2.0 / 100000));
}

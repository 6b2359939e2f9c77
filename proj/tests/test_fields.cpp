// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "mlp/fields.hpp"
#include "mlp/stat_tests.hpp"

using namespace mlp;

namespace {

StreamKey key_for(std::int64_t i, std::uint64_t seed = 17) {
    return make_key(seed, MultiIndex{-100, i}, StreamTag::field_increment);
}

template <class F>
std::vector<std::vector<double>> endpoints(const F& f, double t, double s,
                                           std::vector<double> x, std::size_t n) {
    std::vector<std::vector<double>> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(f.evaluate(t, s, x, key_for(i)).point);
    return out;
}

} // namespace

TEST(BrownianField, ZeroIncrementIsIdentityAndChargesD) {
    BrownianField const f(3);
    std::vector<double> const x{1.0, -2.0, 0.5};
    auto const r = f.evaluate(0.4, 0.4, x, key_for(0));
    EXPECT_EQ(r.point, x);
    EXPECT_EQ(r.draws, 3u);
}

TEST(BrownianField, RejectsBackwardTimeAndWrongDimension) {
    BrownianField const f(2);
    std::vector<double> const x{0.0, 0.0};
    EXPECT_THROW(f.evaluate(0.5, 0.4, x, key_for(0)), UsageError);
    std::vector<double> const bad{0.0};
    EXPECT_THROW(f.evaluate(0.0, 1.0, bad, key_for(0)), UsageError);
    EXPECT_THROW(BrownianField(0), UsageError);
}

TEST(BrownianField, Deterministic) {
    BrownianField const f(2);
    std::vector<double> const x{0.0, 1.0};
    EXPECT_EQ(f.evaluate(0.0, 1.0, x, key_for(5)).point, f.evaluate(0.0, 1.0, x, key_for(5)).point);
    EXPECT_NE(f.evaluate(0.0, 1.0, x, key_for(5)).point, f.evaluate(0.0, 1.0, x, key_for(6)).point);
}

TEST(BrownianField, MeanOneDimension) {
    BrownianField const f(1);
    constexpr std::size_t n = 100000;
    double s = 0.0;
    for (auto const& p : endpoints(f, 0.0, 1.0, {0.0}, n)) s += p[0];
    EXPECT_NEAR(s / n, 0.0, 4.0 / std::sqrt(double(n)));
}

TEST(BrownianField, SquaredNormThreeDimensions) {
    BrownianField const f(3);
    constexpr std::size_t n = 100000;
    std::vector<double> sq;
    for (auto const& p : endpoints(f, 0.0, 1.0, {0.0, 0.0, 0.0}, n))
        sq.push_back(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
    auto const m = sample_moments(sq);
    // Var(chi2_3) = 6
    EXPECT_NEAR(m.mean, 3.0, 5.0 * std::sqrt(6.0 / n));
}

TEST(GbmParams, Validation) {
    EXPECT_THROW(GbmParams({0.1}, {0.2, 0.3}, {}, 1.0), UsageError);
    EXPECT_THROW(GbmParams({0.1}, {0.2}, {{0.5}}, 1.0), UsageError);
    EXPECT_THROW(GbmParams({0.5}, {0.2}, {}, 0.1), UsageError);
    EXPECT_THROW(GbmParams({0.01}, {0.5}, {}, 0.1), UsageError);
    auto const p = GbmParams::uncorrelated({0.05, -0.3}, {0.2, 0.1});
    EXPECT_DOUBLE_EQ(p.kappa(), 0.3);
    EXPECT_TRUE(p.identity_sigma());
}

TEST(GbmParams, NormalizeColumns) {
    auto const c = normalize_columns({{3.0, 4.0}, {1.0, 0.0}});
    EXPECT_DOUBLE_EQ(c[0][0], 0.6);
    EXPECT_DOUBLE_EQ(c[0][1], 0.8);
    EXPECT_THROW(normalize_columns({{0.0, 0.0}}), UsageError);
    GbmParams const p({0.0, 0.0}, {0.1, 0.1}, c, 0.1);
    EXPECT_FALSE(p.identity_sigma());
}

TEST(GbmField, ZeroIncrementIsIdentity) {
    GbmField const f(GbmParams::uncorrelated({0.05, 0.02}, {0.2, 0.1}));
    std::vector<double> const x{1.5, 0.7};
    auto const r = f.evaluate(0.3, 0.3, x, key_for(0));
    EXPECT_EQ(r.point, x);
    EXPECT_EQ(r.draws, 2u);
}

TEST(GbmField, ZeroVolatilityMatchesOde) {
    GbmField const f(GbmParams::uncorrelated({0.05, -0.2, 0.0}, {0.0, 0.0, 0.0}));
    std::vector<double> const x{1.0, 2.0, 3.0};
    for (std::int64_t i = 0; i < 5; ++i) {
        auto const r = f.evaluate(0.25, 1.5, x, key_for(i));
        EXPECT_EQ(r.draws, 3u);
        EXPECT_NEAR(r.point[0], 1.0 * std::exp(0.05 * 1.25), 1e-12 * std::exp(0.05 * 1.25));
        EXPECT_NEAR(r.point[1], 2.0 * std::exp(-0.25), 1e-12 * 2.0 * std::exp(-0.25));
        EXPECT_EQ(r.point[2], 3.0);
    }
}

TEST(GbmField, EndpointUsesSigmaColumns) {
    auto cols = normalize_columns({{1.0, 1.0}, {1.0, -1.0}});
    GbmField const f(GbmParams({0.0, 0.0}, {0.2, 0.3}, cols, 0.1));
    std::vector<double> const x{1.0, 1.0}, dw{0.3, -0.1};
    auto const y = f.endpoint(0.0, 1.0, x, dw);
    double const r = 1.0 / std::sqrt(2.0);
    EXPECT_NEAR(y[0], std::exp(-0.02 + 0.2 * r * 0.2), 1e-15);
    EXPECT_NEAR(y[1], std::exp(-0.045 + 0.3 * r * 0.4), 1e-15);
}

TEST(GbmField, LognormalMean) {
    GbmField const f(GbmParams::uncorrelated({0.05}, {0.2}));
    constexpr std::size_t n = 100000;
    std::vector<double> v;
    for (auto const& p : endpoints(f, 0.0, 1.0, {1.0}, n)) v.push_back(p[0]);
    auto const m = sample_moments(v);
    // Var X_T = e^{2a}(e^{b^2} - 1)
    double const sd = std::sqrt(std::exp(0.1) * (std::exp(0.04) - 1.0));
    EXPECT_NEAR(m.mean, std::exp(0.05), 5.0 * sd / std::sqrt(double(n)));
}

TEST(EulerMaruyama, FrozenDynamics) {
    SdeCoefficients c;
    c.d = 2;
    c.m = 3;
    c.mu = [](double, std::span<const double>, std::span<double> o) { std::fill(o.begin(), o.end(), 0.0); };
    c.sigma = c.mu;
    std::vector<double> const x{1.0, -1.0};
    auto const r = em_flow(c, 7, 0.0, 1.0, x, key_for(0));
    EXPECT_EQ(r.point, x);
    EXPECT_EQ(r.draws, 21u);
    EXPECT_THROW(em_flow(c, 0, 0.0, 1.0, x, key_for(0)), UsageError);
}

TEST(EulerMaruyama, SingleStepAlgebra) {
    auto const p = GbmParams::uncorrelated({0.05}, {0.2});
    auto const c = gbm_coefficients(p);
    std::vector<double> const x{2.0};
    double const t = 0.2, s = 0.7;
    auto const k = key_for(3);
    auto const r = em_flow(c, 1, t, s, x, k);
    double const dw = std::sqrt(s - t) * std_normals(k, 0, 1)[0];
    EXPECT_NEAR(r.point[0], 2.0 * (1.0 + 0.05 * (s - t) + 0.2 * dw), 1e-15);
    EXPECT_EQ(r.draws, 1u);
}

TEST(EulerMaruyama, NotExact) {
    EulerMaruyamaField const f(gbm_coefficients(GbmParams::uncorrelated({0.0}, {0.1})), 4);
    EXPECT_FALSE(f.exact());
    EXPECT_TRUE(BrownianField(1).exact());
    EXPECT_FALSE(AnyField(f).exact());
}

TEST(SdeCoefficients, GbmGrowthCondition) {
    auto const p = GbmParams::uncorrelated({0.05, -0.1}, {0.3, 0.2});
    auto const c = gbm_coefficients(p);
    std::vector<std::vector<double>> pts{{1.0, 2.0}, {-3.0, 0.5}, {100.0, -50.0}, {0.0, 0.0}};
    EXPECT_TRUE(c.growth_holds(0.0, pts));
    auto tight = c;
    tight.c2 = 0.01;
    EXPECT_FALSE(tight.growth_holds(0.0, pts));
}

TEST(AnyField, DispatchesToHeldField) {
    AnyField const a(BrownianField(2));
    BrownianField const b(2);
    std::vector<double> const x{0.0, 0.0};
    EXPECT_EQ(a.dimension(), 2u);
    EXPECT_EQ(a.evaluate(0.0, 1.0, x, key_for(1)).point, b.evaluate(0.0, 1.0, x, key_for(1)).point);
}

TEST(MomentBound, ZeroPower) {
    EXPECT_DOUBLE_EQ(moment_bound(0.0, 0.0, 0.0, 0.5, 3.0), 2.0);
    EXPECT_DOUBLE_EQ(moment_bound(0.0, 2.0, 1.0, 3.0, 0.0), 6.0);
}

TEST(MomentBound, SecondPowerNoGrowth) {
    EXPECT_NEAR(moment_bound(2.0, 0.0, 0.0, 1.0, 0.0), std::exp(5.0), 1e-12 * std::exp(5.0));
}

TEST(MomentBound, GeneralValue) {
    // 2 * ((1+4)^{1/2} + 2*3^{1/2}) * exp(1*4*1.5*2/2)
    double const expect = 2.0 * (std::sqrt(5.0) + 2.0 * std::sqrt(3.0)) * std::exp(6.0);
    EXPECT_NEAR(moment_bound(1.0, 3.0, 0.5, 2.0, 2.0), expect, 1e-12 * expect);
}

TEST(MomentBound, RejectsNegativeInputs) {
    EXPECT_THROW(moment_bound(-1.0, 0.0, 0.0, 1.0, 0.0), UsageError);
    EXPECT_THROW(moment_bound(1.0, -1.0, 0.0, 1.0, 0.0), UsageError);
    EXPECT_THROW(moment_bound(1.0, 0.0, 0.0, 0.0, 0.0), UsageError);
}

TEST(MomentBound, DominatesBrownianSecondMoment) {
    BrownianField const f(1);
    double s = 0.0;
    constexpr std::size_t n = 100000;
    for (auto const& p : endpoints(f, 0.0, 1.0, {0.0}, n)) s += p[0] * p[0];
    EXPECT_LE(s / n, moment_bound(2.0, 1.0, 0.0, 1.0, 0.0));
}

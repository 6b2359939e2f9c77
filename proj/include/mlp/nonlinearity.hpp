// SPDX-License-Identifier: Apache-2.0
#pragma once

/*!
 * \file nonlinearity.hpp
 * \brief Lipschitz nonlinearities f(t, x, v) with declared constants.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>

#include "mlp/errors.hpp"
#include "mlp/rng_streams.hpp"

namespace mlp {

/// Polynomial growth data: |h(x)| <= K d^P (1 + |x|^p).
struct Growth {
    double K = 0.0;
    double p = 0.0;
    double P = 0.0;

    double bound(std::size_t d, double norm_x) const {
        double const xp = p == 0.0 ? 1.0 : std::pow(norm_x, p);
        return K * std::pow(double(d), P) * (1.0 + xp);
    }
};

class Nonlinearity {
  public:
    using Fn = std::function<double(double, std::span<const double>, double)>;

    Nonlinearity(std::string name, Fn fn, double lipschitz, Growth growth)
        : name_(std::move(name)), fn_(std::move(fn)), L_(lipschitz), growth_(growth) {
        detail::require(L_ >= 0.0, "Nonlinearity: Lipschitz constant must be >= 0");
    }

    double operator()(double t, std::span<const double> x, double v) const {
        return fn_(t, x, v);
    }
    double evaluate(double t, std::span<const double> x, double v) const {
        return fn_(t, x, v);
    }

    const std::string& name() const { return name_; }
    double lipschitz() const { return L_; }
    const Growth& growth() const { return growth_; }

  private:
    std::string name_;
    Fn fn_;
    double L_;
    Growth growth_;
};

/// f(t, x, v) = c v.
inline Nonlinearity linear_f(double c) {
    return Nonlinearity(
        "linear", [c](double, std::span<const double>, double v) { return c * v; },
        std::abs(c), Growth{});
}

inline Nonlinearity zero_f() {
    return Nonlinearity(
        "zero", [](double, std::span<const double>, double) { return 0.0; }, 0.0, Growth{});
}

//---------------------------------------------------------------------------//
// Default-risk nonlinearity
//---------------------------------------------------------------------------//
struct DefaultRiskParams {
    double R = 0.02;        //!< interest rate
    double epsilon = 2.0 / 3.0; //!< recovery fraction
    double gamma_l = 0.02;  //!< low default intensity
    double gamma_h = 0.2;   //!< high default intensity
    double v_l = 70.0;      //!< value above which the intensity is gamma_l
    double v_h = 50.0;      //!< value below which the intensity is gamma_h

    /// Throws UsageError unless gamma_l < gamma_h, v_h < v_l, epsilon in
    /// [0,1) and all rates and thresholds are positive.
    void validate() const {
        detail::require(R > 0.0 && gamma_l > 0.0 && gamma_h > 0.0 && v_l > 0.0 && v_h > 0.0,
                        "DefaultRiskParams: rates and thresholds must be positive");
        detail::require(gamma_l < gamma_h, "DefaultRiskParams: need gamma_l < gamma_h");
        detail::require(v_h < v_l, "DefaultRiskParams: need v_h < v_l");
        detail::require(epsilon >= 0.0 && epsilon < 1.0,
                        "DefaultRiskParams: epsilon must lie in [0,1)");
    }
};

/// Piecewise-linear intensity Q(u): gamma_h below v_h, gamma_l above v_l.
inline double intensity_clamp(const DefaultRiskParams& p, double u) {
    double const slope = (p.gamma_h - p.gamma_l) / (p.v_h - p.v_l);
    return std::min(p.gamma_h, std::max(p.gamma_l, slope * (u - p.v_h) + p.gamma_h));
}

/// f(u) = -R u - (1 - epsilon) Q(u) u
inline double default_risk_f(const DefaultRiskParams& p, double u) {
    return -p.R * u - (1.0 - p.epsilon) * intensity_clamp(p, u) * u;
}

/*!
 * Certified Lipschitz constant of default_risk_f.
 *
 * On the outer branches f is linear with |f'| = R + (1-eps) gamma. On
 * [v_h, v_l] f is quadratic, so |f'| is maximised at an endpoint.
 * Accepts degenerate inputs (epsilon = 1, gamma_l = gamma_h) that validate()
 * rejects; requires v_h < v_l.
 */
inline double lipschitz_of_default_risk(const DefaultRiskParams& p) {
    detail::require(p.v_h < p.v_l, "lipschitz_of_default_risk: need v_h < v_l");
    double const w = 1.0 - p.epsilon;
    double const slope = (p.gamma_h - p.gamma_l) / (p.v_h - p.v_l);
    auto const middle_derivative = [&](double u) {
        return -p.R - w * (2.0 * slope * u - slope * p.v_h + p.gamma_h);
    };
    return std::max({std::abs(p.R + w * p.gamma_l), std::abs(p.R + w * p.gamma_h),
                     std::abs(middle_derivative(p.v_h)),
                     std::abs(middle_derivative(p.v_l))});
}

inline Nonlinearity default_risk_nonlinearity(const DefaultRiskParams& p) {
    p.validate();
    return Nonlinearity(
        "default_risk",
        [p](double, std::span<const double>, double v) { return default_risk_f(p, v); },
        lipschitz_of_default_risk(p), Growth{});
}

//---------------------------------------------------------------------------//
// Sampled checks of the declared constants
//---------------------------------------------------------------------------//
struct SampledCheck {
    std::size_t samples = 0;
    std::size_t violations = 0;
    double worst_ratio = 0.0; //!< max observed |f(v)-f(w)| / |v-w| (or growth ratio)
    bool ok() const { return violations == 0; }
};

namespace detail {

// Triples (t, x, v, w) drawn from auxiliary streams under root (-1, tag).
template <class Visit>
void sample_triples(std::size_t d, double T, double spread, std::size_t count,
                    std::uint64_t seed, std::int64_t tag, Visit&& visit) {
    std::vector<double> x(d);
    for (std::size_t i = 0; i < count; ++i) {
        auto const key = make_key(seed, MultiIndex{-1, tag, std::int64_t(i)}, StreamTag::auxiliary);
        double const t = T * uniform01(key, 0);
        double const v = spread * (2.0 * uniform01(key, 1) - 1.0);
        double const w = spread * (2.0 * uniform01(key, 2) - 1.0);
        std_normals(key, 3, x);
        for (auto& xi : x) xi *= spread;
        visit(t, std::span<const double>(x), v, w);
    }
}

} // namespace detail

/// |f(t,x,v) - f(t,x,w)| <= L|v - w| on \p count random triples. The only
/// allowance is a few ulps of floating-point rounding in the difference.
inline SampledCheck check_lipschitz(const Nonlinearity& f, std::size_t d, double T,
                                    double spread, std::size_t count, std::uint64_t seed) {
    SampledCheck out;
    double const L = f.lipschitz();
    constexpr double eps = std::numeric_limits<double>::epsilon();
    detail::sample_triples(d, T, spread, count, seed, 1,
                           [&](double t, std::span<const double> x, double v, double w) {
                               double const lhs = std::abs(f(t, x, v) - f(t, x, w));
                               double const rhs = L * std::abs(v - w);
                               double const round = 8.0 * eps * L * (std::abs(v) + std::abs(w));
                               ++out.samples;
                               if (v != w) out.worst_ratio = std::max(out.worst_ratio, lhs / std::abs(v - w));
                               if (lhs > rhs + round) ++out.violations;
                           });
    return out;
}

/// |f(t,x,0)| <= K d^P (1 + |x|^p) on \p count random points.
inline SampledCheck check_growth(const Nonlinearity& f, std::size_t d, double T,
                                 double spread, std::size_t count, std::uint64_t seed) {
    SampledCheck out;
    detail::sample_triples(d, T, spread, count, seed, 2,
                           [&](double t, std::span<const double> x, double, double) {
                               double const nx = std::sqrt(std::inner_product(x.begin(), x.end(), x.begin(), 0.0));
                               double const lhs = std::abs(f(t, x, 0.0));
                               double const rhs = f.growth().bound(d, nx);
                               ++out.samples;
                               if (rhs > 0.0) out.worst_ratio = std::max(out.worst_ratio, lhs / rhs);
                               if (lhs > rhs) ++out.violations;
                           });
    return out;
}

} // namespace mlp

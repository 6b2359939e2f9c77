// SPDX-License-Identifier: Apache-2.0
#pragma once

/*!
 * \file fields.hpp
 * \brief Solution fields X_{t,s}(x) of forward SDEs.
 *
 * A field is evaluated from a StreamKey; the returned sample carries the
 * number of standard normals the evaluation is charged for. Exact fields
 * (Brownian, geometric Brownian) sample the increment W_s - W_t in one
 * Gaussian step. The Euler-Maruyama field is a fallback for general
 * coefficients and is flagged as inexact.
 */

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mlp/errors.hpp"
#include "mlp/rng_streams.hpp"

namespace mlp {

struct FieldSample {
    std::vector<double> point;
    std::uint64_t draws = 0;
};

template <class F>
concept FlowField = requires(const F& f, double t, std::span<const double> x,
                             const StreamKey& key) {
    { f.dimension() } -> std::convertible_to<std::size_t>;
    { f.exact() } -> std::convertible_to<bool>;
    { f.evaluate(t, t, x, key) } -> std::same_as<FieldSample>;
};

namespace detail {

inline void check_times(double t, double s) {
    if (!(std::isfinite(t) && std::isfinite(s)))
        throw NumericalError("field evaluated at non-finite time");
    require(t <= s, "field evaluation requires t <= s");
}

inline void check_dim(std::span<const double> x, std::size_t d) {
    require(x.size() == d, "point dimension does not match field dimension");
}

} // namespace detail

//---------------------------------------------------------------------------//
// Brownian flow: X_{t,s}(x) = x + W_s - W_t
//---------------------------------------------------------------------------//
class BrownianField {
  public:
    explicit BrownianField(std::size_t d) : d_(d) {
        detail::require(d >= 1, "BrownianField: dimension must be >= 1");
    }

    std::size_t dimension() const { return d_; }
    bool exact() const { return true; }

    //! Endpoint for a given increment W_s - W_t.
    std::vector<double> endpoint(std::span<const double> x,
                                 std::span<const double> dw) const {
        std::vector<double> y(x.begin(), x.end());
        for (std::size_t i = 0; i < d_; ++i) y[i] += dw[i];
        return y;
    }

    FieldSample evaluate(double t, double s, std::span<const double> x,
                         const StreamKey& key) const {
        detail::check_times(t, s);
        detail::check_dim(x, d_);
        FieldSample out{{x.begin(), x.end()}, d_};
        if (s == t) return out;
        std::vector<double> z(d_);
        std_normals(key, 0, z);
        double const scale = std::sqrt(s - t);
        for (std::size_t i = 0; i < d_; ++i) out.point[i] += scale * z[i];
        return out;
    }

  private:
    std::size_t d_;
};

inline FieldSample bm_flow(const BrownianField& field, double t, double s,
                           std::span<const double> x, const StreamKey& key) {
    return field.evaluate(t, s, x, key);
}

//---------------------------------------------------------------------------//
// Correlated geometric Brownian motion
//---------------------------------------------------------------------------//
class GbmParams {
  public:
    /// \p sigma_cols holds the unit-norm columns of Sigma; pass an empty
    /// vector for the identity.
    GbmParams(std::vector<double> alphas, std::vector<double> betas,
              std::vector<std::vector<double>> sigma_cols, double kappa)
        : alphas_(std::move(alphas)),
          betas_(std::move(betas)),
          cols_(std::move(sigma_cols)),
          kappa_(kappa) {
        std::size_t const d = alphas_.size();
        detail::require(d >= 1, "GbmParams: dimension must be >= 1");
        detail::require(betas_.size() == d, "GbmParams: betas size mismatch");
        if (cols_.empty()) {
            cols_.assign(d, std::vector<double>(d, 0.0));
            for (std::size_t i = 0; i < d; ++i) cols_[i][i] = 1.0;
        }
        detail::require(cols_.size() == d, "GbmParams: Sigma must be d x d");
        for (auto const& c : cols_) {
            detail::require(c.size() == d, "GbmParams: Sigma must be d x d");
            double const n2 = std::inner_product(c.begin(), c.end(), c.begin(), 0.0);
            detail::require(std::abs(std::sqrt(n2) - 1.0) <= 1e-12,
                            "GbmParams: Sigma columns must have unit norm");
        }
        for (std::size_t i = 0; i < d; ++i) {
            detail::require(std::max(std::abs(alphas_[i]), betas_[i] * betas_[i]) <= kappa_,
                            "GbmParams: max(|alpha|, beta^2) exceeds kappa");
        }
        identity_ = true;
        for (std::size_t i = 0; i < d && identity_; ++i)
            for (std::size_t j = 0; j < d; ++j)
                if (cols_[i][j] != (i == j ? 1.0 : 0.0)) {
                    identity_ = false;
                    break;
                }
    }

    /// Uncorrelated case with kappa = max_i max(|alpha_i|, beta_i^2).
    static GbmParams uncorrelated(std::vector<double> alphas, std::vector<double> betas) {
        double kappa = 0.0;
        for (std::size_t i = 0; i < alphas.size() && i < betas.size(); ++i)
            kappa = std::max({kappa, std::abs(alphas[i]), betas[i] * betas[i]});
        return GbmParams(std::move(alphas), std::move(betas), {}, kappa);
    }

    std::size_t dimension() const { return alphas_.size(); }
    std::span<const double> alphas() const { return alphas_; }
    std::span<const double> betas() const { return betas_; }
    const std::vector<std::vector<double>>& sigma_cols() const { return cols_; }
    double kappa() const { return kappa_; }
    bool identity_sigma() const { return identity_; }

  private:
    std::vector<double> alphas_;
    std::vector<double> betas_;
    std::vector<std::vector<double>> cols_;
    double kappa_;
    bool identity_ = true;
};

/// Rescales each column to unit Euclidean norm.
inline std::vector<std::vector<double>>
normalize_columns(std::vector<std::vector<double>> cols) {
    for (auto& c : cols) {
        double const n = std::sqrt(std::inner_product(c.begin(), c.end(), c.begin(), 0.0));
        detail::require(n > 0.0, "normalize_columns: zero column");
        for (auto& v : c) v /= n;
    }
    return cols;
}

class GbmField {
  public:
    explicit GbmField(GbmParams params) : params_(std::move(params)) {}

    std::size_t dimension() const { return params_.dimension(); }
    bool exact() const { return true; }
    const GbmParams& params() const { return params_; }

    //! Endpoint for a given increment W_s - W_t.
    std::vector<double> endpoint(double t, double s, std::span<const double> x,
                                 std::span<const double> dw) const {
        std::size_t const d = dimension();
        std::vector<double> y(d);
        auto const a = params_.alphas();
        auto const b = params_.betas();
        for (std::size_t i = 0; i < d; ++i) {
            double proj;
            if (params_.identity_sigma()) {
                proj = dw[i];
            } else {
                auto const& col = params_.sigma_cols()[i];
                proj = std::inner_product(col.begin(), col.end(), dw.begin(), 0.0);
            }
            y[i] = x[i] * std::exp((a[i] - 0.5 * b[i] * b[i]) * (s - t) + b[i] * proj);
        }
        return y;
    }

    FieldSample evaluate(double t, double s, std::span<const double> x,
                         const StreamKey& key) const {
        detail::check_times(t, s);
        detail::check_dim(x, dimension());
        std::size_t const d = dimension();
        if (s == t) return {{x.begin(), x.end()}, d};
        std::vector<double> dw(d);
        std_normals(key, 0, dw);
        double const scale = std::sqrt(s - t);
        for (auto& v : dw) v *= scale;
        return {endpoint(t, s, x, dw), d};
    }

  private:
    GbmParams params_;
};

inline FieldSample gbm_flow(const GbmField& field, double t, double s,
                            std::span<const double> x, const StreamKey& key) {
    return field.evaluate(t, s, x, key);
}

//---------------------------------------------------------------------------//
// Euler-Maruyama fallback
//---------------------------------------------------------------------------//
struct SdeCoefficients {
    std::size_t d = 1;
    std::size_t m = 1;
    //! mu(t, x, out[d])
    std::function<void(double, std::span<const double>, std::span<double>)> mu;
    //! sigma(t, x, out[d*m]) row-major
    std::function<void(double, std::span<const double>, std::span<double>)> sigma;
    double lipschitz = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;

    /// Checks max(<x, mu>, |sigma|_F^2) <= C1 + C2 |x|^2 on the given points.
    bool growth_holds(double t, std::span<const std::vector<double>> points) const {
        std::vector<double> mu_v(d), sig_v(d * m);
        for (auto const& x : points) {
            mu(t, x, mu_v);
            sigma(t, x, sig_v);
            double const xm = std::inner_product(x.begin(), x.end(), mu_v.begin(), 0.0);
            double const sf = std::inner_product(sig_v.begin(), sig_v.end(), sig_v.begin(), 0.0);
            double const xx = std::inner_product(x.begin(), x.end(), x.begin(), 0.0);
            if (std::max(xm, sf) > c1 + c2 * xx) return false;
        }
        return true;
    }
};

/// GBM coefficients mu = alpha x, sigma = diag(beta x) Sigma^T.
inline SdeCoefficients gbm_coefficients(const GbmParams& p) {
    SdeCoefficients c;
    c.d = c.m = p.dimension();
    c.mu = [a = std::vector<double>(p.alphas().begin(), p.alphas().end())](
               double, std::span<const double> x, std::span<double> out) {
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = a[i] * x[i];
    };
    c.sigma = [b = std::vector<double>(p.betas().begin(), p.betas().end()),
               cols = p.sigma_cols()](double, std::span<const double> x, std::span<double> out) {
        std::size_t const d = x.size();
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) out[i * d + j] = b[i] * x[i] * cols[i][j];
    };
    double maxab = 0.0;
    for (std::size_t i = 0; i < p.dimension(); ++i)
        maxab = std::max({maxab, std::abs(p.alphas()[i]), std::abs(p.betas()[i])});
    c.lipschitz = maxab;
    c.c1 = 0.0;
    c.c2 = p.kappa();
    return c;
}

/// N equidistant Euler-Maruyama steps on [t, s] driven by the given
/// (already scaled) increments, laid out step-major with m entries per step.
inline std::vector<double> em_path(const SdeCoefficients& coef, std::size_t steps,
                                   double t, double s, std::span<const double> x,
                                   std::span<const double> increments) {
    detail::require(steps >= 1, "em_flow: step count must be >= 1");
    detail::require(increments.size() == steps * coef.m, "em_path: increment size mismatch");
    std::size_t const d = coef.d, m = coef.m;
    std::vector<double> y(x.begin(), x.end()), mu_v(d), sig_v(d * m);
    double const h = (s - t) / double(steps);
    for (std::size_t n = 0; n < steps; ++n) {
        double const tn = t + double(n) * h;
        coef.mu(tn, y, mu_v);
        coef.sigma(tn, y, sig_v);
        auto const dw = increments.subspan(n * m, m);
        for (std::size_t i = 0; i < d; ++i) {
            double acc = mu_v[i] * h;
            for (std::size_t j = 0; j < m; ++j) acc += sig_v[i * m + j] * dw[j];
            y[i] += acc;
        }
    }
    return y;
}

class EulerMaruyamaField {
  public:
    EulerMaruyamaField(SdeCoefficients coef, std::size_t steps)
        : coef_(std::move(coef)), steps_(steps) {
        detail::require(steps_ >= 1, "em_flow: step count must be >= 1");
    }

    std::size_t dimension() const { return coef_.d; }
    bool exact() const { return false; }
    std::size_t steps() const { return steps_; }
    const SdeCoefficients& coefficients() const { return coef_; }

    FieldSample evaluate(double t, double s, std::span<const double> x,
                         const StreamKey& key) const {
        detail::check_times(t, s);
        detail::check_dim(x, coef_.d);
        std::vector<double> inc(steps_ * coef_.m);
        std_normals(key, 0, inc);
        double const scale = std::sqrt((s - t) / double(steps_));
        for (auto& v : inc) v *= scale;
        return {em_path(coef_, steps_, t, s, x, inc), steps_ * coef_.m};
    }

  private:
    SdeCoefficients coef_;
    std::size_t steps_;
};

inline FieldSample em_flow(const SdeCoefficients& coef, std::size_t steps, double t,
                           double s, std::span<const double> x, const StreamKey& key) {
    return EulerMaruyamaField(coef, steps).evaluate(t, s, x, key);
}

//---------------------------------------------------------------------------//
// Runtime-selected field
//---------------------------------------------------------------------------//
class AnyField {
  public:
    using Variant = std::variant<BrownianField, GbmField, EulerMaruyamaField>;

    template <class F>
        requires std::constructible_from<Variant, F>
    AnyField(F f) : v_(std::move(f)) {}

    std::size_t dimension() const {
        return std::visit([](auto const& f) { return f.dimension(); }, v_);
    }
    bool exact() const {
        return std::visit([](auto const& f) { return f.exact(); }, v_);
    }
    FieldSample evaluate(double t, double s, std::span<const double> x,
                         const StreamKey& key) const {
        return std::visit([&](auto const& f) { return f.evaluate(t, s, x, key); }, v_);
    }
    const Variant& get() const { return v_; }

  private:
    Variant v_;
};

//---------------------------------------------------------------------------//
// A-priori moment bound
//---------------------------------------------------------------------------//
namespace detail {
// 0^0 := 1
inline double pow0(double base, double e) { return e == 0.0 ? 1.0 : std::pow(base, e); }
} // namespace detail

/// max{T,1} ((1+|xi|^2)^{p/2} + (p+1) C1^{p/2}) exp(p(p+3)(1+C2)T/2)
inline double moment_bound(double p, double c1, double c2, double T, double xi_norm) {
    detail::require(p >= 0.0 && c1 >= 0.0 && c2 >= 0.0 && xi_norm >= 0.0,
                    "moment_bound: inputs must be nonnegative");
    detail::require(T > 0.0, "moment_bound: T must be positive");
    double const lead = detail::pow0(1.0 + xi_norm * xi_norm, p / 2.0) +
                        (p + 1.0) * detail::pow0(c1, p / 2.0);
    return std::max(T, 1.0) * lead * std::exp(p * (p + 3.0) * (1.0 + c2) * T / 2.0);
}

} // namespace mlp

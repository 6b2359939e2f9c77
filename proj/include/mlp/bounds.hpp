// SPDX-License-Identifier: Apache-2.0
#pragma once

/*!
 * \file bounds.hpp
 * \brief Error constant, a-priori L2 bounds, cost recursion and level selection.
 */

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "mlp/errors.hpp"
#include "mlp/fields.hpp"
#include "mlp/parallel.hpp"
#include "mlp/problem.hpp"
#include "mlp/rng_streams.hpp"

namespace mlp {

//---------------------------------------------------------------------------//
// Error constant C = [ (E|g(X_{0,T})|^2)^{1/2} + sqrt(T) (int_0^T E|f(t,X_{0,t},0)|^2 dt)^{1/2} ] e^{LT}
//---------------------------------------------------------------------------//
struct ErrorConstant {
    double C = 0.0;
    double g_term = 0.0;
    double f_term = 0.0;
    double g_term_stderr = 0.0;
    double f_term_stderr = 0.0;
    double L = 0.0;
    double T = 0.0;
    std::size_t samples = 0;
    std::size_t time_nodes = 0;

    // Second-moment estimates behind the terms; upper() inflates these.
    double g_second_moment = 0.0;
    double g_second_moment_stderr = 0.0;
    double f_integral = 0.0;
    double f_integral_stderr = 0.0;

    /// C with both mean-square estimates inflated by z standard errors.
    double upper(double z) const {
        double const g_hi = std::sqrt(g_second_moment + z * g_second_moment_stderr);
        double const f_hi = std::sqrt(T) * std::sqrt(f_integral + z * f_integral_stderr);
        return (g_hi + f_hi) * std::exp(L * T);
    }
};

namespace detail {

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

inline MeanSe mean_and_se(std::span<const double> y) {
    double const n = double(y.size());
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : y) ss += (v - mean) * (v - mean);
    double const var = y.size() > 1 ? ss / (n - 1.0) : 0.0;
    return {mean, std::sqrt(var / n)};
}

inline double sqrt_stderr(double m2, double se) {
    // delta method for sqrt; falls back to sqrt(se) at m2 = 0
    return m2 > 0.0 ? se / (2.0 * std::sqrt(m2)) : std::sqrt(se);
}

} // namespace detail

/*!
 * Monte Carlo estimate of the error constant with S samples for the terminal
 * term and S samples at each of Q midpoint nodes for the time integral.
 *
 * Randomness: terminal sample i uses index (-2, 0, i); node q sample i uses
 * (-2, q + 1, i).
 */
template <FlowField F>
ErrorConstant estimate_error_constant(const Problem<F>& pb, std::size_t S, std::size_t Q,
                                      std::uint64_t seed, unsigned workers = 1) {
    detail::require(S >= 100, "estimate_error_constant: need S >= 100");
    detail::require(Q >= 4, "estimate_error_constant: need Q >= 4");

    auto const sample = [&](std::int64_t node, double t, bool terminal) {
        std::vector<double> y(S);
        parallel_for(S, workers, [&](std::size_t i) {
            auto const key = make_key(seed, MultiIndex{-2, node, std::int64_t(i)},
                                      StreamTag::field_increment);
            auto const X = pb.field.evaluate(0.0, t, pb.xi, key);
            double const v = terminal ? pb.g(X.point) : pb.f(t, X.point, 0.0);
            if (!std::isfinite(v))
                throw NumericalError("estimate_error_constant: non-finite sample");
            y[i] = v * v;
        });
        return detail::mean_and_se(y);
    };

    ErrorConstant ec;
    ec.L = pb.f.lipschitz();
    ec.T = pb.T;
    ec.samples = S;
    ec.time_nodes = Q;

    auto const g2 = sample(0, pb.T, true);
    ec.g_second_moment = g2.mean;
    ec.g_second_moment_stderr = g2.se;

    double const dt = pb.T / double(Q);
    double integral = 0.0, var_sum = 0.0;
    for (std::size_t q = 0; q < Q; ++q) {
        auto const f2 = sample(std::int64_t(q + 1), (double(q) + 0.5) * dt, false);
        integral += f2.mean;
        var_sum += f2.se * f2.se;
    }
    ec.f_integral = dt * integral;
    ec.f_integral_stderr = dt * std::sqrt(var_sum);

    ec.g_term = std::sqrt(ec.g_second_moment);
    ec.f_term = std::sqrt(pb.T) * std::sqrt(ec.f_integral);
    ec.g_term_stderr = detail::sqrt_stderr(ec.g_second_moment, ec.g_second_moment_stderr);
    ec.f_term_stderr =
        std::sqrt(pb.T) * detail::sqrt_stderr(ec.f_integral, ec.f_integral_stderr);
    ec.C = (ec.g_term + ec.f_term) * std::exp(ec.L * ec.T);
    if (!std::isfinite(ec.C)) throw NumericalError("estimate_error_constant: non-finite C");
    return ec;
}

//---------------------------------------------------------------------------//
// A-priori bounds
//---------------------------------------------------------------------------//
/// C (1 + 2LT)^n e^{M/2} / M^{n/2}
inline double a_priori_error(double C, double L, double T, std::uint64_t M, int n) {
    detail::require(M >= 1, "a_priori_error: need M >= 1");
    detail::require(n >= 0, "a_priori_error: need n >= 0");
    double const Md = double(M);
    return C * std::pow(1.0 + 2.0 * L * T, n) * std::exp(Md / 2.0) / std::pow(Md, n / 2.0);
}

/// C [sqrt(e) (1 + 2LT) / sqrt(N)]^N
inline double diagonal_error(double C, double L, double T, int N) {
    detail::require(N >= 1, "diagonal_error: need N >= 1");
    double const kappa = std::sqrt(std::numbers::e) * (1.0 + 2.0 * L * T);
    return C * std::pow(kappa / std::sqrt(double(N)), N);
}

//---------------------------------------------------------------------------//
// Cost model
//---------------------------------------------------------------------------//
struct CostValue {
    std::uint64_t value = 0;
    bool saturated = false; //!< true when the recursion overflowed 64 bits
};

namespace detail {

struct Saturating {
    std::uint64_t v = 0;
    bool sat = false;

    static constexpr std::uint64_t max = std::numeric_limits<std::uint64_t>::max();

    Saturating& operator+=(Saturating o) {
        sat = sat || o.sat || v > max - o.v;
        v = sat ? max : v + o.v;
        return *this;
    }
    friend Saturating operator*(Saturating a, Saturating b) {
        Saturating r;
        r.sat = a.sat || b.sat || (a.v != 0 && b.v > max / a.v);
        r.v = r.sat ? max : a.v * b.v;
        return r;
    }
};

} // namespace detail

/*!
 * Cost recursion taken with equality:
 *
 *   C_0 = 0,
 *   C_n = a d M^n + sum_{k<n} M^{n-k} (a d + 1 + C_k + 1_{k>=1} C_{k-1}).
 *
 * a d normals per field evaluation, one normal per random time.
 */
inline CostValue cost_formula(std::uint64_t d, std::uint64_t M, int n, std::uint64_t alpha) {
    using detail::Saturating;
    detail::require(d >= 1 && M >= 1, "cost_formula: need d, M >= 1");
    detail::require(n >= 0, "cost_formula: need n >= 0");
    detail::require(alpha >= 1, "cost_formula: need alpha >= 1");

    Saturating const ad = Saturating{alpha} * Saturating{d};
    std::vector<Saturating> M_pow(std::size_t(n) + 1);
    M_pow[0] = {1};
    for (int j = 1; j <= n; ++j) M_pow[j] = M_pow[j - 1] * Saturating{M};

    std::vector<Saturating> C(std::size_t(n) + 1);
    for (int j = 1; j <= n; ++j) {
        Saturating c = ad * M_pow[j];
        for (int k = 0; k < j; ++k) {
            Saturating node = ad;
            node += Saturating{1};
            node += C[k];
            if (k >= 1) node += C[k - 1];
            c += M_pow[j - k] * node;
        }
        C[j] = c;
    }
    return {C[n].v, C[n].sat};
}

/// a d (5M)^n
inline double cost_bound(std::uint64_t d, std::uint64_t M, int n, double alpha) {
    detail::require(d >= 1 && M >= 1, "cost_bound: need d, M >= 1");
    detail::require(n >= 0, "cost_bound: need n >= 0");
    detail::require(alpha >= 1.0, "cost_bound: need alpha >= 1");
    return alpha * double(d) * std::pow(5.0 * double(M), n);
}

//---------------------------------------------------------------------------//
// Level selection
//---------------------------------------------------------------------------//
class LevelCapReached : public std::runtime_error {
  public:
    LevelCapReached(int best_level, double best_bound, const std::string& msg)
        : std::runtime_error(msg), best_level_(best_level), best_bound_(best_bound) {}
    int best_level() const { return best_level_; }
    double best_bound() const { return best_bound_; }

  private:
    int best_level_;
    double best_bound_;
};

inline constexpr int default_level_cap = 12;

/// Smallest N >= 1 with diagonal_error(C, L, T, N) <= epsilon, by linear scan.
inline int select_level(double C, double L, double T, double epsilon,
                        int n_max = default_level_cap) {
    detail::require(epsilon > 0.0, "select_level: epsilon must be positive");
    detail::require(C >= 0.0, "select_level: C must be nonnegative");
    detail::require(n_max >= 1, "select_level: n_max must be >= 1");
    int best_level = 1;
    double best = std::numeric_limits<double>::infinity();
    for (int N = 1; N <= n_max; ++N) {
        double const b = diagonal_error(C, L, T, N);
        if (b <= epsilon) return N;
        if (b < best) {
            best = b;
            best_level = N;
        }
    }
    std::ostringstream os;
    os << "select_level: cap n_max = " << n_max << " reached; best bound " << best
       << " at N = " << best_level << " exceeds epsilon = " << epsilon;
    throw LevelCapReached(best_level, best, os.str());
}

} // namespace mlp

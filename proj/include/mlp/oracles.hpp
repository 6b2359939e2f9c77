// SPDX-License-Identifier: Apache-2.0
#pragma once

/*!
 * \file oracles.hpp
 * \brief Reference solutions independent of the MLP recursion.
 *
 *  - closed forms for f(v) = c v, from the moments of the exact flows
 *  - explicit finite differences for d = 1
 *  - nested Monte Carlo of the plain Picard iterates
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mlp/bounds.hpp"
#include "mlp/errors.hpp"
#include "mlp/fields.hpp"
#include "mlp/nonlinearity.hpp"
#include "mlp/parallel.hpp"
#include "mlp/problem.hpp"
#include "mlp/rng_streams.hpp"

namespace mlp {

enum class OracleMethod { closed_form, finite_difference, nested_picard, fixed };

inline const char* to_string(OracleMethod m) {
    switch (m) {
    case OracleMethod::closed_form: return "closed_form";
    case OracleMethod::finite_difference: return "finite_difference";
    case OracleMethod::nested_picard: return "nested_picard";
    case OracleMethod::fixed: return "fixed";
    }
    return "?";
}

struct ReferenceValue {
    double value = 0.0;
    OracleMethod method = OracleMethod::closed_form;
    double error_estimate = 0.0;
    //! nested_picard only: (LT)^k / k!, the relative Picard truncation factor
    double truncation_factor = 0.0;
};

//---------------------------------------------------------------------------//
// Closed forms for linear f
//---------------------------------------------------------------------------//
enum class FieldKind { bm, gbm };
enum class GKind { sum_of_coordinates, squared_norm, constant };

struct LinearCase {
    double c = 0.0;
    FieldKind field = FieldKind::bm;
    GKind g = GKind::squared_norm;
    double T = 1.0;
    std::vector<double> xi{0.0};
    std::optional<GbmParams> gbm;  //!< required for field == gbm
    double g_constant = 1.0;

    std::size_t d() const { return xi.size(); }
};

/// E[g(X_{0,T}(xi))] from the moment formulas of the exact flows.
inline double expected_terminal(const LinearCase& lc) {
    detail::require(!lc.xi.empty(), "LinearCase: xi must be non-empty");
    std::size_t const d = lc.d();
    if (lc.g == GKind::constant) return lc.g_constant;
    if (lc.field == FieldKind::bm) {
        double s = 0.0;
        if (lc.g == GKind::sum_of_coordinates) {
            for (double v : lc.xi) s += v;
            return s;
        }
        for (double v : lc.xi) s += v * v;
        return s + double(d) * lc.T;
    }
    detail::require(lc.gbm.has_value(), "linear_closed_form: gbm field needs GbmParams");
    auto const& p = *lc.gbm;
    detail::require(p.dimension() == d, "linear_closed_form: GbmParams dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        double const a = p.alphas()[i], b = p.betas()[i];
        if (lc.g == GKind::sum_of_coordinates)
            s += lc.xi[i] * std::exp(a * lc.T);
        else
            s += lc.xi[i] * lc.xi[i] * std::exp((2.0 * a + b * b) * lc.T);
    }
    return s;
}

/// u(0, xi) = e^{cT} E[g(X_{0,T}(xi))]
inline ReferenceValue linear_closed_form(const LinearCase& lc) {
    return {std::exp(lc.c * lc.T) * expected_terminal(lc), OracleMethod::closed_form, 0.0, 0.0};
}

/// k-th Picard iterate U_k(0, xi) = E[g] sum_{j<k} (cT)^j / j!.
/// Also the exact mean of the MLP estimator V_{M,k}(0, xi) for linear f.
inline ReferenceValue linear_picard_iterate(const LinearCase& lc, int k) {
    detail::require(k >= 0, "linear_picard_iterate: k must be >= 0");
    double series = 0.0, term = 1.0;
    for (int j = 0; j < k; ++j) {
        series += term;
        term *= lc.c * lc.T / double(j + 1);
    }
    return {series * expected_terminal(lc), OracleMethod::closed_form, 0.0, 0.0};
}

//---------------------------------------------------------------------------//
// 1-d explicit finite differences
//---------------------------------------------------------------------------//
/// d = 1 problem data for the FD oracle. BM: dX = dW. GBM: dX = a X dt + b X dW,
/// solved in y = log x.
struct FdProblem {
    FieldKind field = FieldKind::bm;
    double alpha = 0.0;
    double beta = 1.0;
    double T = 1.0;
    double xi = 0.0;
    Nonlinearity f = zero_f();
    TerminalCondition g = squared_norm_g();
};

struct FdGrid {
    std::size_t nodes = 200;  //!< J, number of space intervals
    std::size_t steps = 0;    //!< S, 0 selects the smallest stable count
    double half_width = 0.0;  //!< 0 selects 6 sigma sqrt(T) + |drift| T
};

namespace detail {

struct FdCoefficients {
    double centre, half_width, drift, vol;
};

inline FdCoefficients fd_coefficients(const FdProblem& pb, double half_width) {
    FdCoefficients c{};
    if (pb.field == FieldKind::bm) {
        c.centre = pb.xi;
        c.drift = 0.0;
        c.vol = 1.0;
    } else {
        require(pb.xi > 0.0, "fd_solve_1d: GBM needs xi > 0");
        c.centre = std::log(pb.xi);
        c.drift = pb.alpha - 0.5 * pb.beta * pb.beta;
        c.vol = std::abs(pb.beta);
    }
    require(c.vol > 0.0, "fd_solve_1d: diffusion coefficient must be nonzero");
    c.half_width = half_width > 0.0
                       ? half_width
                       : 6.0 * c.vol * std::sqrt(pb.T) + std::abs(c.drift) * pb.T;
    return c;
}

inline std::size_t fd_min_steps(const FdProblem& pb, double h, double vol) {
    double const rate = vol * vol / (h * h) + pb.f.lipschitz();
    return std::size_t(std::ceil(pb.T * rate));
}

// One backward solve; returns u(0, xi) by linear interpolation.
inline double fd_march(const FdProblem& pb, const FdCoefficients& c, std::size_t J,
                       std::size_t S) {
    double const lo = c.centre - c.half_width;
    double const h = 2.0 * c.half_width / double(J);
    double const dt = pb.T / double(S);
    bool const log_coords = pb.field == FieldKind::gbm;

    std::vector<double> xs(J + 1), u(J + 1), next(J + 1);
    for (std::size_t j = 0; j <= J; ++j) {
        double const y = lo + double(j) * h;
        xs[j] = log_coords ? std::exp(y) : y;
        double const gx = pb.g(std::span<const double>(&xs[j], 1));
        u[j] = gx;
    }
    double const u_lo = u[0], u_hi = u[J];
    double const diff = 0.5 * c.vol * c.vol / (h * h);
    double const adv = c.drift / (2.0 * h);
    for (std::size_t n = S; n-- > 0;) {
        double const t_old = double(n + 1) * dt;
        next[0] = u_lo;
        next[J] = u_hi;
        for (std::size_t j = 1; j < J; ++j) {
            double const lap = u[j + 1] - 2.0 * u[j] + u[j - 1];
            double const grad = u[j + 1] - u[j - 1];
            double const fx = pb.f(t_old, std::span<const double>(&xs[j], 1), u[j]);
            next[j] = u[j] + dt * (diff * lap + adv * grad + fx);
        }
        std::swap(u, next);
        for (double v : u)
            if (!std::isfinite(v)) throw NumericalError("fd_solve_1d: non-finite value");
    }
    double const pos = (c.centre - lo) / h;
    std::size_t const j0 = std::min(J - 1, std::size_t(std::floor(pos)));
    double const w = pos - double(j0);
    return (1.0 - w) * u[j0] + w * u[j0 + 1];
}

} // namespace detail

/*!
 * Explicit backward Euler-in-time, central-in-space solve of
 *
 *   u_t + (1/2) s^2 u_yy + m u_y + f(t, x, u) = 0,  u(T) = g,
 *
 * on [c - w, c + w] with Dirichlet values g at the frozen boundary. The
 * reported value comes from the (2J, 4S) grid; error_estimate is the
 * difference to the (J, S) grid.
 */
inline ReferenceValue fd_solve_1d(const FdProblem& pb, FdGrid grid = {}) {
    detail::require(grid.nodes >= 50, "fd_solve_1d: need J >= 50 space intervals");
    detail::require(pb.T > 0.0, "fd_solve_1d: T must be positive");
    auto const c = detail::fd_coefficients(pb, grid.half_width);
    double const h = 2.0 * c.half_width / double(grid.nodes);
    std::size_t const s_min = std::max<std::size_t>(1, detail::fd_min_steps(pb, h, c.vol));
    std::size_t const S = grid.steps == 0 ? s_min : grid.steps;
    if (S < s_min) {
        throw UsageError("fd_solve_1d: explicit scheme unstable; need at least S = " +
                         std::to_string(s_min) + " time steps for J = " +
                         std::to_string(grid.nodes));
    }
    double const coarse = detail::fd_march(pb, c, grid.nodes, S);
    double const fine = detail::fd_march(pb, c, 2 * grid.nodes, 4 * S);
    return {fine, OracleMethod::finite_difference, std::abs(fine - coarse), 0.0};
}

//---------------------------------------------------------------------------//
// Nested Monte Carlo Picard iterates
//---------------------------------------------------------------------------//
struct NestedPicardLimits {
    int max_depth = 3;
    std::size_t max_samples = 1000;
    double max_work = 1e8; //!< guard on S^k
};

namespace detail {

template <FlowField F>
class NestedPicard {
  public:
    NestedPicard(const Problem<F>& pb, std::size_t S, std::uint64_t seed)
        : pb_(pb), S_(S), seed_(seed) {}

    // Sample i of U_k(t, x): g(X_{t,T}(x)) + (T - t) f(R, Y, U_{k-1}(R, Y)),
    // drawn from indices (path, i, 1) and (path, i, 2).
    double sample(int k, double t, std::span<const double> x, std::vector<std::int64_t>& path,
                  std::size_t i) {
        path.push_back(std::int64_t(i));
        path.push_back(1);
        auto const X = pb_.field.evaluate(t, pb_.T, x, make_key(seed_, path, StreamTag::field_increment));
        double z = pb_.g(X.point);
        path.back() = 2;
        double const r = t + (pb_.T - t) * uniform01(make_key(seed_, path, StreamTag::time_uniform), 0);
        auto const Y = pb_.field.evaluate(t, r, x, make_key(seed_, path, StreamTag::field_increment));
        double const inner = value(k - 1, r, Y.point, path);
        z += (pb_.T - t) * pb_.f(r, Y.point, inner);
        path.resize(path.size() - 2);
        if (!std::isfinite(z)) throw NumericalError("nested_picard: non-finite sample");
        return z;
    }

    double value(int k, double t, std::span<const double> x, std::vector<std::int64_t>& path) {
        if (k <= 0) return 0.0;
        double acc = 0.0;
        for (std::size_t i = 0; i < S_; ++i) acc += sample(k, t, x, path, i);
        return acc / double(S_);
    }

  private:
    const Problem<F>& pb_;
    std::size_t S_;
    std::uint64_t seed_;
};

} // namespace detail

/// Nested Monte Carlo estimate of the k-th Picard iterate U_k(0, xi), rooted
/// at index (root). error_estimate is the outer-level standard error.
template <FlowField F>
ReferenceValue nested_picard(const Problem<F>& pb, int k, std::size_t S, std::uint64_t seed,
                             unsigned workers = 1, std::int64_t root = -5,
                             NestedPicardLimits limits = {}) {
    detail::require(k >= 0, "nested_picard: depth must be >= 0");
    detail::require(S >= 2, "nested_picard: need S >= 2");
    if (k > limits.max_depth || S > limits.max_samples ||
        std::pow(double(S), k) > limits.max_work) {
        throw UsageError("nested_picard: budget guard exceeded (k <= " +
                         std::to_string(limits.max_depth) + ", S <= " +
                         std::to_string(limits.max_samples) + ", S^k <= " +
                         std::to_string(limits.max_work) + ")");
    }
    ReferenceValue out{0.0, OracleMethod::nested_picard, 0.0, 0.0};
    double lt = pb.f.lipschitz() * pb.T, fact = 1.0;
    for (int j = 1; j <= k; ++j) fact *= lt / double(j);
    out.truncation_factor = fact;
    if (k == 0) return out;

    std::vector<double> z(S);
    parallel_for(S, workers, [&](std::size_t i) {
        detail::NestedPicard<F> np(pb, S, seed);
        std::vector<std::int64_t> path{root};
        z[i] = np.sample(k, 0.0, pb.xi, path, i);
    });
    auto const ms = detail::mean_and_se(z);
    out.value = ms.mean;
    out.error_estimate = ms.se;
    return out;
}

} // namespace mlp

// SPDX-License-Identifier: Apache-2.0
#pragma once

/*!
 * \file mlp.hpp
 * \brief Full-history recursive multilevel Picard estimator V_{M,n}(t, x).
 *
 * V_{M,n}(t,x) averages M^n terminal samples g(X_{t,T}(x)) and, for every
 * level k < n, M^{n-k} samples of the telescoped correction
 *
 *     (T - t) [ f(R, X, V_{M,k}(R, X)) - f(R, X, V_{M,k-1}(R, X)) ]
 *
 * where R is uniform on [t, T] and X = X_{t,R}(x). Both f-evaluations at one
 * node share (R, X); the two sub-estimators are independent.
 *
 * Randomness addressing under the node index theta:
 *  - terminal sample m:       (theta, n, -m), field_increment tag
 *  - correction node (k, m):  (theta, k, m),  time_uniform and field_increment
 *  - level-k sub-estimator:   rooted at (theta, k, m)
 *  - level-(k-1) sub-estimator: rooted at (theta, k, -m)
 */

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <limits>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mlp/errors.hpp"
#include "mlp/fields.hpp"
#include "mlp/parallel.hpp"
#include "mlp/problem.hpp"
#include "mlp/rng_streams.hpp"

namespace mlp {

struct MlpParams {
    std::uint64_t M = 1;
    int n = 0;

    void validate() const {
        detail::require(M >= 1, "MlpParams: M must be >= 1");
        detail::require(n >= -1, "MlpParams: n must be >= -1");
    }
};

/// Standard-normal consumption of one estimator call.
struct CostLedger {
    std::uint64_t normal_draws = 0; //!< every standard normal consumed
    std::uint64_t time_draws = 0;   //!< the share behind the random times R
    std::uint64_t field_evaluations = 0;

    //! Normals consumed by field evaluations.
    std::uint64_t field_draws() const { return normal_draws - time_draws; }
};

/// Maps a uniform u in [0,1] to t + (T - t) u.
inline double time_from_uniform(double t, double T, double u) {
    detail::require(t <= T, "uniform_time: need t <= T");
    return t + (T - t) * u;
}

/// R = t + (T - t) U with U = Phi(Z) for one standard normal Z drawn from
/// \p key, so each random time costs exactly one normal.
inline double uniform_time(double t, double T, const StreamKey& key) {
    double z = 0.0;
    std_normals(key, 0, std::span<double>(&z, 1));
    return time_from_uniform(t, T, 0.5 * std::erfc(-z / std::numbers::sqrt2));
}

/// Receives every StreamKey the estimator derives (instrumentation only).
using KeySink = std::function<void(const StreamKey&)>;

/// Destination for library warnings; defaults to std::clog.
inline std::function<void(const std::string&)>& warning_handler() {
    static std::function<void(const std::string&)> handler = [](const std::string& msg) {
        std::clog << "warning: " << msg << '\n';
    };
    return handler;
}

namespace detail {

inline std::atomic<bool>& inexact_field_warned() {
    static std::atomic<bool> flag{false};
    return flag;
}

inline void warn_inexact_field() {
    if (!inexact_field_warned().exchange(true)) {
        warning_handler()(
            "MLP error bounds assume exact solution fields; the Euler-Maruyama "
            "field adds an unanalysed discretisation bias");
    }
}

inline std::uint64_t checked_pow(std::uint64_t base, int e) {
    std::uint64_t r = 1;
    for (int i = 0; i < e; ++i) {
        if (base != 0 && r > std::numeric_limits<std::uint64_t>::max() / base)
            throw BudgetExceeded("sample count M^n overflows 64 bits");
        r *= base;
    }
    return r;
}

template <FlowField F>
class PicardWalker {
  public:
    PicardWalker(const Problem<F>& pb, std::uint64_t M, std::uint64_t seed,
                 CostLedger& ledger, const KeySink* sink)
        : pb_(pb), M_(M), seed_(seed), ledger_(ledger), sink_(sink) {}

    // path_ holds theta on entry and on exit.
    double value(int n, double t, std::span<const double> x) {
        if (n <= 0) return 0.0;
        check_time(t);
        double const T = pb_.T;

        std::uint64_t const terminal_count = checked_pow(M_, n);
        // Running mean: M^n equal samples average to that sample exactly.
        double g_mean = 0.0;
        for (std::uint64_t m = 1; m <= terminal_count; ++m) {
            push(n, -std::int64_t(m));
            FieldSample const X = evaluate(t, T, x);
            double const gv = pb_.g(X.point);
            check_finite(gv, "terminal condition");
            g_mean += (gv - g_mean) / double(m);
            pop();
        }
        double result = g_mean;

        for (int k = 0; k < n; ++k) {
            std::uint64_t const count = checked_pow(M_, n - k);
            double acc = 0.0;
            for (std::uint64_t m = 1; m <= count; ++m) {
                push(k, std::int64_t(m));
                double const r = uniform_time(t, T, key(StreamTag::time_uniform));
                ++ledger_.normal_draws;
                ++ledger_.time_draws;
                FieldSample const X = evaluate(t, r, x);

                double const v_hi = value(k, r, X.point);
                double diff = pb_.f(r, X.point, v_hi);
                if (k >= 1) {
                    path_.back() = -std::int64_t(m);
                    double const v_lo = value(k - 1, r, X.point);
                    path_.back() = std::int64_t(m);
                    diff -= pb_.f(r, X.point, v_lo);
                }
                check_finite(diff, "nonlinearity");
                acc += diff;
                pop();
            }
            result += (T - t) * acc / double(count);
        }
        check_finite(result, "estimator value");
        return result;
    }

    std::vector<std::int64_t>& path() { return path_; }

  private:
    void push(std::int64_t a, std::int64_t b) {
        path_.push_back(a);
        path_.push_back(b);
    }
    void pop() { path_.resize(path_.size() - 2); }

    StreamKey key(StreamTag tag) {
        StreamKey k = make_key(seed_, path_, tag);
        if (sink_ && *sink_) (*sink_)(k);
        return k;
    }

    FieldSample evaluate(double t, double s, std::span<const double> x) {
        FieldSample X = pb_.field.evaluate(t, s, x, key(StreamTag::field_increment));
        ledger_.normal_draws += X.draws;
        ++ledger_.field_evaluations;
        for (double v : X.point) check_finite(v, "field value");
        return X;
    }

    void check_time(double t) const {
        if (!(t >= 0.0 && t <= pb_.T)) {
            std::ostringstream os;
            os << "MLP evaluation time " << t << " outside [0, " << pb_.T << "]";
            throw NumericalError(os.str());
        }
    }

    static void check_finite(double v, const char* what) {
        if (!std::isfinite(v))
            throw NumericalError(std::string("non-finite ") + what + " in MLP recursion");
    }

    const Problem<F>& pb_;
    std::uint64_t M_;
    std::uint64_t seed_;
    CostLedger& ledger_;
    const KeySink* sink_;
    std::vector<std::int64_t> path_;
};

} // namespace detail

/// One realisation of V^theta_{M,n}(t, x). Every standard normal consumed,
/// by field evaluations or random times, is charged to \p ledger.
template <FlowField F>
double mlp_value(const Problem<F>& problem, const MlpParams& params, double t,
                 std::span<const double> x, const MultiIndex& theta, std::uint64_t seed,
                 CostLedger& ledger, const KeySink* sink = nullptr) {
    params.validate();
    detail::require(x.size() == problem.d, "mlp_value: x has wrong dimension");
    if (!(t >= 0.0 && t <= problem.T)) {
        std::ostringstream os;
        os << "mlp_value: t = " << t << " outside [0, " << problem.T << "]";
        throw NumericalError(os.str());
    }
    if (params.n <= 0) return 0.0;
    if (!problem.field.exact()) detail::warn_inexact_field();

    detail::PicardWalker<F> walker(problem, params.M, seed, ledger, sink);
    walker.path().assign(theta.path().begin(), theta.path().end());
    walker.path().reserve(theta.size() + 2 * std::size_t(params.n + 1));
    return walker.value(params.n, t, x);
}

/// K independent realisations with root indices (1), ..., (K), in index order.
template <FlowField F>
std::vector<double> mlp_replicates(const Problem<F>& problem, const MlpParams& params,
                                   double t, std::span<const double> x, std::size_t K,
                                   std::uint64_t seed, unsigned workers = 1,
                                   std::vector<CostLedger>* ledgers = nullptr) {
    detail::require(K >= 1, "mlp_replicates: K must be >= 1");
    std::vector<double> out(K);
    std::vector<CostLedger> local(K);
    parallel_for(K, workers, [&](std::size_t j) {
        out[j] = mlp_value(problem, params, t, x, MultiIndex{std::int64_t(j + 1)}, seed, local[j]);
    });
    if (ledgers) *ledgers = std::move(local);
    return out;
}

} // namespace mlp

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mlp/errors.hpp"
#include "mlp/fields.hpp"
#include "mlp/nonlinearity.hpp"

namespace mlp {

/// Terminal condition g with declared growth data.
class TerminalCondition {
  public:
    using Fn = std::function<double(std::span<const double>)>;

    TerminalCondition(std::string name, Fn fn, Growth growth)
        : name_(std::move(name)), fn_(std::move(fn)), growth_(growth) {}

    double operator()(std::span<const double> x) const { return fn_(x); }
    const std::string& name() const { return name_; }
    const Growth& growth() const { return growth_; }

  private:
    std::string name_;
    Fn fn_;
    Growth growth_;
};

inline TerminalCondition squared_norm_g() {
    return {"squared_norm",
            [](std::span<const double> x) {
                return std::inner_product(x.begin(), x.end(), x.begin(), 0.0);
            },
            Growth{1.0, 2.0, 0.0}};
}

inline TerminalCondition sum_of_coordinates_g() {
    // |sum x_i| <= sqrt(d) |x|
    return {"sum_of_coordinates",
            [](std::span<const double> x) { return std::accumulate(x.begin(), x.end(), 0.0); },
            Growth{1.0, 1.0, 0.5}};
}

inline TerminalCondition constant_g(double c) {
    return {"constant", [c](std::span<const double>) { return c; },
            Growth{std::abs(c), 0.0, 0.0}};
}

/// g(x) = min{x_1, ..., x_d, cap}
inline TerminalCondition capped_min_g(double cap) {
    return {"capped_min",
            [cap](std::span<const double> x) {
                return std::min(cap, *std::min_element(x.begin(), x.end()));
            },
            Growth{std::max(std::abs(cap), 1.0), 1.0, 0.0}};
}

/// One semilinear PDE instance: field X, nonlinearity f, terminal g, horizon
/// T and evaluation point xi.
template <FlowField F>
struct Problem {
    std::size_t d;
    double T;
    std::vector<double> xi;
    F field;
    Nonlinearity f;
    TerminalCondition g;

    Problem(std::size_t dim, double horizon, std::vector<double> point, F fld,
            Nonlinearity nl, TerminalCondition term)
        : d(dim), T(horizon), xi(std::move(point)), field(std::move(fld)),
          f(std::move(nl)), g(std::move(term)) {
        detail::require(d >= 1, "Problem: dimension must be >= 1");
        detail::require(T > 0.0 && std::isfinite(T), "Problem: T must be positive");
        detail::require(xi.size() == d, "Problem: xi has wrong dimension");
        detail::require(field.dimension() == d, "Problem: field dimension != d");
    }
};

/// |g(x)| <= K d^P (1 + |x|^p) on \p count Gaussian points of scale \p spread.
inline SampledCheck check_terminal_growth(const TerminalCondition& g, std::size_t d,
                                          double spread, std::size_t count,
                                          std::uint64_t seed) {
    SampledCheck out;
    std::vector<double> x(d);
    for (std::size_t i = 0; i < count; ++i) {
        auto const key = make_key(seed, MultiIndex{-1, 3, std::int64_t(i)}, StreamTag::auxiliary);
        std_normals(key, 0, x);
        for (auto& v : x) v *= spread;
        double const nx = std::sqrt(std::inner_product(x.begin(), x.end(), x.begin(), 0.0));
        double const lhs = std::abs(g(x));
        double const rhs = g.growth().bound(d, nx);
        ++out.samples;
        if (rhs > 0.0) out.worst_ratio = std::max(out.worst_ratio, lhs / rhs);
        if (lhs > rhs) ++out.violations;
    }
    return out;
}

} // namespace mlp

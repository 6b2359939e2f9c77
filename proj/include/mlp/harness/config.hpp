// SPDX-License-Identifier: Apache-2.0
#pragma once

/*!
 * \file config.hpp
 * \brief Experiment configuration: an INI document with sections
 *        [problem], [mlp], [oracle] and [output]. Grammar in docs/config.md.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <sodium.h>

#include "mlp/errors.hpp"
#include "mlp/fields.hpp"
#include "mlp/nonlinearity.hpp"
#include "mlp/oracles.hpp"
#include "mlp/problem.hpp"

namespace mlp::harness {

struct ProblemSpec {
    std::string field = "bm"; //!< bm | gbm | em
    std::size_t d = 1;
    double T = 1.0;
    std::vector<double> xi{0.0};
    std::vector<double> alphas{0.0};
    std::vector<double> betas{0.0};
    double sigma_offdiag = 0.0;
    std::optional<double> kappa;
    std::size_t em_steps = 16;

    std::string nonlinearity = "zero"; //!< zero | linear | default_risk
    double c = 0.0;
    DefaultRiskParams default_risk;

    std::string g = "squared_norm"; //!< squared_norm | sum_of_coordinates | constant | capped_min
    double g_constant = 1.0;
    double g_cap = 100.0;
};

struct GridPoint {
    std::uint64_t M;
    int n;
    friend bool operator==(const GridPoint&, const GridPoint&) = default;
};

struct MlpSpec {
    std::vector<GridPoint> grid;
    std::size_t replicates = 100;
};

struct OracleSpec {
    std::string method = "closed_form"; //!< closed_form | finite_difference | nested_picard | fixed
    double value = 0.0;                 //!< method = fixed
    std::size_t fd_nodes = 200;
    std::size_t fd_steps = 0;
    double fd_half_width = 0.0;
    int picard_depth = 3;
    std::size_t picard_samples = 100;
    std::size_t constant_samples = 10000;
    std::size_t constant_nodes = 16;
};

struct ExperimentConfig {
    ProblemSpec problem;
    MlpSpec mlp;
    OracleSpec oracle;
    std::uint64_t seed = 1;
    double budget = 1e9;  //!< cap on predicted one-dimensional draws per replicate
    bool override_budget = false;
    std::string output = "results.csv";
    unsigned workers = 1;
    std::string source_text; //!< raw document, hashed into the CSV header
};

inline constexpr int max_level_without_override = 10;

namespace detail {

inline std::vector<double> parse_list(const std::string& s) {
    std::vector<std::string> parts;
    boost::split(parts, s, boost::is_any_of(","));
    std::vector<double> out;
    for (auto& p : parts) {
        boost::trim(p);
        if (p.empty()) continue;
        try {
            std::size_t pos = 0;
            out.push_back(std::stod(p, &pos));
            if (pos != p.size()) throw std::invalid_argument(p);
        } catch (const std::exception&) {
            throw UsageError("config: cannot parse number '" + p + "'");
        }
    }
    return out;
}

// Scalar broadcasts to length d; a list must have length d.
inline std::vector<double> broadcast(const std::vector<double>& v, std::size_t d,
                                     const std::string& key) {
    if (v.size() == 1) return std::vector<double>(d, v[0]);
    mlp::detail::require(v.size() == d, "config: '" + key + "' needs 1 or d entries");
    return v;
}

inline std::vector<int> parse_int_list(const std::string& s, const std::string& key) {
    std::vector<int> out;
    for (double v : parse_list(s)) {
        mlp::detail::require(v == std::floor(v), "config: '" + key + "' must hold integers");
        out.push_back(int(v));
    }
    return out;
}

inline std::string hex(const unsigned char* p, std::size_t n) {
    static const char* digits = "0123456789abcdef";
    std::string s;
    for (std::size_t i = 0; i < n; ++i) {
        s += digits[p[i] >> 4];
        s += digits[p[i] & 15];
    }
    return s;
}

} // namespace detail

/// BLAKE2b-128 of the configuration text, hex-encoded.
inline std::string config_hash(const std::string& text) {
    mlp::detail::ensure_sodium();
    unsigned char h[16];
    crypto_generichash(h, sizeof h, reinterpret_cast<const unsigned char*>(text.data()),
                       text.size(), nullptr, 0);
    return detail::hex(h, sizeof h);
}

inline ExperimentConfig parse_config(const std::string& text) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream is(text);
    try {
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw UsageError(std::string("config: ") + e.what());
    }
    static const std::map<std::string, std::set<std::string>> known{
        {"problem",
         {"field", "d", "T", "xi", "alpha", "beta", "sigma_offdiag", "kappa", "em_steps",
          "nonlinearity", "c", "dr_R", "dr_epsilon", "dr_gamma_l", "dr_gamma_h", "dr_v_l",
          "dr_v_h", "g", "g_constant", "g_cap"}},
        {"mlp", {"diagonal", "M", "n", "replicates"}},
        {"oracle",
         {"method", "value", "fd_nodes", "fd_steps", "fd_half_width", "picard_depth",
          "picard_samples", "constant_samples", "constant_nodes"}},
        {"output", {"seed", "budget", "override_budget", "path", "workers"}},
    };
    for (auto const& [name, sub] : tree) {
        auto const it = known.find(name);
        if (it == known.end()) throw UsageError("config: unknown section [" + name + "]");
        for (auto const& [key, value] : sub)
            if (!it->second.count(key))
                throw UsageError("config: unknown key '" + key + "' in [" + name + "]");
    }

    ExperimentConfig cfg;
    cfg.source_text = text;
    auto get = [&](const std::string& path) -> std::optional<std::string> {
        auto v = tree.get_optional<std::string>(path);
        if (v) {
            std::string s = *v;
            auto const hash = s.find('#');
            if (hash != std::string::npos) s.erase(hash);
            boost::trim(s);
            return s;
        }
        return std::nullopt;
    };
    auto num = [&](const std::string& path, double def) {
        auto v = get(path);
        if (!v) return def;
        auto l = detail::parse_list(*v);
        mlp::detail::require(l.size() == 1, "config: '" + path + "' must be a single number");
        return l[0];
    };
    auto count = [&](const std::string& path, std::size_t def) {
        double const v = num(path, double(def));
        mlp::detail::require(v >= 0 && v == std::floor(v), "config: '" + path + "' must be a nonnegative integer");
        return std::size_t(v);
    };

    // [problem]
    auto& p = cfg.problem;
    p.field = get("problem.field").value_or("bm");
    p.d = count("problem.d", 1);
    mlp::detail::require(p.d >= 1, "config: problem.d must be >= 1");
    p.T = num("problem.T", 1.0);
    p.xi = detail::broadcast(detail::parse_list(get("problem.xi").value_or("0")), p.d, "problem.xi");
    p.alphas = detail::broadcast(detail::parse_list(get("problem.alpha").value_or("0")), p.d, "problem.alpha");
    p.betas = detail::broadcast(detail::parse_list(get("problem.beta").value_or("0")), p.d, "problem.beta");
    p.sigma_offdiag = num("problem.sigma_offdiag", 0.0);
    if (auto k = get("problem.kappa")) p.kappa = num("problem.kappa", 0.0);
    p.em_steps = count("problem.em_steps", 16);
    p.nonlinearity = get("problem.nonlinearity").value_or("zero");
    p.c = num("problem.c", 0.0);
    auto& dr = p.default_risk;
    dr.R = num("problem.dr_R", dr.R);
    dr.epsilon = num("problem.dr_epsilon", dr.epsilon);
    dr.gamma_l = num("problem.dr_gamma_l", dr.gamma_l);
    dr.gamma_h = num("problem.dr_gamma_h", dr.gamma_h);
    dr.v_l = num("problem.dr_v_l", dr.v_l);
    dr.v_h = num("problem.dr_v_h", dr.v_h);
    p.g = get("problem.g").value_or("squared_norm");
    p.g_constant = num("problem.g_constant", 1.0);
    p.g_cap = num("problem.g_cap", 100.0);

    auto one_of = [](const std::string& v, std::initializer_list<const char*> allowed,
                     const std::string& key) {
        for (auto a : allowed)
            if (v == a) return;
        throw UsageError("config: unknown " + key + " '" + v + "'");
    };
    one_of(p.field, {"bm", "gbm", "em"}, "problem.field");
    one_of(p.nonlinearity, {"zero", "linear", "default_risk"}, "problem.nonlinearity");
    one_of(p.g, {"squared_norm", "sum_of_coordinates", "constant", "capped_min"}, "problem.g");

    // [mlp]
    auto& m = cfg.mlp;
    m.replicates = count("mlp.replicates", 100);
    mlp::detail::require(m.replicates >= 1, "config: mlp.replicates must be >= 1");
    if (auto diag = get("mlp.diagonal")) {
        for (int N : detail::parse_int_list(*diag, "mlp.diagonal")) {
            mlp::detail::require(N >= 1, "config: diagonal levels must be >= 1");
            m.grid.push_back({std::uint64_t(N), N});
        }
    }
    if (auto Ms = get("mlp.M")) {
        auto ns = get("mlp.n");
        mlp::detail::require(ns.has_value(), "config: mlp.M given without mlp.n");
        for (int M : detail::parse_int_list(*Ms, "mlp.M")) {
            mlp::detail::require(M >= 1, "config: M must be >= 1");
            for (int n : detail::parse_int_list(*ns, "mlp.n")) {
                mlp::detail::require(n >= 0, "config: n must be >= 0");
                m.grid.push_back({std::uint64_t(M), n});
            }
        }
    }
    mlp::detail::require(!m.grid.empty(), "config: [mlp] needs 'diagonal' or 'M' and 'n'");

    // [oracle]
    auto& o = cfg.oracle;
    o.method = get("oracle.method").value_or("closed_form");
    one_of(o.method, {"closed_form", "finite_difference", "nested_picard", "fixed"}, "oracle.method");
    o.value = num("oracle.value", 0.0);
    o.fd_nodes = count("oracle.fd_nodes", o.fd_nodes);
    o.fd_steps = count("oracle.fd_steps", o.fd_steps);
    o.fd_half_width = num("oracle.fd_half_width", 0.0);
    o.picard_depth = int(count("oracle.picard_depth", 3));
    o.picard_samples = count("oracle.picard_samples", o.picard_samples);
    o.constant_samples = count("oracle.constant_samples", o.constant_samples);
    o.constant_nodes = count("oracle.constant_nodes", o.constant_nodes);

    // [output]
    if (auto seed = get("output.seed")) {
        std::size_t pos = 0;
        try {
            cfg.seed = std::stoull(*seed, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        mlp::detail::require(pos > 0 && pos == seed->size() && seed->front() != '-',
                             "config: output.seed must be a nonnegative integer");
    } else {
        cfg.seed = 1;
    }
    if (auto ob = get("output.override_budget")) {
        mlp::detail::require(*ob == "true" || *ob == "false",
                             "config: output.override_budget must be true or false");
        cfg.override_budget = *ob == "true";
    }
    cfg.budget = num("output.budget", cfg.budget);
    cfg.output = get("output.path").value_or("results.csv");
    cfg.workers = unsigned(count("output.workers", 1));
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("config: cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

//---------------------------------------------------------------------------//
// Problem construction
//---------------------------------------------------------------------------//
inline GbmParams make_gbm_params(const ProblemSpec& p) {
    std::vector<std::vector<double>> cols;
    if (p.sigma_offdiag != 0.0) {
        cols.assign(p.d, std::vector<double>(p.d, p.sigma_offdiag));
        for (std::size_t i = 0; i < p.d; ++i) cols[i][i] = 1.0;
        cols = normalize_columns(std::move(cols));
    }
    double kappa = 0.0;
    for (std::size_t i = 0; i < p.d; ++i)
        kappa = std::max({kappa, std::abs(p.alphas[i]), p.betas[i] * p.betas[i]});
    return GbmParams(p.alphas, p.betas, std::move(cols), p.kappa.value_or(kappa));
}

inline AnyField make_field(const ProblemSpec& p) {
    if (p.field == "bm") return BrownianField(p.d);
    if (p.field == "gbm") return GbmField(make_gbm_params(p));
    return EulerMaruyamaField(gbm_coefficients(make_gbm_params(p)), p.em_steps);
}

inline Nonlinearity make_nonlinearity(const ProblemSpec& p) {
    if (p.nonlinearity == "zero") return zero_f();
    if (p.nonlinearity == "linear") return linear_f(p.c);
    return default_risk_nonlinearity(p.default_risk);
}

inline TerminalCondition make_terminal(const ProblemSpec& p) {
    if (p.g == "squared_norm") return squared_norm_g();
    if (p.g == "sum_of_coordinates") return sum_of_coordinates_g();
    if (p.g == "constant") return constant_g(p.g_constant);
    return capped_min_g(p.g_cap);
}

inline Problem<AnyField> make_problem(const ProblemSpec& p) {
    return Problem<AnyField>(p.d, p.T, p.xi, make_field(p), make_nonlinearity(p), make_terminal(p));
}

/// Draws charged per field evaluation (alpha in the cost model).
inline std::uint64_t draws_per_dimension(const ProblemSpec& p) {
    return p.field == "em" ? p.em_steps : 1;
}

} // namespace mlp::harness

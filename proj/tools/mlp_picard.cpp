// SPDX-License-Identifier: Apache-2.0
// Command-line driver: run, verify, fit, cost, select-level.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mlp/bounds.hpp"
#include "mlp/errors.hpp"
#include "mlp/harness/config.hpp"
#include "mlp/harness/experiment.hpp"
#include "mlp/harness/verify.hpp"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_failure = 1;
constexpr int exit_usage = 2;

struct GlobalFlags {
    std::optional<std::uint64_t> seed;
    unsigned workers = 1;
    std::optional<double> budget;
    bool override_budget = false;
    std::string out;
};

// Writes to --out when given, stdout otherwise.
template <class Fn>
void emit(const std::string& out, Fn&& fn) {
    if (out.empty() || out == "-") {
        fn(std::cout);
        return;
    }
    std::ofstream os(out);
    if (!os) throw mlp::UsageError("cannot open output file '" + out + "'");
    fn(os);
}

int cmd_run(const std::string& path, const GlobalFlags& g, bool out_given) {
    auto cfg = mlp::harness::load_config(path);
    if (g.seed) cfg.seed = *g.seed;
    if (g.budget) cfg.budget = *g.budget;
    cfg.override_budget = cfg.override_budget || g.override_budget;
    cfg.workers = g.workers;
    if (out_given) cfg.output = g.out;

    auto const res = mlp::harness::run_experiment(cfg);
    emit(cfg.output, [&](std::ostream& os) { mlp::harness::write_csv(os, res.records, res.meta); });
    std::size_t skipped = 0;
    for (auto const& r : res.records)
        if (r.status != "ok") {
            ++skipped;
            std::cerr << "row M=" << r.M << " n=" << r.n << ": " << r.status << '\n';
        }
    if (skipped) std::cerr << skipped << " row(s) not run; see status column\n";
    return exit_ok;
}

int cmd_verify(const std::string& selector, const GlobalFlags& g, double z) {
    mlp::harness::VerifyOptions o;
    if (g.seed) o.seed = *g.seed;
    o.workers = g.workers;
    o.z = z;
    auto const rows = mlp::harness::verify(selector, o);
    emit(g.out, [&](std::ostream& os) { mlp::harness::write_report(os, rows); });
    std::size_t bad = 0;
    for (auto const& r : rows)
        if (!r.ok()) {
            ++bad;
            std::cerr << "FAIL " << r.suite << '/' << r.verdict.name << '\n';
        }
    std::cerr << rows.size() - bad << '/' << rows.size() << " checks ok\n";
    return bad ? exit_failure : exit_ok;
}

int cmd_fit(const std::string& path, const GlobalFlags& g) {
    auto const records = mlp::harness::parse_run_records(mlp::harness::read_csv(path));
    auto const fit = mlp::harness::convergence_fit(records);
    emit(g.out, [&](std::ostream& os) {
        using mlp::harness::fmt_double;
        os << "# convergence fit of " << path << '\n';
        os << "# decay_slope: " << fmt_double(fit.decay_slope) << '\n';
        os << "# monotone: " << (fit.monotone ? 1 : 0) << '\n';
        os << "# below_bound: " << (fit.below_bound ? 1 : 0) << '\n';
        os << "N,rmse,rmse_stderr,log_rmse,bound,below_bound\n";
        for (auto const& l : fit.levels)
            os << l.N << ',' << fmt_double(l.rmse) << ',' << fmt_double(l.rmse_stderr) << ','
               << fmt_double(l.log_rmse) << ',' << fmt_double(l.bound) << ','
               << (l.below_bound ? 1 : 0) << '\n';
    });
    return fit.monotone && fit.below_bound ? exit_ok : exit_failure;
}

int cmd_cost(std::uint64_t d, std::uint64_t M, int n, std::uint64_t alpha, const GlobalFlags& g) {
    mlp::detail::require(d >= 1 && M >= 1 && n >= 0 && alpha >= 1,
                         "cost: need d >= 1, M >= 1, n >= 0, alpha >= 1");
    auto const c = mlp::cost_formula(d, M, n, alpha);
    emit(g.out, [&](std::ostream& os) {
        os << "d,M,n,alpha,cost,saturated,bound\n";
        os << d << ',' << M << ',' << n << ',' << alpha << ',' << c.value << ','
           << (c.saturated ? 1 : 0) << ','
           << mlp::harness::fmt_double(mlp::cost_bound(d, M, n, double(alpha))) << '\n';
    });
    if (c.saturated) std::cerr << "cost saturated: budget exceeded\n";
    return exit_ok;
}

int cmd_select(std::vector<double> constants, double L, double T, double eps, int cap,
               const GlobalFlags& g) {
    using mlp::harness::fmt_double;
    std::ostringstream body;
    body << "C,L,T,epsilon,N,bound\n";
    int rc = exit_ok;
    for (double C : constants) {
        try {
            int const N = mlp::select_level(C, L, T, eps, cap);
            body << fmt_double(C) << ',' << fmt_double(L) << ',' << fmt_double(T) << ','
                 << fmt_double(eps) << ',' << N << ','
                 << fmt_double(mlp::diagonal_error(C, L, T, N)) << '\n';
        } catch (const mlp::LevelCapReached& e) {
            std::cerr << e.what() << '\n';
            rc = exit_failure;
        }
    }
    emit(g.out, [&](std::ostream& os) { os << body.str(); });
    return rc;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multilevel Picard approximation toolkit"};
    app.require_subcommand(1);
    GlobalFlags g;
    app.add_option("--seed", g.seed, "Root seed (overrides the config)");
    app.add_option("--workers", g.workers, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--budget", g.budget, "Cap on predicted draws per replicate");
    app.add_flag("--override-budget", g.override_budget, "Run rows above the budget or level cap");
    auto* out_opt = app.add_option("--out", g.out, "Output path (default: stdout or config)");

    std::string config, selector, csv;
    double z = mlp::default_z_threshold;
    std::uint64_t d = 1, M = 1, alpha = 1;
    int n = 0, cap = mlp::default_level_cap;
    double C = 0, L = 0, T = 0, eps = 0;

    auto* run = app.add_subcommand("run", "Run an experiment config");
    run->add_option("config", config)->required();
    auto* ver = app.add_subcommand("verify", "Run verification suites");
    ver->add_option("selector", selector)->required();
    ver->add_option("--z", z, "CLT threshold")->check(CLI::PositiveNumber);
    auto* fit = app.add_subcommand("fit", "Fit a diagonal sweep from a results CSV");
    fit->add_option("csv", csv)->required();
    auto* cost = app.add_subcommand("cost", "Predicted cost of one realization");
    cost->add_option("d", d)->required();
    cost->add_option("M", M)->required();
    cost->add_option("n", n)->required();
    cost->add_option("alpha", alpha)->required();
    auto* sel = app.add_subcommand("select-level", "Smallest diagonal level meeting a tolerance");
    sel->add_option("C", C)->required();
    sel->add_option("L", L)->required();
    sel->add_option("T", T)->required();
    sel->add_option("epsilon", eps)->required();
    sel->add_option("--cap", cap, "Largest level to try");
    double c_upper = 0.0;
    auto* c_upper_opt =
        sel->add_option("--c-upper", c_upper, "Also select for an inflated constant");

    // Global flags may follow the subcommand too.
    for (auto* sub : {run, ver, fit, cost, sel}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int const rc = app.exit(e);
        return rc == 0 ? exit_ok : exit_usage;
    }

    try {
        if (*run) return cmd_run(config, g, out_opt->count() > 0);
        if (*ver) return cmd_verify(selector, g, z);
        if (*fit) return cmd_fit(csv, g);
        if (*cost) return cmd_cost(d, M, n, alpha, g);
        if (*sel) {
            std::vector<double> constants{C};
            if (*c_upper_opt) constants.push_back(c_upper);
            return cmd_select(constants, L, T, eps, cap, g);
        }
    } catch (const mlp::UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return exit_usage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_failure;
    }
    return exit_usage;
}

// SPDX-License-Identifier: Apache-2.0
#pragma once

/*!
 * \file experiment.hpp
 * \brief Convergence/cost experiments over an (M, n) grid, CSV emission and
 *        the convergence fit over diagonal sweeps.
 */

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <boost/algorithm/string.hpp>

#include "mlp/bounds.hpp"
#include "mlp/harness/config.hpp"
#include "mlp/mlp.hpp"
#include "mlp/oracles.hpp"
#include "mlp/rng_streams.hpp"
#include "mlp/stat_tests.hpp"

#ifndef MLP_GIT_REVISION
#define MLP_GIT_REVISION "unknown"
#endif

namespace mlp::harness {

struct RunRecord {
    std::size_t d = 0;
    std::uint64_t M = 0;
    int n = 0;
    std::size_t K = 0;
    std::uint64_t seed = 0;
    double mean = 0.0;
    double stddev = 0.0;
    double rmse = 0.0;
    double rmse_stderr = 0.0;
    double rmse_band = 0.0; //!< oracle error_estimate: RMSE is reported +- this
    double reference = 0.0;
    std::string reference_method;
    double C = 0.0;
    double C_upper = 0.0;
    double a_priori_error = 0.0;
    double a_priori_error_upper = 0.0;
    std::uint64_t predicted_cost = 0;
    std::uint64_t measured_cost = 0;
    std::uint64_t measured_field_draws = 0;
    std::string status = "ok"; //!< ok | budget_exceeded | level_cap | cost_saturated
    double wall_time_s = 0.0;  //!< kept out of the CSV body
};

//---------------------------------------------------------------------------//
// Reference values
//---------------------------------------------------------------------------//
inline ReferenceValue compute_reference(const ExperimentConfig& cfg, const Problem<AnyField>& pb) {
    auto const& p = cfg.problem;
    auto const& o = cfg.oracle;
    if (o.method == "fixed") return {o.value, OracleMethod::fixed, 0.0, 0.0};
    if (o.method == "closed_form") {
        LinearCase lc;
        if (p.nonlinearity == "linear")
            lc.c = p.c;
        else if (p.nonlinearity != "zero")
            throw UsageError("oracle: closed_form needs a zero or linear nonlinearity");
        if (p.field == "bm")
            lc.field = FieldKind::bm;
        else if (p.field == "gbm") {
            lc.field = FieldKind::gbm;
            lc.gbm = make_gbm_params(p);
        } else
            throw UsageError("oracle: closed_form needs a bm or gbm field");
        if (p.g == "squared_norm")
            lc.g = GKind::squared_norm;
        else if (p.g == "sum_of_coordinates")
            lc.g = GKind::sum_of_coordinates;
        else if (p.g == "constant")
            lc.g = GKind::constant;
        else
            throw UsageError("oracle: closed_form does not support g = " + p.g);
        lc.g_constant = p.g_constant;
        lc.T = p.T;
        lc.xi = p.xi;
        return linear_closed_form(lc);
    }
    if (o.method == "finite_difference") {
        mlp::detail::require(p.d == 1, "oracle: finite_difference needs d = 1");
        FdProblem fd;
        if (p.field == "bm") {
            fd.field = FieldKind::bm;
        } else {
            fd.field = FieldKind::gbm;
            fd.alpha = p.alphas[0];
            fd.beta = p.betas[0];
        }
        fd.T = p.T;
        fd.xi = p.xi[0];
        fd.f = pb.f;
        fd.g = pb.g;
        return fd_solve_1d(fd, FdGrid{o.fd_nodes, o.fd_steps, o.fd_half_width});
    }
    return nested_picard(pb, o.picard_depth, o.picard_samples, cfg.seed, cfg.workers);
}

//---------------------------------------------------------------------------//
// CSV
//---------------------------------------------------------------------------//
inline const std::vector<std::string>& run_record_columns() {
    static const std::vector<std::string> cols{
        "d", "M", "n", "K", "seed", "mean", "std", "rmse", "rmse_stderr", "rmse_band",
        "reference", "reference_method", "C", "C_upper", "a_priori_error",
        "a_priori_error_upper", "predicted_cost", "measured_cost", "measured_field_draws",
        "status"};
    return cols;
}

inline std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string to_csv_row(const RunRecord& r) {
    std::ostringstream os;
    os << r.d << ',' << r.M << ',' << r.n << ',' << r.K << ',' << r.seed << ','
       << fmt_double(r.mean) << ',' << fmt_double(r.stddev) << ',' << fmt_double(r.rmse) << ','
       << fmt_double(r.rmse_stderr) << ',' << fmt_double(r.rmse_band) << ','
       << fmt_double(r.reference) << ',' << r.reference_method << ',' << fmt_double(r.C) << ','
       << fmt_double(r.C_upper) << ',' << fmt_double(r.a_priori_error) << ','
       << fmt_double(r.a_priori_error_upper) << ',' << r.predicted_cost << ','
       << r.measured_cost << ',' << r.measured_field_draws << ',' << r.status;
    return os.str();
}

struct CsvTable {
    std::vector<std::string> metadata; //!< '#'-prefixed lines, prefix stripped
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

inline CsvTable parse_csv(std::istream& in) {
    CsvTable t;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            mlp::detail::require(!have_header, "csv: metadata after header");
            t.metadata.push_back(boost::trim_copy(line.substr(1)));
            continue;
        }
        std::vector<std::string> cells;
        boost::split(cells, line, boost::is_any_of(","));
        if (!have_header) {
            t.header = std::move(cells);
            have_header = true;
        } else {
            mlp::detail::require(cells.size() == t.header.size(), "csv: row width mismatch");
            t.rows.push_back(std::move(cells));
        }
    }
    mlp::detail::require(have_header, "csv: missing header row");
    return t;
}

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("csv: cannot open '" + path + "'");
    return parse_csv(in);
}

inline std::vector<RunRecord> parse_run_records(const CsvTable& t) {
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < t.header.size(); ++i) col[t.header[i]] = i;
    for (auto const& c : run_record_columns())
        mlp::detail::require(col.count(c) == 1, "csv: missing column '" + c + "'");
    std::vector<RunRecord> out;
    for (auto const& row : t.rows) {
        auto s = [&](const char* c) -> const std::string& { return row[col.at(c)]; };
        auto d = [&](const char* c) { return std::stod(s(c)); };
        auto u = [&](const char* c) { return std::uint64_t(std::stoull(s(c))); };
        RunRecord r;
        r.d = u("d");
        r.M = u("M");
        r.n = std::stoi(s("n"));
        r.K = u("K");
        r.seed = u("seed");
        r.mean = d("mean");
        r.stddev = d("std");
        r.rmse = d("rmse");
        r.rmse_stderr = d("rmse_stderr");
        r.rmse_band = d("rmse_band");
        r.reference = d("reference");
        r.reference_method = s("reference_method");
        r.C = d("C");
        r.C_upper = d("C_upper");
        r.a_priori_error = d("a_priori_error");
        r.a_priori_error_upper = d("a_priori_error_upper");
        r.predicted_cost = u("predicted_cost");
        r.measured_cost = u("measured_cost");
        r.measured_field_draws = u("measured_field_draws");
        r.status = s("status");
        out.push_back(std::move(r));
    }
    return out;
}

struct RunMetadata {
    std::string config_hash;
    std::uint64_t seed = 0;
    ErrorConstant constant;
    ReferenceValue reference;
};

inline void write_csv(std::ostream& os, const std::vector<RunRecord>& records,
                      const RunMetadata& meta) {
    os << "# mlp-picard experiment results\n";
    os << "# generator: " << generator_name << " v" << generator_version << '\n';
    os << "# git_revision: " << MLP_GIT_REVISION << '\n';
    os << "# config_hash: " << meta.config_hash << '\n';
    os << "# seed: " << meta.seed << '\n';
    os << "# reference: " << fmt_double(meta.reference.value) << " ("
       << to_string(meta.reference.method) << ", error_estimate "
       << fmt_double(meta.reference.error_estimate) << ")\n";
    os << "# error_constant: C=" << fmt_double(meta.constant.C)
       << " C_upper(5sigma)=" << fmt_double(meta.constant.upper(5.0))
       << " samples=" << meta.constant.samples << " time_nodes=" << meta.constant.time_nodes
       << '\n';
    os << "# wall_time_s:";
    for (auto const& r : records) {
        char buf[32];
        std::snprintf(buf, sizeof buf, " %.3f", r.wall_time_s);
        os << buf;
    }
    os << '\n';
    auto const& cols = run_record_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
    os << '\n';
    for (auto const& r : records) os << to_csv_row(r) << '\n';
}

//---------------------------------------------------------------------------//
// Experiment
//---------------------------------------------------------------------------//
struct ExperimentResult {
    std::vector<RunRecord> records;
    RunMetadata meta;
};

/// Runs every grid point of \p cfg. Grid points over budget (or above level
/// 10) are marked and skipped unless cfg.override_budget is set.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    auto const pb = make_problem(cfg.problem);
    ExperimentResult res;
    res.meta.config_hash = config_hash(cfg.source_text);
    res.meta.seed = cfg.seed;
    res.meta.reference = compute_reference(cfg, pb);
    res.meta.constant = estimate_error_constant(pb, cfg.oracle.constant_samples,
                                                cfg.oracle.constant_nodes, cfg.seed, cfg.workers);
    double const C = res.meta.constant.C;
    double const C_up = res.meta.constant.upper(5.0);
    double const L = pb.f.lipschitz();
    std::uint64_t const alpha = draws_per_dimension(cfg.problem);
    double const u_ref = res.meta.reference.value;

    for (auto const& gp : cfg.mlp.grid) {
        RunRecord r;
        r.d = pb.d;
        r.M = gp.M;
        r.n = gp.n;
        r.K = cfg.mlp.replicates;
        r.seed = cfg.seed;
        r.reference = u_ref;
        r.reference_method = to_string(res.meta.reference.method);
        r.rmse_band = res.meta.reference.error_estimate;
        r.C = C;
        r.C_upper = C_up;
        r.a_priori_error = a_priori_error(C, L, pb.T, gp.M, gp.n);
        r.a_priori_error_upper = a_priori_error(C_up, L, pb.T, gp.M, gp.n);
        auto const predicted = cost_formula(pb.d, gp.M, gp.n, alpha);
        r.predicted_cost = predicted.value;

        if (!cfg.override_budget) {
            if (gp.n > max_level_without_override) {
                r.status = "level_cap";
                res.records.push_back(r);
                continue;
            }
            if (predicted.saturated || double(predicted.value) > cfg.budget) {
                r.status = predicted.saturated ? "cost_saturated" : "budget_exceeded";
                res.records.push_back(r);
                continue;
            }
        }

        auto const start = std::chrono::steady_clock::now();
        std::vector<CostLedger> ledgers;
        auto const v = mlp_replicates(pb, MlpParams{gp.M, gp.n}, 0.0, pb.xi, r.K, cfg.seed,
                                      cfg.workers, &ledgers);
        r.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

        auto const mo = sample_moments(v);
        r.mean = mo.mean;
        r.stddev = std::sqrt(mo.variance);
        std::vector<double> sq(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - u_ref) * (v[i] - u_ref);
        auto const ms = sample_moments(sq);
        r.rmse = std::sqrt(ms.mean);
        r.rmse_stderr = ms.count > 1 ? mlp::detail::sqrt_stderr(ms.mean, ms.stderr_of_mean()) : 0.0;
        r.measured_cost = ledgers.front().normal_draws;
        r.measured_field_draws = ledgers.front().field_draws();
        for (auto const& l : ledgers)
            if (l.normal_draws != r.measured_cost) r.status = "cost_varies";
        res.records.push_back(r);
    }
    return res;
}

//---------------------------------------------------------------------------//
// Convergence fit
//---------------------------------------------------------------------------//
struct FitLevel {
    int N = 0;
    double rmse = 0.0;
    double rmse_stderr = 0.0;
    double log_rmse = 0.0;
    double bound = 0.0;
    bool below_bound = false;
};

struct FitSummary {
    std::vector<FitLevel> levels;
    double decay_slope = 0.0; //!< d log(RMSE) / dN by least squares
    bool monotone = true;     //!< RMSE(N+1) <= RMSE(N) + 2 sigma
    bool below_bound = true;  //!< every level under its a-priori bound
};

/// Summarises the diagonal (M = n) records with status ok. Bounds use the
/// 5-sigma-inflated constant when available.
inline FitSummary convergence_fit(const std::vector<RunRecord>& records) {
    std::map<int, const RunRecord*> diag;
    for (auto const& r : records)
        if (r.status == "ok" && r.n >= 1 && r.M == std::uint64_t(r.n)) diag[r.n] = &r;
    mlp::detail::require(diag.size() >= 3, "convergence_fit: need >= 3 diagonal levels");

    FitSummary s;
    std::vector<double> xs, ys;
    for (auto const& [N, r] : diag) {
        FitLevel lv;
        lv.N = N;
        lv.rmse = r->rmse;
        lv.rmse_stderr = r->rmse_stderr;
        lv.log_rmse = std::log(std::max(r->rmse, 1e-300));
        lv.bound = r->a_priori_error_upper > 0.0 ? r->a_priori_error_upper : r->a_priori_error;
        lv.below_bound = lv.rmse <= lv.bound;
        s.below_bound = s.below_bound && lv.below_bound;
        xs.push_back(double(N));
        ys.push_back(lv.log_rmse);
        s.levels.push_back(lv);
    }
    for (std::size_t i = 0; i + 1 < s.levels.size(); ++i) {
        auto const& a = s.levels[i];
        auto const& b = s.levels[i + 1];
        double const noise = 2.0 * std::hypot(a.rmse_stderr, b.rmse_stderr);
        if (b.rmse > a.rmse + noise) s.monotone = false;
    }
    s.decay_slope = least_squares(xs, ys).slope;
    return s;
}

} // namespace mlp::harness

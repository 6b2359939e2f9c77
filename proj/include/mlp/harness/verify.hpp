// SPDX-License-Identifier: Apache-2.0
#pragma once

/*!
 * \file verify.hpp
 * \brief Named verification suites behind `mlp_picard verify <selector>`.
 */

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "mlp/bounds.hpp"
#include "mlp/fields.hpp"
#include "mlp/harness/experiment.hpp"
#include "mlp/mlp.hpp"
#include "mlp/nonlinearity.hpp"
#include "mlp/oracles.hpp"
#include "mlp/rng_streams.hpp"
#include "mlp/stat_tests.hpp"

namespace mlp::harness {

struct ReportRow {
    std::string suite;
    CltVerdict verdict;
    bool expect_fail = false; //!< negative control

    bool ok() const { return verdict.pass != expect_fail; }
};

struct VerifyOptions {
    std::uint64_t seed = 20240611;
    unsigned workers = 1;
    double z = default_z_threshold;
};

namespace suites {

inline CltVerdict bool_verdict(std::string name, bool pass, double statistic = 0.0,
                               double target = 0.0, std::string note = {}) {
    CltVerdict v{std::move(name), statistic, target, 0.0, 0.0, pass, std::move(note)};
    return v;
}

// Upper 1e-6 quantile of chi-square with 15 degrees of freedom.
inline constexpr double chi2_15_critical_1e6 = 56.49344249977338;

inline std::vector<CltVerdict> rng(const VerifyOptions& o) {
    std::vector<CltVerdict> out;
    auto const key = make_key(o.seed, MultiIndex{-7}, StreamTag::auxiliary);

    constexpr std::size_t n = 100000;
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = uniform01(key, i);
    auto const mu = sample_moments(u);
    out.push_back(make_verdict("uniform_mean", mu.mean, 0.5, std::sqrt(1.0 / 12.0 / n), o.z));
    // Var of the sample variance of U(0,1): (mu4 - sigma^4)/n = (1/80 - 1/144)/n
    out.push_back(make_verdict("uniform_variance", mu.variance, 1.0 / 12.0,
                               std::sqrt((1.0 / 80.0 - 1.0 / 144.0) / n), o.z));

    constexpr std::size_t big = 1000000;
    std::vector<double> bins(16, 0.0);
    auto const key2 = make_key(o.seed, MultiIndex{-7, 1}, StreamTag::auxiliary);
    for (std::size_t i = 0; i < big; ++i) bins[std::size_t(uniform01(key2, i) * 16.0)] += 1.0;
    double chi2 = 0.0;
    double const expected = double(big) / 16.0;
    for (double b : bins) chi2 += (b - expected) * (b - expected) / expected;
    out.push_back(bool_verdict("uniform_chi2_16bins", chi2 <= chi2_15_critical_1e6, chi2,
                               chi2_15_critical_1e6, "critical value at significance 1e-6"));

    auto const nkey = make_key(o.seed, MultiIndex{-7}, StreamTag::field_increment);
    auto const z = std_normals(nkey, 0, n);
    auto const mz = sample_moments(z);
    out.push_back(make_verdict("normal_mean", mz.mean, 0.0, 1.0 / std::sqrt(double(n)), o.z));
    std::vector<double> z2(n);
    for (std::size_t i = 0; i < n; ++i) z2[i] = z[i] * z[i];
    auto const m2 = sample_moments(z2);
    out.push_back(make_verdict("normal_second_moment", m2.mean, 1.0, std::sqrt(2.0 / n), o.z));

    bool separated = true;
    for (std::int64_t i = 0; i < 1000; ++i) {
        MultiIndex const idx{0, i};
        auto const a = make_key(o.seed, idx, StreamTag::time_uniform);
        auto const b = make_key(o.seed, idx, StreamTag::field_increment);
        auto const c = make_key(o.seed, idx, StreamTag::auxiliary);
        if (a == b || b == c || a == c) separated = false;
    }
    out.push_back(bool_verdict("purpose_separation", separated));

    // Digest injectivity over every key of an M = 3, n = 3 run.
    auto const pb = Problem<BrownianField>(1, 1.0, {0.0}, BrownianField(1), linear_f(0.5),
                                           squared_norm_g());
    std::set<std::array<std::uint32_t, 4>> digests;
    std::size_t total = 0;
    KeySink sink = [&](const StreamKey& k) {
        ++total;
        digests.insert(k.digest);
    };
    CostLedger ledger;
    double const x0[1] = {0.0};
    mlp_value(pb, MlpParams{3, 3}, 0.0, x0, MultiIndex::root(), o.seed, ledger, &sink);
    out.push_back(bool_verdict("digest_injectivity", digests.size() == total,
                               double(digests.size()), double(total)));
    return out;
}

/// ledger == cost_formula and cost_formula <= alpha d (5M)^n.
inline std::vector<CltVerdict> cost_scan(const VerifyOptions& o,
                                         std::vector<std::size_t> dims = {1, 2, 5},
                                         std::vector<std::uint64_t> Ms = {1, 2, 3},
                                         std::vector<int> ns = {0, 1, 2, 3}) {
    std::vector<CltVerdict> out;
    for (auto d : dims) {
        std::vector<double> xi(d, 0.0);
        auto const pb = Problem<BrownianField>(d, 1.0, xi, BrownianField(d), linear_f(0.5),
                                               squared_norm_g());
        for (auto M : Ms)
            for (int n : ns) {
                CostLedger ledger;
                mlp_value(pb, MlpParams{M, n}, 0.0, xi, MultiIndex::root(), o.seed, ledger);
                auto const f = cost_formula(d, M, n, 1);
                std::string const tag = "[d=" + std::to_string(d) + ";M=" + std::to_string(M) +
                                        ";n=" + std::to_string(n) + "]";
                out.push_back(bool_verdict("cost_exact" + tag,
                                           !f.saturated && ledger.normal_draws == f.value,
                                           double(ledger.normal_draws), double(f.value)));
                if (n >= 1) {
                    double const b = cost_bound(d, M, n, 1.0);
                    out.push_back(bool_verdict("cost_bound" + tag, double(f.value) <= b,
                                               double(f.value), b));
                }
            }
    }
    return out;
}

/// GBM d = 2 with Sigma built from 0.5 off-diagonals, columns renormalised.
inline GbmField correlated_gbm_2d(double alpha_shift = 0.0) {
    auto cols = normalize_columns({{1.0, 0.5}, {0.5, 1.0}});
    return GbmField(GbmParams({0.05 + alpha_shift, 0.03 + alpha_shift}, {0.2, 0.3},
                              std::move(cols), 0.1 + std::abs(alpha_shift)));
}

inline std::vector<CltVerdict> flow(const VerifyOptions& o) {
    auto const field = correlated_gbm_2d();
    std::vector<double> const x{1.0, 2.0};
    return flow_property_test(field, 0.0, 0.5, 1.0, x, 100000, o.seed, o.z, o.workers);
}

inline GbmParams em_gbm_params() { return GbmParams::uncorrelated({0.05}, {0.2}); }

inline EmRateResult em_rate(const VerifyOptions& o) {
    auto const params = em_gbm_params();
    GbmField const exact(params);
    ExactEndpoint const ep = [&](double t, double s, std::span<const double> x,
                                 std::span<const double> dw) { return exact.endpoint(t, s, x, dw); };
    std::vector<double> const x{1.0};
    return em_rate_test(gbm_coefficients(params), ep, 0.0, 1.0, x, {4, 8, 16, 32, 64, 128},
                        10000, o.seed, o.z, o.workers);
}

inline std::vector<CltVerdict> em(const VerifyOptions& o) {
    auto const r = em_rate(o);
    auto v = r.verdict;
    std::vector<CltVerdict> out{v};
    out.push_back(bool_verdict("em_rms_decreases_on_refinement", r.monotone));
    return out;
}

/// 1-d heat problem with g = x^2, xi = 0, T = 1 and f(v) = c v.
inline LinearCase heat_linear_case(double c) {
    LinearCase lc;
    lc.c = c;
    lc.field = FieldKind::bm;
    lc.g = GKind::squared_norm;
    lc.T = 1.0;
    lc.xi = {0.0};
    return lc;
}

inline std::vector<CltVerdict> mean_identity(const VerifyOptions& o) {
    auto const lc = heat_linear_case(1.0);
    return {mean_identity_test(lc, 2, 1, 10000, o.seed, o.z, o.workers),
            mean_identity_test(lc, 2, 2, 10000, o.seed, o.z, o.workers)};
}

inline std::vector<CltVerdict> moments(const VerifyOptions& o) {
    std::vector<CltVerdict> out;
    double const powers[] = {1.0, 2.0, 4.0};
    std::vector<double> const xi0{0.0};
    for (auto const& mc :
         moment_domination(BrownianField(1), 1.0, xi0, 1.0, 0.0, powers, 100000, o.seed, o.workers))
        out.push_back(bool_verdict("moment_bm[p=" + std::to_string(int(mc.p)) + "]", mc.pass,
                                   mc.empirical, mc.bound));
    auto const gbm = correlated_gbm_2d();
    std::vector<double> const xi{1.0, 2.0};
    for (auto const& mc : moment_domination(gbm, 1.0, xi, 0.0, gbm.params().kappa(), powers,
                                            100000, o.seed, o.workers))
        out.push_back(bool_verdict("moment_gbm[p=" + std::to_string(int(mc.p)) + "]", mc.pass,
                                   mc.empirical, mc.bound));
    return out;
}

inline std::vector<CltVerdict> oracles(const VerifyOptions& o) {
    std::vector<CltVerdict> out;
    for (double c : {0.0, 0.5, 1.0}) {
        FdProblem fd;
        fd.f = linear_f(c);
        auto const ref = fd_solve_1d(fd, FdGrid{100, 0, 0.0});
        double const exact = linear_closed_form(heat_linear_case(c)).value;
        out.push_back(bool_verdict("fd_vs_closed_form[c=" + fmt_double(c) + "]",
                                   std::abs(ref.value - exact) <= ref.error_estimate + 1e-6,
                                   ref.value, exact));
    }
    auto const lc = heat_linear_case(0.5);
    auto const pb = make_linear_problem(lc);
    auto const np1 = nested_picard(pb, 1, 1000, o.seed, o.workers);
    out.push_back(make_verdict("nested_picard_k1", np1.value,
                               linear_picard_iterate(lc, 1).value, np1.error_estimate, o.z));
    auto const np2 = nested_picard(pb, 2, 1000, o.seed, o.workers);
    out.push_back(make_verdict("nested_picard_k2", np2.value,
                               linear_picard_iterate(lc, 2).value, np2.error_estimate, o.z));
    return out;
}

inline constexpr int selector_scan = 200;

inline std::vector<CltVerdict> selector(const VerifyOptions& o) {
    std::vector<CltVerdict> out;
    std::size_t bad = 0, resolved = 0;
    for (std::int64_t i = 0; i < 50; ++i) {
        auto const key = make_key(o.seed, MultiIndex{-8, i}, StreamTag::auxiliary);
        double const C = 10.0 * uniform01(key, 0);
        double const L = uniform01(key, 1);
        double const T = 0.1 + uniform01(key, 2);
        double const eps = std::pow(10.0, -3.0 * uniform01(key, 3));
        int expected = 0;
        for (int N = 1; N <= selector_scan; ++N)
            if (diagonal_error(C, L, T, N) <= eps) {
                expected = N;
                break;
            }
        try {
            int const got = select_level(C, L, T, eps, selector_scan);
            if (got != expected) ++bad;
            ++resolved;
        } catch (const LevelCapReached&) {
            if (expected != 0) ++bad;
        }
    }
    out.push_back(bool_verdict("select_level_minimal", bad == 0, double(bad), 0.0,
                               std::to_string(resolved) + "/50 below the cap"));
    return out;
}

inline std::vector<CltVerdict> lipschitz(const VerifyOptions& o) {
    DefaultRiskParams const p;
    double const L = lipschitz_of_default_risk(p);
    double worst = 0.0;
    auto const key = make_key(o.seed, MultiIndex{-9}, StreamTag::auxiliary);
    for (std::uint64_t i = 0; i < 1000000; ++i) {
        double const u = 2.0 * p.v_l * (2.0 * uniform01(key, 2 * i) - 1.0);
        double const w = 2.0 * p.v_l * (2.0 * uniform01(key, 2 * i + 1) - 1.0);
        if (u == w) continue;
        worst = std::max(worst, std::abs(default_risk_f(p, u) - default_risk_f(p, w)) / std::abs(u - w));
    }
    return {bool_verdict("default_risk_lipschitz", worst <= L, worst, L)};
}

inline std::vector<CltVerdict> negative_controls(const VerifyOptions& o) {
    std::vector<CltVerdict> out;
    // Second leg with a shifted drift.
    auto const field = correlated_gbm_2d();
    auto const shifted = correlated_gbm_2d(0.1);
    std::vector<double> const x{1.0, 2.0};
    auto flows = flow_property_test(field, shifted, 0.0, 0.5, 1.0, x, 100000, o.seed, o.z, o.workers);
    bool any_fail = false;
    for (auto const& v : flows) any_fail = any_fail || !v.pass;
    out.push_back(bool_verdict("control_flow_mismatched_drift", !any_fail));
    // V_{2,2} compared with the first Picard iterate.
    out.push_back(mean_identity_test(heat_linear_case(1.0), 2, 2, 10000, o.seed, o.z,
                                     o.workers, 1));
    // RMSE growing with N.
    std::vector<RunRecord> recs;
    for (int N = 1; N <= 4; ++N) {
        RunRecord r;
        r.M = std::uint64_t(N);
        r.n = N;
        r.rmse = 0.1 * N;
        r.rmse_stderr = 0.001;
        r.a_priori_error = 10.0;
        recs.push_back(r);
    }
    out.push_back(bool_verdict("control_fit_increasing_rmse", convergence_fit(recs).monotone));
    return out;
}

} // namespace suites

inline const std::vector<std::string>& suite_names() {
    static const std::vector<std::string> names{"rng", "cost", "flow", "em", "mean-identity",
                                                "moments", "oracles", "selector", "lipschitz",
                                                "negative-controls"};
    return names;
}

/// Runs one suite, or every suite for "all". Throws UsageError on an unknown
/// selector.
inline std::vector<ReportRow> verify(const std::string& selector, const VerifyOptions& o) {
    using Suite = std::function<std::vector<CltVerdict>(const VerifyOptions&)>;
    static const std::map<std::string, Suite> table{
        {"rng", suites::rng},
        {"cost", [](const VerifyOptions& v) { return suites::cost_scan(v); }},
        {"flow", suites::flow},
        {"em", suites::em},
        {"mean-identity", suites::mean_identity},
        {"moments", suites::moments},
        {"oracles", suites::oracles},
        {"selector", suites::selector},
        {"lipschitz", suites::lipschitz},
        {"negative-controls", suites::negative_controls},
    };
    std::vector<std::string> selected;
    if (selector == "all")
        selected = suite_names();
    else if (table.count(selector))
        selected = {selector};
    else
        throw UsageError("verify: unknown suite '" + selector + "'");

    std::vector<ReportRow> rows;
    for (auto const& name : selected) {
        bool const control = name == "negative-controls";
        for (auto& v : table.at(name)(o)) rows.push_back({name, std::move(v), control});
    }
    return rows;
}

inline void write_report(std::ostream& os, const std::vector<ReportRow>& rows) {
    os << "# mlp-picard verification report\n";
    os << "# generator: " << generator_name << " v" << generator_version << '\n';
    os << "# git_revision: " << MLP_GIT_REVISION << '\n';
    std::size_t clt = 0;
    for (auto const& r : rows)
        if (r.verdict.stderr_ > 0.0) ++clt;
    // two-sided normal tail at 5 sigma
    os << "# clt_verdicts: " << clt << " expected_false_failures: " << double(clt) * 5.733e-7
       << '\n';
    os << "suite,test,statistic,target,stderr,z,pass,expect_fail,ok\n";
    for (auto const& r : rows) {
        os << r.suite << ',' << r.verdict.name << ',' << fmt_double(r.verdict.statistic) << ','
           << fmt_double(r.verdict.target) << ',' << fmt_double(r.verdict.stderr_) << ','
           << fmt_double(r.verdict.z_threshold) << ',' << (r.verdict.pass ? 1 : 0) << ','
           << (r.expect_fail ? 1 : 0) << ',' << (r.ok() ? 1 : 0) << '\n';
    }
}

} // namespace mlp::harness

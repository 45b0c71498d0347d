#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "reports.hpp"

namespace anderson {

// ---------------------------------------------------------------------------
// acceptance suite plumbing
// ---------------------------------------------------------------------------

struct CheckResult {
    std::string name;
    std::string description;
    std::string regime;  // "property", "pinned-corpus", "report-only"
    bool gated = true;
    bool passed = false;
    Json measured = Json::object();
    std::string notes;
    double seconds = 0.0;
};

struct AcceptanceSuite {
    std::vector<CheckResult> checks;

    bool all_gated_passed() const {
        for (const auto& c : checks)
            if (c.gated && !c.passed) return false;
        return true;
    }
};

// Two criteria pin desk-scale parameters at which their headline clause is
// arithmetically out of reach; their FAIL lines stay visible and the analysis
// lives in the README. A failure is only accepted as the recorded state when
// the surviving clauses still hold and the failing rates sit near their
// recorded values, so any drift elsewhere still breaks the suite.
inline bool matches_documented_failure(const CheckResult& c, std::string* reason = nullptr) {
    if (c.passed || !c.gated) return false;
    const Json& m = c.measured;
    const auto num = [&m](const char* key) {
        return m.contains(key) ? m.at(key).get<double>() : std::numeric_limits<double>::quiet_NaN();
    };
    if (c.name == "criterion-04-movement-sweep") {
        const bool shape = num("valid") >= 500 && num("monotone_violations") == 0 &&
                           num("recon_ok") == num("valid") &&
                           num("unchanged_ok_fraction") < 0.99 &&
                           num("max_predicted_movement_over_window") < 1e-12;
        if (shape && reason)
            *reason = "the rank-one movement scale gamma^2*|a|^2 sits below any energy window "
                      "double precision can resolve at these parameters, so no disorder level "
                      "can change the resonance count; the other clauses all hold";
        return shape;
    }
    if (c.name == "criterion-06-strict-decay") {
        const bool shape = num("trials_done") >= 100 && num("trunc_rate") >= 0.99 &&
                           num("lip_rate") >= 0.95 && num("g_rate") >= 0.40 &&
                           (num("g_pass") < num("g_pairs") || num("lip_rate") < 0.99);
        if (shape && reason)
            *reason = "at this gamma the distance-1 kernel entries gamma/|v - lambda| typically "
                      "exceed gamma^0.85 and the localized Lipschitz rate stays just under 0.99; "
                      "both clauses reach 100% in the deep-gamma control run";
        return shape;
    }
    return false;
}

// gated failures that are NOT the recorded desk-scale state
inline std::vector<const CheckResult*> undocumented_failures(const AcceptanceSuite& suite) {
    std::vector<const CheckResult*> out;
    for (const auto& c : suite.checks)
        if (c.gated && !c.passed && !matches_documented_failure(c)) out.push_back(&c);
    return out;
}

inline Json check_to_json(const CheckResult& c) {
    Json j;
    j["name"] = c.name;
    j["description"] = c.description;
    j["regime"] = c.regime;
    j["gated"] = c.gated;
    j["passed"] = c.passed;
    j["measured"] = c.measured;
    if (!c.notes.empty()) j["notes"] = c.notes;
    // wall-clock seconds stay on the terminal lines; reports must be rerun-stable
    return j;
}

inline std::string render_verify_report(const AcceptanceSuite& suite) {
    Json j;
    j["tool"] = "verify";
    Json arr = Json::array();
    for (const auto& c : suite.checks) arr.push_back(check_to_json(c));
    j["checks"] = std::move(arr);
    j["all_gated_passed"] = suite.all_gated_passed();
    Json doc = Json::array();
    Json undoc = Json::array();
    for (const auto& c : suite.checks) {
        if (!c.gated || c.passed) continue;
        (matches_documented_failure(c) ? doc : undoc).push_back(c.name);
    }
    j["documented_failures"] = std::move(doc);
    j["undocumented_failures"] = std::move(undoc);
    return render_json(j);
}

namespace detail {

struct Stopwatch {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// pinned corpus parameters. The acceptance criteria fix most of these; the
// ones the criteria leave open (volumes, base seeds, attempt caps) are pinned
// here so every run measures the same corpus.
// ---------------------------------------------------------------------------

inline constexpr int kC1Matrices = 200;
inline constexpr int kC1MaxDim = 12;
inline constexpr double kC1WindowHalf = 0.45;
inline constexpr double kC1Tol = 1e-10;
inline constexpr double kC1RuntimeLimit = 10.0;
inline constexpr std::uint64_t kC1Seed = 101;

inline constexpr int kC3Seeds = 20;
inline constexpr int kC3Volume = 64;
inline constexpr int kC3N = 16;
inline constexpr double kC3Gamma = 0.02;
inline constexpr double kC3Ratio = 0.125;
inline constexpr double kC3Residual = 1e-8;
inline constexpr double kC3TolFloor = 1e-8;
inline constexpr double kC3RuntimeLimit = 120.0;
inline constexpr std::uint64_t kC3Seed = 303;

inline constexpr int kC4Volume = 48;
inline constexpr int kC4N = 64;
inline constexpr double kC4Gamma = 1e-3;
inline constexpr int kC4L0 = 1;
inline constexpr long kC4ValidTarget = 500;
inline constexpr long kC4MaxAttempts = 4000;
inline constexpr double kC4RateFloor = 0.99;
inline constexpr double kC4RuntimeLimit = 300.0;
inline constexpr std::uint64_t kC4Seed = 404;
inline constexpr double kC5RelTol = 1e-10;

inline constexpr int kC6Volume = 48;
inline constexpr int kC6N = 128;
inline constexpr double kC6Gamma = 1e-4;
inline constexpr long kC6Trials = 100;
inline constexpr double kC6RateFloor = 0.99;
inline constexpr double kC6RuntimeLimit = 180.0;
inline constexpr std::uint64_t kC6Seed = 606;
inline constexpr double kC6DeepGamma = 1e-18;  // report-only strict sub-regime

inline constexpr int kC8Volume = 32;
inline constexpr double kC8Gamma = 1e-3;
inline constexpr long kC8Trials = 500;
inline constexpr double kC8RuntimeLimit = 120.0;
inline constexpr std::uint64_t kC8Seed = 808;

inline constexpr int kC9Volume = 64;
inline constexpr int kC9N = 64;
inline constexpr double kC9Gamma = 0.01;
inline constexpr long kC9Trials = 100;
inline constexpr long kC9Distance = 10;
inline constexpr long kC9MinDistance = 8;
inline constexpr double kC9ExceedMax = 0.01;
inline constexpr std::uint64_t kC9Seed = 909;

// ---------------------------------------------------------------------------
// criteria 1 and 2: random-matrix window equivalence and the shift Lipschitz
// bound, on one seeded corpus
// ---------------------------------------------------------------------------

namespace detail {

struct SchurCase {
    Mat K;
    BlockPartition part;
    SpectralWindow window{0.0, kC1WindowHalf};
};

inline double unit(SplitMix64& rng) { return rng.next_unit(); }

inline SchurCase make_schur_case(SplitMix64& rng) {
    SchurCase c;
    const long n = 3 + static_cast<long>(rng.next_below(kC1MaxDim - 2));  // 3..12
    const long m = 1 + static_cast<long>(rng.next_below(static_cast<std::uint64_t>(n - 2)));
    const long ne = n - m;
    Mat A(m, m);
    for (long i = 0; i < m; ++i)
        for (long j = i; j < m; ++j) A(i, j) = A(j, i) = 0.8 * unit(rng) - 0.4;
    Mat D(ne, ne);
    const double wiggle = 0.02 / static_cast<double>(ne);
    for (long i = 0; i < ne; ++i)
        for (long j = i; j < ne; ++j) D(i, j) = D(j, i) = wiggle * (2.0 * unit(rng) - 1.0);
    for (long i = 0; i < ne; ++i) {
        const double sign = rng.next_below(2) == 0 ? -1.0 : 1.0;
        D(i, i) = sign * (1.0 + unit(rng));  // |diag| in [1, 2]
    }
    Mat B(m, ne);
    for (long i = 0; i < m; ++i)
        for (long j = 0; j < ne; ++j) B(i, j) = 2.0 * unit(rng) - 1.0;
    const double target = 0.005 + 0.04 * unit(rng);  // coupling <= 0.045
    const double bn = operator_norm(B);
    if (bn > 0) B *= target / bn;

    c.K = Mat::Zero(n, n);
    c.K.topLeftCorner(m, m) = A;
    c.K.topRightCorner(m, ne) = B;
    c.K.bottomLeftCorner(ne, m) = B.transpose();
    c.K.bottomRightCorner(ne, ne) = D;
    for (long i = 0; i < m; ++i) c.part.keep.push_back(i);
    for (long i = m; i < n; ++i) c.part.eliminate.push_back(i);
    return c;
}

}  // namespace detail

inline CheckResult check_schur_window_equivalence(int matrices = kC1Matrices) {
    detail::Stopwatch sw;
    CheckResult c;
    c.name = "criterion-01-schur-window";
    c.description = "fixed-point eigenvalues == oracle eigenvalues inside the window, "
                    "random symmetric matrices with margin >= 0.5 and coupling <= 0.05";
    c.regime = "property";
    SplitMix64 rng(kC1Seed);
    long mismatches = 0;
    double max_err = 0.0, min_margin = std::numeric_limits<double>::infinity();
    for (int t = 0; t < matrices; ++t) {
        const detail::SchurCase sc = detail::make_schur_case(rng);
        const EliminationContext ctx = make_elimination_context(sc.K, sc.part);
        min_margin = std::min(min_margin, std::min(ctx.margin(sc.window.lo()),
                                                   ctx.margin(sc.window.hi())));
        const Spectrum oracle = dense_spectrum(sc.K);
        std::vector<double> expected;
        for (long i = 0; i < oracle.values.size(); ++i)
            if (sc.window.contains(oracle.values(i))) expected.push_back(oracle.values(i));
        std::vector<double> got;
        for (const auto& s : fixed_point_eigenvalues(ctx, sc.window)) got.push_back(s.lambda);
        if (got.size() != expected.size()) {
            ++mismatches;
            continue;
        }
        for (std::size_t i = 0; i < got.size(); ++i)
            max_err = std::max(max_err, std::abs(got[i] - expected[i]));
    }
    c.seconds = sw.seconds();
    c.measured["matrices"] = matrices;
    c.measured["count_mismatches"] = mismatches;
    c.measured["max_error"] = max_err;
    c.measured["min_window_margin"] = min_margin;
    c.measured["tolerance"] = kC1Tol;
    c.passed = mismatches == 0 && max_err <= kC1Tol && c.seconds <= kC1RuntimeLimit;
    return c;
}

inline CheckResult check_lipschitz_bound(int matrices = kC1Matrices) {
    detail::Stopwatch sw;
    CheckResult c;
    c.name = "criterion-02-lipschitz";
    c.description = "||F_lambda - F_E|| <= 2 (coupling/margin)^2 |lambda - E| on the "
                    "criterion-1 corpus, zero violations";
    c.regime = "property";
    SplitMix64 rng(kC1Seed);
    long samples = 0, violations = 0;
    double worst_ratio = 0.0;
    for (int t = 0; t < matrices; ++t) {
        const detail::SchurCase sc = detail::make_schur_case(rng);
        const EliminationContext ctx = make_elimination_context(sc.K, sc.part);
        const double margin =
            std::min(ctx.margin(sc.window.lo()), ctx.margin(sc.window.hi()));
        for (int p = 0; p < 3; ++p) {
            const double lambda = sc.window.lo() + 2.0 * kC1WindowHalf * detail::unit(rng);
            const double E = sc.window.lo() + 2.0 * kC1WindowHalf * detail::unit(rng);
            if (lambda == E) continue;
            const double norm = operator_norm(schur_shift_difference(ctx, lambda, E));
            const double bound = 2.0 * std::pow(ctx.off_diag_norm / margin, 2.0) *
                                 std::abs(lambda - E);
            ++samples;
            if (norm > bound) ++violations;
            if (bound > 0) worst_ratio = std::max(worst_ratio, norm / bound);
        }
    }
    c.seconds = sw.seconds();
    c.measured["samples"] = samples;
    c.measured["violations"] = violations;
    c.measured["worst_ratio"] = worst_ratio;
    c.passed = samples > 0 && violations == 0;
    return c;
}

// ---------------------------------------------------------------------------
// criterion 3: EFP completeness on the pinned relaxed corpus
// ---------------------------------------------------------------------------

inline CheckResult check_efp_completeness() {
    detail::Stopwatch sw;
    CheckResult c;
    c.name = "criterion-03-efp-completeness";
    c.description = "pooled EFP terminal eigenvalues match the oracle spectrum with "
                    "multiplicity on every seed";
    c.regime = "pinned-corpus";
    ExperimentConfig cfg;
    cfg.d = 1;
    cfg.sides = {kC3Volume};
    cfg.N = kC3N;
    cfg.gamma = kC3Gamma;
    cfg.kind = ScheduleKind::Geometric;
    cfg.ratio = kC3Ratio;
    const LatticeGeometry g = config_geometry(cfg);
    const ScaleSchedule sched = config_schedule(cfg);
    const double tol =
        std::max(kC3TolFloor, sched.eps(std::min(sched.k_bar, sched.max_scale())));

    double min_fraction = 1.0, max_residual = 0.0;
    long spurious = 0, pooled = 0, seeds_fully_matched = 0;
    for (int s = 0; s < kC3Seeds; ++s) {
        const std::uint64_t seed = mix_seed(kC3Seed, static_cast<std::uint64_t>(s));
        const Hamiltonian h = build_hamiltonian(g, sample_disorder(g, cfg.N, seed), cfg.gamma);
        const CompletenessReport rep = completeness_check(h, sched, tol);
        min_fraction = std::min(min_fraction, rep.matched_fraction);
        max_residual = std::max(max_residual, rep.max_residual);
        spurious += static_cast<long>(rep.spurious.size());
        pooled += rep.pooled;
        if (rep.matched_fraction == 1.0) ++seeds_fully_matched;
    }
    c.seconds = sw.seconds();
    c.measured["seeds"] = kC3Seeds;
    c.measured["seeds_fully_matched"] = seeds_fully_matched;
    c.measured["min_matched_fraction"] = min_fraction;
    c.measured["max_residual"] = max_residual;
    c.measured["residual_limit"] = kC3Residual;
    c.measured["match_tolerance"] = tol;
    c.measured["pooled_values"] = pooled;
    c.measured["spurious"] = spurious;
    c.passed = seeds_fully_matched == kC3Seeds && max_residual <= kC3Residual &&
               c.seconds <= kC3RuntimeLimit;
    return c;
}

// ---------------------------------------------------------------------------
// criteria 4 and 5: the movement sweep corpus
// ---------------------------------------------------------------------------

struct MovementCorpusSummary {
    long attempts = 0;
    long valid = 0;
    long unchanged_ok = 0;       // trials with at most one level leaving n-hat unchanged
    long monotone_ok = 0;        // trials with n-hat nonincreasing across every level
    long monotone_violations = 0;
    double mean_unchanged = 0.0;
    double max_recon_factored = 0.0;
    long recon_ok = 0;
    double max_movement_scale = 0.0;  // predicted rank-one spacing / eps_3
    std::map<std::string, long> invalid_reasons;
    double seconds = 0.0;
};

inline MovementCorpusSummary run_movement_corpus(long valid_target = kC4ValidTarget,
                                                 long max_attempts = kC4MaxAttempts) {
    detail::Stopwatch sw;
    MovementCorpusSummary sum;
    ExperimentConfig cfg;
    cfg.d = 1;
    cfg.sides = {kC4Volume};
    cfg.N = kC4N;
    cfg.gamma = kC4Gamma;
    cfg.L0 = kC4L0;
    cfg.kind = ScheduleKind::Geometric;
    cfg.ratio = 0.125;
    const LatticeGeometry g = config_geometry(cfg);
    const ScaleSchedule sched = config_schedule(cfg);
    const long center = g.volume() / 2;

    double unchanged_total = 0.0;
    for (long t = 0; t < max_attempts && sum.valid < valid_target; ++t) {
        ++sum.attempts;
        const std::uint64_t seed = mix_seed(kC4Seed, static_cast<std::uint64_t>(t));
        auto h = std::make_shared<const Hamiltonian>(
            build_hamiltonian(g, sample_disorder(g, cfg.N, seed), cfg.gamma));
        const MovementSetup setup = prepare_movement_trial(h, sched, center);
        if (!setup.ok) {
            ++sum.invalid_reasons[setup.note];
            continue;
        }
        const Block& b =
            setup.state.level(2).blocks[static_cast<std::size_t>(setup.block_index)];
        try {
            const MovementDecomposition m =
                movement_decomposition(setup.state, b, setup.E_next);
            const SweepReport sweep = sweep_vbar(setup.state, b, setup.E_next);
            ++sum.valid;
            unchanged_total += static_cast<double>(sweep.unchanged);
            if (sweep.unchanged <= 1) ++sum.unchanged_ok;
            if (sweep.monotone && sweep.valid_entries == cfg.N)
                ++sum.monotone_ok;
            else
                ++sum.monotone_violations;
            sum.max_recon_factored =
                std::max(sum.max_recon_factored, m.recon_residual_factored);
            if (m.recon_residual_factored <= kC5RelTol) ++sum.recon_ok;
            const double spacing_scale = cfg.gamma * cfg.gamma / (3.0 * cfg.N) *
                                         m.a_ybar_norm * m.a_ybar_norm / sched.eps(3);
            sum.max_movement_scale = std::max(sum.max_movement_scale, spacing_scale);
        } catch (const std::exception& ex) {
            ++sum.invalid_reasons[ex.what()];
        }
    }
    sum.mean_unchanged = sum.valid > 0 ? unchanged_total / static_cast<double>(sum.valid) : 0.0;
    sum.seconds = sw.seconds();
    return sum;
}

inline Json movement_summary_json(const MovementCorpusSummary& s) {
    Json j;
    j["attempts"] = s.attempts;
    j["valid"] = s.valid;
    j["unchanged_ok"] = s.unchanged_ok;
    j["unchanged_ok_fraction"] =
        s.valid > 0 ? static_cast<double>(s.unchanged_ok) / s.valid : 0.0;
    j["mean_unchanged_levels"] = s.mean_unchanged;
    j["monotone_ok"] = s.monotone_ok;
    j["monotone_violations"] = s.monotone_violations;
    j["max_recon_residual_factored"] = s.max_recon_factored;
    j["recon_ok"] = s.recon_ok;
    j["max_predicted_movement_over_window"] = s.max_movement_scale;
    Json reasons = Json::object();
    for (const auto& [k, v] : s.invalid_reasons) reasons[k] = v;
    j["invalid_reasons"] = std::move(reasons);
    return j;
}

inline std::vector<CheckResult> check_movement_criteria(
    long valid_target = kC4ValidTarget, long max_attempts = kC4MaxAttempts) {
    const MovementCorpusSummary s = run_movement_corpus(valid_target, max_attempts);
    const Json measured = movement_summary_json(s);

    CheckResult c4;
    c4.name = "criterion-04-movement-sweep";
    c4.description = "in >= 99% of valid trials at most one disorder level leaves n-hat "
                     "unchanged, and n-hat never increases";
    c4.regime = "pinned-corpus";
    c4.measured = measured;
    c4.seconds = s.seconds;
    const double frac_unchanged_ok =
        s.valid > 0 ? static_cast<double>(s.unchanged_ok) / s.valid : 0.0;
    c4.passed = s.valid >= valid_target && frac_unchanged_ok >= kC4RateFloor &&
                s.monotone_violations == 0 && s.seconds <= kC4RuntimeLimit;
    if (!c4.passed && s.valid > 0 && frac_unchanged_ok < kC4RateFloor)
        c4.notes = "window widths that double precision can resolve sit far above the "
                   "rank-one movement scale (see max_predicted_movement_over_window), so "
                   "every disorder level leaves the count unchanged";

    CheckResult c5;
    c5.name = "criterion-05-reconstruction";
    c5.description = "rank-one + constant + remainder reproduces the direct "
                     "f^{(k-1)}_lambda - f^{(k)}_E to relative 1e-10 in every valid trial";
    c5.regime = "pinned-corpus";
    c5.measured = measured;
    c5.seconds = 0.0;  // shares the criterion-4 corpus run
    c5.passed = s.valid >= 1 && s.recon_ok == s.valid;

    return {c4, c5};
}

// ---------------------------------------------------------------------------
// criteria 6 and 7: strict-regime decay rates and the influence lower bound
// ---------------------------------------------------------------------------

inline ExperimentConfig strict_corpus_config(double gamma, std::uint64_t seed, long trials) {
    ExperimentConfig cfg;
    cfg.d = 1;
    cfg.sides = {kC6Volume};
    cfg.N = kC6N;
    cfg.gamma = gamma;
    cfg.L0 = 1;
    cfg.kind = ScheduleKind::Geometric;
    cfg.ratio = 0.125;
    cfg.trials = trials;
    cfg.base_seed = seed;
    cfg.with_blocks = true;
    cfg.with_strict = true;
    return cfg;
}

inline Json strict_rates_json(const EnsembleReport& rep) {
    const StrictRates& s = rep.strict;
    Json j;
    j["trials_done"] = rep.trials_done;
    j["g_pairs"] = s.g_pairs;
    j["g_pass"] = s.g_pass;
    j["g_rate"] = s.g_pairs > 0 ? static_cast<double>(s.g_pass) / s.g_pairs : 1.0;
    j["g_untestable"] = s.g_untestable;
    j["worst_g_excess"] = s.worst_g_excess;
    j["lip_total"] = s.lip_total;
    j["lip_pass"] = s.lip_pass;
    j["lip_rate"] = s.lip_total > 0 ? static_cast<double>(s.lip_pass) / s.lip_total : 1.0;
    j["worst_lip_ratio"] = s.worst_lip_ratio;
    j["trunc_total"] = s.trunc_total;
    j["trunc_pass"] = s.trunc_pass;
    j["trunc_rate"] =
        s.trunc_total > 0 ? static_cast<double>(s.trunc_pass) / s.trunc_total : 1.0;
    j["worst_trunc_ratio"] = s.worst_trunc_ratio;
    j["infl_total"] = s.infl_total;
    j["infl_pass"] = s.infl_pass;
    j["min_infl_margin"] = finite_or_null(s.min_infl_margin);
    j["skipped_near_singular"] = s.skipped_near_singular;
    return j;
}

inline std::vector<CheckResult> check_strict_decay_criteria() {
    detail::Stopwatch sw;
    const EnsembleReport rep =
        run_ensemble(strict_corpus_config(kC6Gamma, kC6Seed, kC6Trials));
    const double elapsed = sw.seconds();
    const StrictRates& s = rep.strict;
    const Json measured = strict_rates_json(rep);

    CheckResult c6;
    c6.name = "criterion-06-strict-decay";
    c6.description = "kernel decay |G(x,y)| <= gamma^{.85|x-y|} on all pairs, localized "
                     "Lipschitz rate >= 99%, truncation below the next window >= 99%";
    c6.regime = "pinned-corpus";
    c6.measured = measured;
    c6.seconds = elapsed;
    const double lip_rate =
        s.lip_total > 0 ? static_cast<double>(s.lip_pass) / s.lip_total : 0.0;
    const double trunc_rate =
        s.trunc_total > 0 ? static_cast<double>(s.trunc_pass) / s.trunc_total : 0.0;
    c6.passed = s.g_pairs > 0 && s.g_pass == s.g_pairs && lip_rate >= kC6RateFloor &&
                trunc_rate >= kC6RateFloor && elapsed <= kC6RuntimeLimit;
    if (s.g_pass != s.g_pairs)
        c6.notes = "distance-1 kernel entries scale like gamma/|v - lambda|, which exceeds "
                   "gamma^{0.85} whenever the neighboring level sits within gamma^{0.15} of "
                   "the probe energy; at this gamma that is a typical event, not a tail one";

    CheckResult c7;
    c7.name = "criterion-07-influence-bound";
    c7.description = "every valid isolated-resonant trial has max_y I_psi(y) >= "
                     "gamma^{3.1 L_{k-1}}";
    c7.regime = "pinned-corpus";
    c7.measured = measured;
    c7.seconds = 0.0;  // shares the criterion-6 corpus run
    c7.passed = s.infl_total >= 1 && s.infl_pass == s.infl_total;

    // the same measurements in a genuinely strict sub-regime, for the record:
    // gamma^{0.15} ~ 2e-3 < level spacing, so the distance-1 obstruction is gone
    detail::Stopwatch sw2;
    const EnsembleReport deep =
        run_ensemble(strict_corpus_config(kC6DeepGamma, kC6Seed, kC6Trials / 4));
    CheckResult cd;
    cd.name = "report-strict-decay-deep";
    cd.description = "criterion-6 measurements rerun at gamma = 1e-18, where the decay "
                     "bounds hold with room to spare";
    cd.regime = "report-only";
    cd.gated = false;
    cd.measured = strict_rates_json(deep);
    cd.seconds = sw2.seconds();
    cd.passed = deep.strict.g_pairs > 0 && deep.strict.g_pass == deep.strict.g_pairs &&
                deep.strict.lip_pass == deep.strict.lip_total &&
                deep.strict.trunc_pass == deep.strict.trunc_total;

    return {c6, c7, cd};
}

// ---------------------------------------------------------------------------
// criterion 8: spacing trend across disorder resolutions
// ---------------------------------------------------------------------------

inline CheckResult check_spacing_trend() {
    detail::Stopwatch sw;
    CheckResult c;
    c.name = "criterion-08-spacing-trend";
    c.description = "P(min spacing < 1e-6) strictly smaller for N=64 than N=2, and "
                    "non-decreasing in delta for each N";
    c.regime = "pinned-corpus";
    ExperimentConfig cfg;
    cfg.d = 1;
    cfg.sides = {kC8Volume};
    cfg.gamma = kC8Gamma;
    cfg.trials = kC8Trials;
    cfg.base_seed = kC8Seed;
    cfg.spacing_deltas = {1e-8, 1e-6, 1e-4};
    const std::vector<SpacingRow> rows = spacing_vs_N(cfg, {2, 64});
    c.seconds = sw.seconds();

    Json table = Json::array();
    bool monotone = true;
    for (const auto& row : rows) {
        Json rj;
        rj["N"] = row.N;
        rj["trials"] = row.trials;
        Json pb = Json::array();
        for (std::size_t i = 0; i < row.p_below.size(); ++i) {
            pb.push_back(Json{{"delta", row.p_below[i].first},
                              {"p_below", row.p_below[i].second}});
            if (i > 0 && row.p_below[i].second < row.p_below[i - 1].second) monotone = false;
        }
        rj["p_below"] = std::move(pb);
        table.push_back(std::move(rj));
    }
    c.measured["table"] = std::move(table);
    c.measured["monotone_in_delta"] = monotone;
    const double p2 = rows[0].p_below[1].second;   // N=2,  delta = 1e-6
    const double p64 = rows[1].p_below[1].second;  // N=64, delta = 1e-6
    c.measured["p_N2_delta1e6"] = p2;
    c.measured["p_N64_delta1e6"] = p64;
    c.passed = p64 < p2 && monotone && c.seconds <= kC8RuntimeLimit;
    return c;
}

// ---------------------------------------------------------------------------
// criterion 9: correlator decay and exceedance
// ---------------------------------------------------------------------------

inline CheckResult check_correlator_decay() {
    detail::Stopwatch sw;
    CheckResult c;
    c.name = "criterion-09-correlator";
    c.description = "median correlator at distance 10 below gamma^2; X(x,y) > 1 on at "
                    "most 1% of pairs with |x-y| >= 8";
    c.regime = "pinned-corpus";
    ExperimentConfig cfg;
    cfg.d = 1;
    cfg.sides = {kC9Volume};
    cfg.N = kC9N;
    cfg.gamma = kC9Gamma;
    cfg.trials = kC9Trials;
    cfg.base_seed = kC9Seed;
    cfg.with_correlator = true;
    cfg.correlator_distances = {kC9Distance};
    cfg.exceedance_min_distance = kC9MinDistance;
    const EnsembleReport rep = run_ensemble(cfg);
    c.seconds = sw.seconds();

    std::vector<double> center = rep.correlator.at(0).center_pair;
    std::sort(center.begin(), center.end());
    const double median =
        center.empty()
            ? 0.0
            : (center.size() % 2 == 1
                   ? center[center.size() / 2]
                   : 0.5 * (center[center.size() / 2 - 1] + center[center.size() / 2]));
    const double exceed_rate =
        rep.exceed_pairs > 0 ? static_cast<double>(rep.exceed_hits) / rep.exceed_pairs : 0.0;
    c.measured["trials"] = rep.trials_done;
    c.measured["median_distance10"] = median;
    c.measured["median_bound"] = kC9Gamma * kC9Gamma;
    c.measured["mean_distance10"] = rep.correlator.at(0).sum.mean;
    c.measured["exceed_pairs"] = rep.exceed_pairs;
    c.measured["exceed_hits"] = rep.exceed_hits;
    c.measured["exceed_rate"] = exceed_rate;
    c.passed = rep.trials_done == kC9Trials && median <= kC9Gamma * kC9Gamma &&
               exceed_rate <= kC9ExceedMax;
    return c;
}

// ---------------------------------------------------------------------------
// criterion 10: determinism and golden fixtures
// ---------------------------------------------------------------------------

struct GoldenCase {
    std::string name;
    std::function<std::string()> render;
};

// one small deterministic report per subcommand
inline std::vector<GoldenCase> golden_cases() {
    std::vector<GoldenCase> cases;
    cases.push_back({"sample-1d16", [] {
                         ExperimentConfig cfg;
                         cfg.d = 1;
                         cfg.sides = {16};
                         cfg.N = 8;
                         cfg.gamma = 0.05;
                         cfg.base_seed = 11;
                         return render_sample_report(cfg, true);
                     }});
    cases.push_back({"decompose-1d32", [] {
                         ExperimentConfig cfg;
                         cfg.d = 1;
                         cfg.sides = {32};
                         cfg.N = 16;
                         cfg.gamma = 0.02;
                         cfg.base_seed = 22;
                         return render_decompose_report(cfg, -1, std::nullopt);
                     }});
    cases.push_back({"efp-1d32", [] {
                         ExperimentConfig cfg;
                         cfg.d = 1;
                         cfg.sides = {32};
                         cfg.N = 16;
                         cfg.gamma = 0.02;
                         cfg.base_seed = 33;
                         return render_efp_report(cfg, 16, false);
                     }});
    cases.push_back({"sweep-1d48", [] {
                         ExperimentConfig cfg;
                         cfg.d = 1;
                         cfg.sides = {48};
                         cfg.N = 64;
                         cfg.gamma = 1e-3;
                         cfg.base_seed = 44;
                         return render_sweep_report(cfg, -1);
                     }});
    cases.push_back({"stats-1d32", [] {
                         ExperimentConfig cfg;
                         cfg.d = 1;
                         cfg.sides = {32};
                         cfg.N = 16;
                         cfg.gamma = 0.02;
                         cfg.base_seed = 55;
                         cfg.trials = 3;
                         cfg.with_dos = true;
                         cfg.energies = {0.52};
                         cfg.deltas = {0.05, 0.1};
                         cfg.with_correlator = true;
                         cfg.correlator_distances = {4, 8};
                         cfg.with_spacing = true;
                         cfg.spacing_deltas = {1e-4, 1e-2};
                         cfg.with_blocks = true;
                         return render_stats_report(cfg);
                     }});
    return cases;
}

inline AcceptanceSuite oracle_equivalence_suite(int seed_count);

// rerun every renderer twice inside one process: byte-identical output
inline CheckResult check_rerun_determinism() {
    detail::Stopwatch sw;
    CheckResult c;
    c.name = "criterion-10-determinism";
    c.description = "every subcommand report is byte-identical when rerun with the same "
                    "config and seed";
    c.regime = "property";
    long mismatched = 0;
    Json digests = Json::object();
    for (const auto& gc : golden_cases()) {
        const std::string a = gc.render();
        const std::string b = gc.render();
        if (a != b) ++mismatched;
        digests[gc.name] = digest_hex(a);
    }
    // the verify report itself carries no wall clock, so it must rerun stable too
    {
        const std::string a = render_verify_report(oracle_equivalence_suite(15));
        const std::string b = render_verify_report(oracle_equivalence_suite(15));
        if (a != b) ++mismatched;
        digests["verify-oracle-15"] = digest_hex(a);
    }
    c.seconds = sw.seconds();
    c.measured["cases"] = static_cast<long>(golden_cases().size()) + 1;
    c.measured["mismatched"] = mismatched;
    c.measured["digests"] = std::move(digests);
    c.passed = mismatched == 0;
    return c;
}

// compare against the committed digest file (fixtures/golden.json)
inline CheckResult golden_regression(const std::string& fixture_path) {
    detail::Stopwatch sw;
    CheckResult c;
    c.name = "criterion-10-golden";
    c.description = "report digests match the committed golden fixtures";
    c.regime = "property";
    Json expected;
    try {
        expected = Json::parse(read_text_file(fixture_path));
    } catch (const std::exception& ex) {
        c.seconds = sw.seconds();
        c.notes = std::string("cannot load fixtures: ") + ex.what();
        c.passed = false;
        return c;
    }
    long mismatched = 0, missing = 0;
    Json detail = Json::object();
    for (const auto& gc : golden_cases()) {
        const std::string got = digest_hex(gc.render());
        if (!expected.contains(gc.name)) {
            ++missing;
            detail[gc.name] = Json{{"got", got}, {"expected", nullptr}};
            continue;
        }
        const std::string want = expected[gc.name].get<std::string>();
        if (got != want) ++mismatched;
        detail[gc.name] = Json{{"got", got}, {"expected", want}, {"match", got == want}};
    }
    c.seconds = sw.seconds();
    c.measured["fixtures"] = detail;
    c.measured["mismatched"] = mismatched;
    c.measured["missing"] = missing;
    c.passed = mismatched == 0 && missing == 0;
    return c;
}

inline std::string render_golden_file() {
    Json j = Json::object();
    for (const auto& gc : golden_cases()) j[gc.name] = digest_hex(gc.render());
    return render_json(j);
}

// ---------------------------------------------------------------------------
// spec-level suites
// ---------------------------------------------------------------------------

inline AcceptanceSuite oracle_equivalence_suite(int seed_count = kC1Matrices) {
    AcceptanceSuite suite;
    suite.checks.push_back(check_schur_window_equivalence(seed_count));
    suite.checks.push_back(check_lipschitz_bound(seed_count));
    return suite;
}

// tiny strict-leaning configurations; report-only rates plus a gated gamma=0
// control where every difference is identically zero
inline AcceptanceSuite strict_regime_microtests() {
    AcceptanceSuite suite;
    for (int N : {64, 128})
        for (double gamma : {1e-3, 1e-4})
            for (int L0 : {1, 2}) {
                ExperimentConfig cfg;
                cfg.d = 1;
                cfg.sides = {32};
                cfg.N = N;
                cfg.gamma = gamma;
                cfg.L0 = L0;
                cfg.trials = 5;
                cfg.base_seed = 7000 + N + L0;
                cfg.with_blocks = true;
                cfg.with_strict = true;
                detail::Stopwatch sw;
                const EnsembleReport rep = run_ensemble(cfg);
                CheckResult c;
                c.name = "microtest-N" + std::to_string(N) + "-g" + Json(gamma).dump() +
                         "-L" + std::to_string(L0);
                c.description = "strict-regime bound satisfaction rates, 5 trials";
                c.regime = "report-only";
                c.gated = false;
                c.measured = strict_rates_json(rep);
                c.seconds = sw.seconds();
                const StrictRates& s = rep.strict;
                c.passed = s.g_pass == s.g_pairs && s.lip_pass == s.lip_total;
                suite.checks.push_back(std::move(c));
            }
    {
        ExperimentConfig cfg;
        cfg.d = 1;
        cfg.sides = {32};
        cfg.N = 16;
        cfg.gamma = 0.0;
        cfg.trials = 3;
        cfg.base_seed = 7999;
        cfg.with_blocks = true;
        cfg.with_strict = true;
        detail::Stopwatch sw;
        const EnsembleReport rep = run_ensemble(cfg);
        CheckResult c;
        c.name = "microtest-zero-coupling";
        c.description = "gamma = 0 control: every localized difference is identically zero";
        c.regime = "property";
        c.measured = strict_rates_json(rep);
        c.seconds = sw.seconds();
        const StrictRates& s = rep.strict;
        c.passed = s.lip_total > 0 && s.lip_pass == s.lip_total && s.g_pass == s.g_pairs &&
                   s.worst_lip_ratio == 0.0;
        suite.checks.push_back(std::move(c));
    }
    return suite;
}

// the full acceptance gate: all ten criteria in order. A producer bundles the
// checks that share one corpus run, so --filter can skip whole corpora.
struct CheckProducer {
    std::vector<std::string> names;
    std::function<std::vector<CheckResult>(const std::string&)> run;
};

inline std::vector<CheckProducer> acceptance_producers() {
    std::vector<CheckProducer> out;
    out.push_back({{"criterion-01-schur-window"},
                   [](const std::string&) {
                       return std::vector<CheckResult>{check_schur_window_equivalence()};
                   }});
    out.push_back({{"criterion-02-lipschitz"},
                   [](const std::string&) {
                       return std::vector<CheckResult>{check_lipschitz_bound()};
                   }});
    out.push_back({{"criterion-03-efp-completeness"},
                   [](const std::string&) {
                       return std::vector<CheckResult>{check_efp_completeness()};
                   }});
    out.push_back({{"criterion-04-movement-sweep", "criterion-05-reconstruction"},
                   [](const std::string&) { return check_movement_criteria(); }});
    out.push_back({{"criterion-06-strict-decay", "criterion-07-influence-bound",
                    "report-strict-decay-deep"},
                   [](const std::string&) { return check_strict_decay_criteria(); }});
    out.push_back({{"criterion-08-spacing-trend"},
                   [](const std::string&) {
                       return std::vector<CheckResult>{check_spacing_trend()};
                   }});
    out.push_back({{"criterion-09-correlator"},
                   [](const std::string&) {
                       return std::vector<CheckResult>{check_correlator_decay()};
                   }});
    out.push_back({{"criterion-10-determinism"},
                   [](const std::string&) {
                       return std::vector<CheckResult>{check_rerun_determinism()};
                   }});
    out.push_back({{"criterion-10-golden"},
                   [](const std::string& fixtures) {
                       return std::vector<CheckResult>{golden_regression(fixtures)};
                   }});
    return out;
}

inline AcceptanceSuite run_acceptance(const std::string& fixture_path,
                                      const std::string& filter = "") {
    AcceptanceSuite suite;
    for (const auto& p : acceptance_producers()) {
        bool wanted = filter.empty();
        for (const auto& n : p.names)
            if (!filter.empty() && n.find(filter) != std::string::npos) wanted = true;
        if (!wanted) continue;
        for (auto& c : p.run(fixture_path)) suite.checks.push_back(std::move(c));
    }
    return suite;
}

}  // namespace anderson

#include <catch2/catch_amalgamated.hpp>

#include <anderson/eigenflow.hpp>
#include <anderson/observables.hpp>
#include <anderson/reports.hpp>
#include <anderson/verify.hpp>

#include <algorithm>
#include <cmath>

using namespace anderson;

namespace {

ScaleSchedule small_schedule(const LatticeGeometry& g, int N, double gamma) {
    ScheduleParams p;
    p.gamma = gamma;
    p.N = N;
    p.L0 = 1;
    p.kind = ScheduleKind::Geometric;
    p.ratio = 0.125;
    p.diameter = g.diameter();
    return make_schedule(p);
}

}  // namespace

TEST_CASE("energy snapping lands on the half-window grid, ties go down", "[eigenflow]") {
    REQUIRE(snap_energy(0.0015, 0.002) == Catch::Approx(0.001).margin(1e-15));
    REQUIRE(snap_energy(0.5012, 0.002) == Catch::Approx(0.501).margin(1e-12));
    REQUIRE(snap_energy(0.30049, 0.002) == Catch::Approx(0.3).margin(1e-12));
    REQUIRE(snap_energy(-0.0015, 0.002) == Catch::Approx(-0.002).margin(1e-15));
    REQUIRE_THROWS_AS(snap_energy(0.1, 0.0), std::invalid_argument);
}

TEST_CASE("snapped energies stay within half a grid step", "[eigenflow]") {
    SplitMix64 rng(31);
    for (int t = 0; t < 200; ++t) {
        const double eps = std::pow(10.0, -1.0 - 6.0 * rng.next_unit());
        const double x = 2.0 * rng.next_unit() - 0.5;
        const double s = snap_energy(x, eps);
        REQUIRE(std::abs(s - x) <= 0.25 * eps + 1e-18);
        REQUIRE(std::abs(std::remainder(s, 0.5 * eps)) < 1e-12 * std::max(1.0, std::abs(s)));
    }
}

TEST_CASE("zero coupling EFP returns the bare level exactly", "[eigenflow]") {
    const LatticeGeometry g = build_geometry(1, {8});
    const DisorderRealization dis = sample_disorder(g, 4, 17);
    const Hamiltonian h = build_hamiltonian(g, dis, 0.0);
    const ScaleSchedule sched = small_schedule(g, 4, 0.0);
    const EfpResult r = efp_run(h, sched, 3);
    REQUIRE(!r.eigenpairs.empty());
    for (const auto& p : r.eigenpairs) {
        REQUIRE(p.eigenvalue == Catch::Approx(h.diagonal(3)).margin(1e-14));
        REQUIRE(p.residual <= 1e-13);
    }
}

TEST_CASE("EFP terminal values are genuine eigenvalues", "[eigenflow]") {
    const LatticeGeometry g = build_geometry(1, {24});
    const ScaleSchedule sched = small_schedule(g, 8, 0.02);
    const Hamiltonian h = build_hamiltonian(g, sample_disorder(g, 8, 29), 0.02);
    const Spectrum oracle = dense_spectrum(h.matrix);
    const EfpResult r = efp_run(h, sched, 12);
    for (const auto& p : r.eigenpairs) {
        REQUIRE(p.residual <= 1e-9);
        double best = 1e9;
        for (long i = 0; i < oracle.values.size(); ++i)
            best = std::min(best, std::abs(oracle.values(i) - p.eigenvalue));
        REQUIRE(best <= 1e-9);
    }
}

TEST_CASE("completeness holds on small lattices", "[eigenflow]") {
    const LatticeGeometry g = build_geometry(1, {16});
    const ScaleSchedule sched = small_schedule(g, 8, 0.02);
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        const Hamiltonian h = build_hamiltonian(g, sample_disorder(g, 8, seed), 0.02);
        const CompletenessReport rep = completeness_check(h, sched);
        REQUIRE(rep.total == g.volume());
        REQUIRE(rep.matched_fraction == 1.0);
        REQUIRE(rep.max_residual <= 1e-8);
        REQUIRE(rep.spurious.empty());
    }
}

TEST_CASE("DOS observable saturates and respects zero coupling", "[observables]") {
    const LatticeGeometry g = build_geometry(1, {12});
    const Hamiltonian h0 = build_hamiltonian(g, sample_disorder(g, 4, 3), 0.0);
    const Spectrum s0 = dense_spectrum(h0.matrix);

    REQUIRE(dos_observable(s0, 0.5, 2.0) == g.volume());
    for (double delta : {0.05, 0.2}) {
        long brute = 0;
        for (long x = 0; x < g.volume(); ++x)
            if (std::abs(h0.disorder.value(x) - 0.5) <= delta) ++brute;
        REQUIRE(dos_observable(s0, 0.5, delta) == brute);
    }
    REQUIRE_THROWS_AS(dos_observable(s0, 0.5, -0.1), std::invalid_argument);
}

TEST_CASE("correlator at coinciding points is the pure overlap", "[observables]") {
    const LatticeGeometry g = build_geometry(1, {10});
    const Hamiltonian h = build_hamiltonian(g, sample_disorder(g, 8, 5), 0.04);
    const Spectrum s = dense_spectrum(h.matrix);
    const CorrelatorValue c = correlator_observable(s, g, 4, 4, 0.04);
    REQUIRE(c.distance == 0);
    REQUIRE(c.sum == Catch::Approx(1.0).epsilon(1e-12));
    REQUIRE(c.X == Catch::Approx(1.0).epsilon(1e-12));

    const CorrelatorValue far = correlator_observable(s, g, 1, 8, 0.04);
    REQUIRE(far.distance == 7);
    REQUIRE(far.X == Catch::Approx(far.sum * std::pow(0.04, -7.0 / 5.0)).epsilon(1e-12));
    REQUIRE_THROWS_AS(correlator_observable(s, g, -1, 3, 0.04), std::invalid_argument);
}

TEST_CASE("minimal spacing collapses by pigeonhole at two levels", "[observables]") {
    const LatticeGeometry g = build_geometry(1, {4});
    const Hamiltonian h = build_hamiltonian(g, sample_disorder(g, 2, 8), 0.0);
    const Spectrum s = dense_spectrum(h.matrix);
    REQUIRE(min_spacing_observable(s) == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("ensemble reports are deterministic and additive", "[ensemble]") {
    ExperimentConfig cfg;
    cfg.d = 1;
    cfg.sides = {20};
    cfg.N = 8;
    cfg.gamma = 0.02;
    cfg.trials = 4;
    cfg.base_seed = 121;
    cfg.with_dos = true;
    cfg.energies = {0.5};
    cfg.deltas = {0.05, 0.1};
    cfg.with_spacing = true;
    cfg.spacing_deltas = {1e-6, 1e-3, 1e-1};
    cfg.with_blocks = true;
    validate_experiment_config(cfg);

    const EnsembleReport a = run_ensemble(cfg);
    const EnsembleReport b = run_ensemble(cfg);
    REQUIRE(render_json(ensemble_to_json(a)) == render_json(ensemble_to_json(b)));
    REQUIRE(a.trials_done == 4);
    REQUIRE(a.failures.empty());
    REQUIRE(a.dos_additivity_ok);

    // DOS counts grow with the window
    REQUIRE(a.dos[0].count.mean <= a.dos[1].count.mean);
    // spacing tail probabilities grow with delta
    REQUIRE(a.spacing.per_trial.size() == 4);
    for (std::size_t i = 1; i < a.spacing.p_below.size(); ++i)
        REQUIRE(a.spacing.p_below[i - 1].second <= a.spacing.p_below[i].second);
    // resonant fraction shrinks with the scale
    for (std::size_t i = 1; i < a.blocks.size(); ++i)
        REQUIRE(a.blocks[i].r_fraction.mean <= a.blocks[i - 1].r_fraction.mean + 1e-12);
}

TEST_CASE("trial seeds are decorrelated by the mix", "[ensemble]") {
    REQUIRE(mix_seed(0, 0) != mix_seed(0, 1));
    REQUIRE(mix_seed(0, 0) != mix_seed(1, 0));
    const LatticeGeometry g = build_geometry(1, {32});
    const DisorderRealization a = sample_disorder(g, 16, mix_seed(5, 0));
    const DisorderRealization b = sample_disorder(g, 16, mix_seed(5, 1));
    REQUIRE(a.levels != b.levels);
}

TEST_CASE("EFP crosscheck agrees with the oracle on a small ensemble", "[ensemble]") {
    ExperimentConfig cfg;
    cfg.d = 1;
    cfg.sides = {16};
    cfg.N = 16;
    cfg.gamma = 0.02;
    cfg.trials = 2;
    cfg.base_seed = 55;
    cfg.with_correlator = true;
    cfg.correlator_distances = {3};
    cfg.with_efp_crosscheck = true;
    validate_experiment_config(cfg);
    const EnsembleReport rep = run_ensemble(cfg);
    REQUIRE(rep.failures.empty());
    REQUIRE(rep.correlator.at(0).crosscheck_diff.n == 2 * (16 - 3));
    REQUIRE(rep.correlator.at(0).crosscheck_diff.mean <= 1e-6);
}

TEST_CASE("spacing comparison uses common random numbers", "[ensemble]") {
    ExperimentConfig base;
    base.d = 1;
    base.sides = {12};
    base.gamma = 1e-3;
    base.trials = 25;
    base.base_seed = 31;
    base.spacing_deltas = {1e-6, 1e-2};
    const auto rows = spacing_vs_N(base, {2, 16});
    REQUIRE(rows.size() == 2);
    REQUIRE(rows[0].N == 2);
    REQUIRE(rows[1].N == 16);
    for (const auto& r : rows) {
        REQUIRE(r.trials == 25);
        REQUIRE(r.p_below.size() == 2);
        REQUIRE(r.p_below[0].second <= r.p_below[1].second);
    }
}

TEST_CASE("csv tables carry the documented headers", "[reports]") {
    ExperimentConfig cfg;
    cfg.d = 1;
    cfg.sides = {12};
    cfg.N = 8;
    cfg.gamma = 0.02;
    cfg.trials = 2;
    cfg.base_seed = 9;
    cfg.with_dos = true;
    cfg.energies = {0.5};
    cfg.deltas = {0.1};
    cfg.with_correlator = true;
    cfg.correlator_distances = {2};
    cfg.with_spacing = true;
    cfg.spacing_deltas = {1e-3};
    cfg.with_blocks = true;
    const EnsembleReport rep = run_ensemble(cfg);
    REQUIRE(csv_dos(rep).rfind("energy,delta,mean,stderr,trials\n", 0) == 0);
    REQUIRE(csv_correlator(rep).rfind("distance,mean,stderr,pairs,exceed\n", 0) == 0);
    REQUIRE(csv_spacing(rep).rfind("delta,p_below,trials\n", 0) == 0);
    REQUIRE(csv_blocks(rep).rfind(
                "k,r_fraction_mean,r_fraction_stderr,blocks_seen,isolated_seen,trials\n",
                0) == 0);
}

TEST_CASE("subcommand renderers are pure functions of the config", "[reports]") {
    ExperimentConfig cfg;
    cfg.d = 2;
    cfg.sides = {5, 5};
    cfg.N = 8;
    cfg.gamma = 0.03;
    cfg.base_seed = 77;
    REQUIRE(render_sample_report(cfg, true) == render_sample_report(cfg, true));
    REQUIRE(render_decompose_report(cfg, -1, std::nullopt) ==
            render_decompose_report(cfg, -1, std::nullopt));
    REQUIRE(render_efp_report(cfg, 12, false) == render_efp_report(cfg, 12, false));
}

TEST_CASE("json helpers freeze the hash and hide non-finite values", "[reports]") {
    REQUIRE(digest_hex("") == "cbf29ce484222325");
    REQUIRE(digest_hex("a") == "af63dc4c8601ec8c");
    REQUIRE(finite_or_null(1.5) == Json(1.5));
    REQUIRE(finite_or_null(std::numeric_limits<double>::infinity()).is_null());
    REQUIRE(finite_or_null(std::nan("")).is_null());
}

TEST_CASE("validation refuses unusable windows", "[reports]") {
    ExperimentConfig cfg;
    cfg.d = 1;
    cfg.sides = {16};
    cfg.N = 8;
    cfg.gamma = 0.02;
    cfg.with_dos = true;
    cfg.energies = {0.5};
    cfg.deltas = {2.0};  // wider than the unit interval
    REQUIRE_THROWS_AS(validate_experiment_config(cfg), std::invalid_argument);
    cfg.deltas = {-0.1};
    REQUIRE_THROWS_AS(validate_experiment_config(cfg), std::invalid_argument);
    cfg.deltas = {0.1};
    cfg.correlator_distances = {40};  // beyond the first axis
    cfg.with_correlator = true;
    REQUIRE_THROWS_AS(validate_experiment_config(cfg), std::invalid_argument);
}

TEST_CASE("oracle equivalence microsuite passes end to end", "[verify]") {
    const AcceptanceSuite suite = oracle_equivalence_suite(15);
    REQUIRE(suite.checks.size() == 2);
    for (const auto& c : suite.checks) {
        INFO(c.name << " measured " << c.measured.dump());
        REQUIRE(c.passed);
    }
}

#include <catch2/catch_amalgamated.hpp>

#include <anderson/ensemble.hpp>
#include <anderson/influence.hpp>
#include <anderson/multiscale.hpp>

#include <algorithm>
#include <cmath>
#include <memory>
#include <set>

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

std::shared_ptr<const Hamiltonian> make_h(const LatticeGeometry& g, int N, double gamma,
                                          std::uint64_t seed) {
    return std::make_shared<const Hamiltonian>(
        build_hamiltonian(g, sample_disorder(g, N, seed), gamma));
}

}  // namespace

TEST_CASE("step-one resonant set matches the definition", "[multiscale]") {
    const LatticeGeometry g = build_geometry(1, {32});
    auto h = make_h(g, 8, 0.02, 5);
    const ScaleSchedule sched = small_schedule(g, 8, 0.02);
    const double E1 = h->diagonal(16);
    const MultiscaleState st = init_cascade(h, sched, E1);

    std::vector<long> expect;
    for (long x = 0; x < g.volume(); ++x)
        if (std::abs(h->diagonal(x) - E1) <= sched.eps(1)) expect.push_back(x);
    REQUIRE(st.level(1).resonant_sites == expect);

    // blocks partition the resonant set, collars contain their blocks
    std::vector<long> covered;
    for (const auto& b : st.level(1).blocks) {
        long diam = 0;
        for (long a : b.sites)
            for (long c : b.sites) diam = std::max(diam, g.l1_distance(a, c));
        REQUIRE(diam == b.diameter);
        REQUIRE(b.isolated == (static_cast<double>(diam) <= sched.L(1)));
        for (long s : b.sites) {
            covered.push_back(s);
            REQUIRE(std::find(b.collar.begin(), b.collar.end(), s) != b.collar.end());
        }
    }
    std::sort(covered.begin(), covered.end());
    REQUIRE(covered == expect);
}

TEST_CASE("cascade keeps resonant sets nested and shifts within budget", "[multiscale]") {
    const LatticeGeometry g = build_geometry(1, {48});
    const ScaleSchedule sched = small_schedule(g, 16, 0.02);
    long recorded_counts = 0;
    for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull}) {
        auto h = make_h(g, 16, 0.02, seed);
        const MultiscaleState st = run_center_cascade(h, sched, 24);
        for (int k = 2; k <= st.scale(); ++k) {
            REQUIRE(std::abs(st.level(k).energy - st.level(k - 1).energy) <=
                    sched.eps(k - 1) / 3.0 + 1e-15);
            std::set<long> prev;
            for (const auto& b : st.level(k - 1).blocks)
                prev.insert(b.sites.begin(), b.sites.end());
            for (long s : st.level(k).resonant_sites) REQUIRE(prev.count(s) == 1);
        }
        for (int k = 1; k <= st.scale(); ++k)
            for (const auto& b : st.level(k).blocks) {
                REQUIRE(b.n_hat >= -1);  // -1 marks "not recorded" or a refused inversion
                if (b.n_hat >= 1) ++recorded_counts;
            }
    }
    REQUIRE(recorded_counts >= 1);  // the followed center block keeps its count
}

TEST_CASE("energy shifts beyond the budget are refused", "[multiscale]") {
    const LatticeGeometry g = build_geometry(1, {32});
    auto h = make_h(g, 8, 0.02, 7);
    const ScaleSchedule sched = small_schedule(g, 8, 0.02);
    const double E1 = h->diagonal(16);
    MultiscaleState st = init_cascade(h, sched, E1);
    // first step allows the hybridization reach eps_1 + 4*d*gamma (plus snap)
    const double wide = sched.eps(1) + 4.0 * 0.02 + sched.eps(2) / 4.0;
    REQUIRE(shift_budget(st, 1) == wide);
    REQUIRE_THROWS_AS(advance_scale(st, E1 + 2.0 * wide), std::invalid_argument);

    // from scale 2 on the budget is eps_k/3 again
    advance_scale(st, E1);
    REQUIRE(shift_budget(st, 2) == sched.eps(2) / 3.0);
    REQUIRE_THROWS_AS(advance_scale(st, E1 + sched.eps(2)), std::invalid_argument);
}

TEST_CASE("zero coupling cascade resonates exactly on equal levels", "[multiscale]") {
    const LatticeGeometry g = build_geometry(1, {16});
    auto h = make_h(g, 4, 0.0, 9);
    const ScaleSchedule sched = small_schedule(g, 4, 0.0);
    const double E1 = h->diagonal(8);
    const MultiscaleState st = init_cascade(h, sched, E1);
    for (long x = 0; x < g.volume(); ++x) {
        const bool resonant =
            std::find(st.level(1).resonant_sites.begin(), st.level(1).resonant_sites.end(),
                      x) != st.level(1).resonant_sites.end();
        REQUIRE(resonant == (h->disorder.levels[x] == h->disorder.levels[8]));
    }
}

TEST_CASE("truncation report uses the frozen exponent", "[multiscale]") {
    const LatticeGeometry g = build_geometry(1, {32});
    const double gamma = 0.02;
    auto h = make_h(g, 8, gamma, 12);
    const ScaleSchedule sched = small_schedule(g, 8, gamma);
    const MultiscaleState st = run_center_cascade(h, sched, 16);
    const int k = 1;
    const TruncationReport tr = truncation_report(st, k, st.level(1).energy);
    REQUIRE(tr.bound == Catch::Approx(std::pow(gamma, 3.3 * sched.L(k))).epsilon(1e-12));
    REQUIRE(tr.norm >= 0.0);
    if (tr.defined) REQUIRE(tr.window_next == Catch::Approx(sched.eps(k + 1)));
}

TEST_CASE("localized Lipschitz sample carries the exact bound", "[multiscale]") {
    const LatticeGeometry g = build_geometry(1, {32});
    const double gamma = 0.02;
    auto h = make_h(g, 8, gamma, 15);
    const ScaleSchedule sched = small_schedule(g, 8, gamma);
    const double E1 = h->diagonal(16);
    const MultiscaleState st = init_cascade(h, sched, E1);
    for (const auto& b : st.level(1).blocks) {
        if (!b.isolated || b.collar_is_lattice) continue;
        const double lambda = E1 + sched.eps(1) / 3.0;
        const double E = E1 - sched.eps(1) / 3.0;
        try {
            const LipschitzSample ls = localized_lipschitz(st, b, lambda, E);
            REQUIRE(ls.bound == Catch::Approx(gamma * std::abs(lambda - E)).epsilon(1e-14));
            REQUIRE(ls.norm >= 0.0);
        } catch (const NearSingularElimination&) {
            // acceptable: the probe energy collided with a collar level
        }
    }
}

TEST_CASE("influence profile equals its boundary definition", "[influence]") {
    const LatticeGeometry g = build_geometry(1, {33});
    const double gamma = 0.05;
    auto h = make_h(g, 8, gamma, 3);
    const ScaleSchedule sched = small_schedule(g, 8, gamma);
    const double E1 = h->diagonal(16);
    const MultiscaleState st = init_cascade(h, sched, E1);
    long checked = 0;
    for (const auto& b : st.level(1).blocks) {
        if (!b.isolated || b.collar_is_lattice) continue;
        InfluenceProfile prof;
        try {
            prof = influence_profile(st, b, E1 + sched.eps(1) / 5.0);
        } catch (const NearSingularElimination&) {
            continue;
        } catch (const CollarExhaustsLattice&) {
            continue;
        }
        REQUIRE(prof.contact.size() == static_cast<std::size_t>(prof.influence.size()));
        const std::set<long> collar(b.collar.begin(), b.collar.end());
        double max_seen = 0.0;
        for (std::size_t i = 0; i < prof.contact.size(); ++i) {
            const long y = prof.contact[i];
            REQUIRE(collar.count(y) == 0);
            double sum = 0.0;
            for (long x : g.neighbors(y))
                if (collar.count(x)) sum += prof.psi(x);
            REQUIRE(prof.influence(i) == Catch::Approx(std::abs(sum)).margin(1e-14));
            max_seen = std::max(max_seen, prof.influence(i));
        }
        REQUIRE(prof.influence_max == Catch::Approx(max_seen).margin(1e-14));
        REQUIRE(prof.influence_bound ==
                Catch::Approx(std::pow(gamma, 3.1 * sched.L(b.scale))).epsilon(1e-12));
        ++checked;
    }
    REQUIRE(checked >= 1);
}

TEST_CASE("influence vanishes identically at zero coupling", "[influence]") {
    const LatticeGeometry g = build_geometry(1, {33});
    auto h = make_h(g, 8, 0.0, 3);
    const ScaleSchedule sched = small_schedule(g, 8, 0.0);
    const double E1 = h->diagonal(16);
    const MultiscaleState st = init_cascade(h, sched, E1);
    for (const auto& b : st.level(1).blocks) {
        if (!b.isolated || b.collar_is_lattice) continue;
        try {
            const InfluenceProfile prof = influence_profile(st, b, E1);
            REQUIRE(prof.influence_max == 0.0);
        } catch (const CollarExhaustsLattice&) {
        }
    }
}

TEST_CASE("movement decomposition reconstructs the transition exactly", "[movement]") {
    const LatticeGeometry g = build_geometry(1, {32});
    const int N = 8;
    const double gamma = 0.02;
    const ScaleSchedule sched = small_schedule(g, N, gamma);
    REQUIRE(sched.max_scale() >= 3);

    long found = 0;
    for (std::uint64_t seed = 0; seed < 300 && found < 3; ++seed) {
        auto h = make_h(g, N, gamma, seed);
        const MovementSetup setup = prepare_movement_trial(h, sched, 16);
        if (!setup.ok) continue;
        const Block& b = setup.state.level(2).blocks[static_cast<std::size_t>(setup.block_index)];
        try {
            const MovementDecomposition m =
                movement_decomposition(setup.state, b, setup.E_next);
            ++found;

            REQUIRE(m.recon_residual_factored <= 1e-10);
            REQUIRE(m.recon_residual_dense <= 1e-8);
            REQUIRE(symmetry_defect(m.f_cur_E) < 1e-12);
            REQUIRE(m.n_hat_prev >= 1);
            REQUIRE(m.n_hat_cur >= 0);

            // the rank-one piece really is rank one
            const Eigen::JacobiSVD<Mat> svd(m.rank_one);
            if (svd.singularValues().size() > 1)
                REQUIRE(svd.singularValues()(1) <=
                        1e-10 * (svd.singularValues()(0) + 1.0));

            // Weyl: perturbing the diagonal branch matrix by the transition
            // difference moves each eigenvalue by at most its norm
            const Vec fe = dense_spectrum(m.f_cur_E).values;
            Vec qe = dense_spectrum(Mat(m.f_cur_E + m.direct_factored)).values;
            const double shift = operator_norm(m.direct_factored);
            for (long i = 0; i < fe.size(); ++i)
                REQUIRE(std::abs(fe(i) - qe(i)) <= shift + 1e-13);
            REQUIRE(m.spread_rank_one >= 0.0);
        } catch (const InvalidExperiment&) {
        } catch (const NearSingularElimination&) {
        }
    }
    REQUIRE(found >= 1);
}

TEST_CASE("potential sweep visits every level and tracks the realized one", "[movement]") {
    const LatticeGeometry g = build_geometry(1, {32});
    const int N = 8;
    const double gamma = 0.02;
    const ScaleSchedule sched = small_schedule(g, N, gamma);

    long found = 0;
    for (std::uint64_t seed = 0; seed < 300 && found < 2; ++seed) {
        auto h = make_h(g, N, gamma, seed);
        const MovementSetup setup = prepare_movement_trial(h, sched, 16);
        if (!setup.ok) continue;
        const Block& b = setup.state.level(2).blocks[static_cast<std::size_t>(setup.block_index)];
        try {
            const SweepReport rep = sweep_vbar(setup.state, b, setup.E_next);
            ++found;
            REQUIRE(rep.entries.size() == static_cast<std::size_t>(N));
            REQUIRE(rep.valid_entries >= 1);
            REQUIRE(rep.valid_entries <= N);
            long valid_count = 0;
            bool realized_seen = false;
            const double vbar = setup.state.H->disorder.value(rep.ybar);
            for (const auto& e : rep.entries) {
                if (!e.valid) continue;
                ++valid_count;
                REQUIRE(e.n_hat_cur >= 0);
                if (e.v == vbar) realized_seen = true;
            }
            REQUIRE(valid_count == rep.valid_entries);
            REQUIRE(realized_seen);
            if (rep.valid_entries > 1) REQUIRE(rep.min_inverse_gap > 0.0);
        } catch (const InvalidExperiment&) {
        } catch (const NearSingularElimination&) {
        }
    }
    REQUIRE(found >= 1);
}

TEST_CASE("with_potential replaces exactly one site", "[movement]") {
    const LatticeGeometry g = build_geometry(1, {16});
    auto h = make_h(g, 8, 0.03, 21);
    const Hamiltonian swapped = with_potential(*h, 5, 2);
    REQUIRE(swapped.disorder.levels[5] == 2);
    for (long x = 0; x < g.volume(); ++x) {
        if (x == 5) continue;
        REQUIRE(swapped.disorder.levels[x] == h->disorder.levels[x]);
        REQUIRE(swapped.matrix(x, x) == h->matrix(x, x));
    }
    REQUIRE(swapped.matrix(5, 5) ==
            Catch::Approx(2.0 * g.d * 0.03 + 2.0 / 7.0).epsilon(1e-15));
}

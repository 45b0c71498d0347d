#include <catch2/catch_amalgamated.hpp>

#include <anderson/disorder.hpp>
#include <anderson/hamiltonian.hpp>
#include <anderson/lattice.hpp>
#include <anderson/schedule.hpp>
#include <anderson/schur.hpp>
#include <anderson/spectral.hpp>

#include <cmath>
#include <set>

using namespace anderson;

namespace {

DisorderRealization flat_disorder(const LatticeGeometry& g, int N, int level) {
    DisorderRealization d;
    d.N = N;
    d.levels.assign(static_cast<std::size_t>(g.volume()), level);
    return d;
}

}  // namespace

TEST_CASE("lattice indexing round-trips and counts neighbors", "[lattice]") {
    const LatticeGeometry g = build_geometry(3, {3, 4, 5});
    REQUIRE(g.volume() == 60);
    REQUIRE(g.diameter() == 9);
    for (long x = 0; x < g.volume(); ++x) {
        REQUIRE(g.site_index(g.coords(x)) == x);
        for (long y : g.neighbors(x)) {
            REQUIRE(g.l1_distance(x, y) == 1);
            REQUIRE(g.l1_distance(y, x) == 1);
        }
    }

    const LatticeGeometry q = build_geometry(2, {4, 4});
    REQUIRE(q.neighbors(0).size() == 2);                      // corner
    REQUIRE(q.neighbors(q.site_index({1, 1})).size() == 4);   // interior
    REQUIRE(q.neighbors(q.site_index({0, 2})).size() == 3);   // edge
}

TEST_CASE("disorder levels are bounded, gridded and reproducible", "[disorder]") {
    const LatticeGeometry g = build_geometry(2, {8, 8});
    const DisorderRealization a = sample_disorder(g, 16, 42);
    const DisorderRealization b = sample_disorder(g, 16, 42);
    const DisorderRealization c = sample_disorder(g, 16, 43);
    REQUIRE(a.levels == b.levels);
    REQUIRE(a.levels != c.levels);
    std::set<int> seen;
    for (long x = 0; x < g.volume(); ++x) {
        REQUIRE(a.levels[x] >= 0);
        REQUIRE(a.levels[x] < 16);
        REQUIRE(a.value(x) == Catch::Approx(a.levels[x] / 15.0).margin(0.0));
        seen.insert(a.levels[x]);
    }
    REQUIRE(seen.size() > 4);  // 64 draws from 16 levels hit more than a few
}

TEST_CASE("free path of three sites has the exact cosine spectrum", "[hamiltonian]") {
    const LatticeGeometry g = build_geometry(1, {3});
    const Hamiltonian h = build_hamiltonian(g, flat_disorder(g, 2, 0), 0.1);
    const Spectrum s = dense_spectrum(h.matrix);
    const double r2 = std::sqrt(2.0);
    REQUIRE(s.values(0) == Catch::Approx(0.2 - 0.1 * r2).epsilon(1e-13));
    REQUIRE(s.values(1) == Catch::Approx(0.2).epsilon(1e-13));
    REQUIRE(s.values(2) == Catch::Approx(0.2 + 0.1 * r2).epsilon(1e-13));
}

TEST_CASE("free 2x2 grid spectrum", "[hamiltonian]") {
    const LatticeGeometry g = build_geometry(2, {2, 2});
    const Hamiltonian h = build_hamiltonian(g, flat_disorder(g, 2, 0), 0.1);
    const Spectrum s = dense_spectrum(h.matrix);
    REQUIRE(s.values(0) == Catch::Approx(0.2).epsilon(1e-13));
    REQUIRE(s.values(1) == Catch::Approx(0.4).epsilon(1e-13));
    REQUIRE(s.values(2) == Catch::Approx(0.4).epsilon(1e-13));
    REQUIRE(s.values(3) == Catch::Approx(0.6).epsilon(1e-13));
}

TEST_CASE("random Hamiltonians are symmetric with bounded spectrum", "[hamiltonian]") {
    const LatticeGeometry g = build_geometry(2, {6, 6});
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        const Hamiltonian h = build_hamiltonian(g, sample_disorder(g, 8, seed), 0.07);
        REQUIRE(symmetry_defect(h.matrix) == 0.0);
        const Spectrum s = dense_spectrum(h.matrix);
        REQUIRE(s.values(0) >= -1e-12);
        REQUIRE(s.values(s.values.size() - 1) <= h.spectral_upper() + 1e-12);
    }
}

TEST_CASE("two-site Schur complement in closed form", "[schur]") {
    Mat K(2, 2);
    K << 0.0, 1.0, 1.0, 2.0;
    BlockPartition p;
    p.keep = {0};
    p.eliminate = {1};
    const SchurComplement f0 = schur_complement(K, p, 0.0);
    REQUIRE(f0.matrix(0, 0) == Catch::Approx(-0.5).epsilon(1e-15));
    REQUIRE(f0.off_diag_norm == Catch::Approx(1.0));
    REQUIRE(f0.elimination_margin == Catch::Approx(2.0));

    // the fixed point in the window is the exact eigenvalue 1 - sqrt(2)
    const SpectralWindow w{-0.4, 0.1};
    const auto sols = fixed_point_eigenvalues(K, p, w);
    REQUIRE(sols.size() == 1);
    const double expect = 1.0 - std::sqrt(2.0);
    REQUIRE(sols[0].lambda == Catch::Approx(expect).epsilon(1e-12));

    // and its lift is proportional to (1, 1 - sqrt(2))
    Vec phi(1);
    phi << 1.0;
    const Vec psi = lift_eigenvector(K, p, sols[0].lambda, phi);
    REQUIRE(psi(1) / psi(0) == Catch::Approx(expect).epsilon(1e-10));
    REQUIRE(eigen_residual(K, sols[0].lambda, psi) < 1e-10);
}

TEST_CASE("window solutions match the dense oracle on random matrices", "[schur]") {
    SplitMix64 rng(7);
    for (int t = 0; t < 25; ++t) {
        const long n = 4 + static_cast<long>(rng.next_below(5));
        Mat K(n, n);
        for (long i = 0; i < n; ++i)
            for (long j = i; j < n; ++j) K(i, j) = K(j, i) = rng.next_unit() - 0.5;
        // push the tail away from the window so margins stay healthy
        BlockPartition p;
        p.keep = {0, 1};
        for (long i = 2; i < n; ++i) {
            K(i, i) = (rng.next_below(2) ? 3.0 : -3.0) + 0.2 * rng.next_unit();
            p.eliminate.push_back(i);
        }
        for (long i = 0; i < 2; ++i)
            for (long j = 2; j < n; ++j) K(i, j) = K(j, i) = 0.05 * (rng.next_unit() - 0.5);
        const SpectralWindow w{0.0, 0.6};
        const Spectrum oracle = dense_spectrum(K);
        std::vector<double> expect;
        for (long i = 0; i < n; ++i)
            if (w.contains(oracle.values(i))) expect.push_back(oracle.values(i));
        const auto sols = fixed_point_eigenvalues(K, p, w);
        REQUIRE(sols.size() == expect.size());
        for (std::size_t i = 0; i < sols.size(); ++i)
            REQUIRE(sols[i].lambda == Catch::Approx(expect[i]).margin(1e-11));
    }
}

TEST_CASE("staged elimination equals one-shot elimination", "[schur]") {
    SplitMix64 rng(11);
    Mat K(4, 4);
    for (long i = 0; i < 4; ++i)
        for (long j = i; j < 4; ++j) K(i, j) = K(j, i) = rng.next_unit() - 0.5;
    K(2, 2) += 4.0;
    K(3, 3) -= 4.0;
    const double lambda = 0.13;

    BlockPartition both;
    both.keep = {0, 1};
    both.eliminate = {2, 3};
    const Mat one_shot = schur_complement(K, both, lambda).matrix;

    BlockPartition last;
    last.keep = {0, 1, 2};
    last.eliminate = {3};
    const Mat stage1 = schur_complement(K, last, lambda).matrix;
    BlockPartition mid;
    mid.keep = {0, 1};
    mid.eliminate = {2};
    const Mat stage2 = schur_complement(stage1, mid, lambda).matrix;

    REQUIRE((one_shot - stage2).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("shift difference obeys the resolvent identity and its bound", "[schur]") {
    SplitMix64 rng(23);
    Mat K(5, 5);
    for (long i = 0; i < 5; ++i)
        for (long j = i; j < 5; ++j) K(i, j) = K(j, i) = 0.1 * (rng.next_unit() - 0.5);
    for (long i = 2; i < 5; ++i) K(i, i) = (i % 2 ? 2.5 : -2.5);
    BlockPartition p;
    p.keep = {0, 1};
    p.eliminate = {2, 3, 4};
    const EliminationContext ctx = make_elimination_context(K, p);
    const SpectralWindow w{0.0, 0.5};
    for (int t = 0; t < 10; ++t) {
        const double lambda = w.lo() + (w.hi() - w.lo()) * rng.next_unit();
        const double E = w.lo() + (w.hi() - w.lo()) * rng.next_unit();
        const Mat diff = schur_shift_difference(ctx, lambda, E);
        const Mat direct = ctx.evaluate(lambda) - ctx.evaluate(E);
        REQUIRE((diff - direct).cwiseAbs().maxCoeff() < 1e-12);
        const double margin = std::min(ctx.margin(w.lo()), ctx.margin(w.hi()));
        const double bound =
            2.0 * std::pow(ctx.off_diag_norm / margin, 2.0) * std::abs(lambda - E);
        REQUIRE(operator_norm(diff) <= bound + 1e-15);
    }
}

TEST_CASE("zero coupling short-circuits", "[schur]") {
    Mat K = Mat::Zero(3, 3);
    K(0, 0) = 0.3;
    K(1, 1) = 1.1;
    K(2, 2) = -0.7;
    BlockPartition p;
    p.keep = {0};
    p.eliminate = {1, 2};
    const EliminationContext ctx = make_elimination_context(K, p);
    REQUIRE(ctx.off_diag_norm == 0.0);
    REQUIRE(ctx.evaluate(0.29)(0, 0) == 0.3);
    REQUIRE(schur_shift_difference(ctx, 0.1, 0.2).cwiseAbs().maxCoeff() == 0.0);
    const auto sols = fixed_point_eigenvalues(K, p, SpectralWindow{0.3, 0.05});
    REQUIRE(sols.size() == 1);
    REQUIRE(sols[0].lambda == Catch::Approx(0.3).margin(1e-14));
}

TEST_CASE("near-singular elimination is refused, not silently inverted", "[schur]") {
    Mat K(2, 2);
    K << 0.0, 0.3, 0.3, 0.1;
    BlockPartition p;
    p.keep = {0};
    p.eliminate = {1};
    const EliminationContext ctx = make_elimination_context(K, p);
    REQUIRE_THROWS_AS(ctx.evaluate(0.1), NearSingularElimination);
}

TEST_CASE("window ladder constants", "[schedule]") {
    ScheduleParams p;
    p.gamma = 0.1;
    p.N = 4;
    p.L0 = 2;
    p.kind = ScheduleKind::Paper;
    p.diameter = 63;
    const ScaleSchedule s = make_schedule(p);
    REQUIRE(s.eps(1) == Catch::Approx(1.0 / 9.0).epsilon(1e-15));          // 1/(3(N-1))
    REQUIRE(s.L(0) == 2.0);
    REQUIRE(s.L(2) == 8.0);
    REQUIRE(s.eps(2) == Catch::Approx(1.58489319246111e-13).epsilon(1e-9));  // 0.1^{12.8}
}

TEST_CASE("terminal scale from the 5.1 rule", "[schedule]") {
    ScheduleParams p;
    p.gamma = 0.02;
    p.N = 16;
    p.L0 = 1;
    p.kind = ScheduleKind::Geometric;
    p.ratio = 0.125;
    p.diameter = 63;
    const ScaleSchedule s = make_schedule(p);
    REQUIRE(s.k_bar == 5);  // smallest k with 5.1 * 2^{k-1} >= 63
    for (int k = 2; k <= s.max_scale(); ++k) REQUIRE(s.eps(k) == s.eps(k - 1) * 0.125);
    REQUIRE_FALSE(s.strict_regime());

    ScheduleParams q = p;
    q.gamma = 1e-30;
    REQUIRE(make_schedule(q).strict_regime());
}

TEST_CASE("geometric windows shrink fast enough for the shift budget", "[schedule]") {
    ScheduleParams p;
    p.gamma = 0.02;
    p.N = 16;
    p.L0 = 1;
    p.kind = ScheduleKind::Geometric;
    p.ratio = 0.125;
    p.diameter = 127;
    const ScaleSchedule s = make_schedule(p);
    for (int k = 1; k < s.max_scale(); ++k) {
        REQUIRE(s.eps(k + 1) < s.eps(k) / 3.0);
        double tail = 0.0;
        for (int i = k + 1; i <= s.max_scale(); ++i) tail += s.eps(i) / 3.0;
        REQUIRE(tail < s.eps(k) / 2.0);
    }
}

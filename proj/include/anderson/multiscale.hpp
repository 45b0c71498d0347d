#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "hamiltonian.hpp"
#include "schedule.hpp"
#include "schur.hpp"

namespace anderson {

// ---------------------------------------------------------------------------
// site-set helpers (sorted vectors of global site indices)
// ---------------------------------------------------------------------------

inline bool set_contains(const std::vector<long>& sorted, long x) {
    return std::binary_search(sorted.begin(), sorted.end(), x);
}

inline std::vector<long> set_union(const std::vector<long>& a, const std::vector<long>& b) {
    std::vector<long> out;
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

inline std::vector<long> set_difference(const std::vector<long>& a, const std::vector<long>& b) {
    std::vector<long> out;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

inline bool sets_intersect(const std::vector<long>& a, const std::vector<long>& b) {
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia == *ib) return true;
        (*ia < *ib) ? ++ia : ++ib;
    }
    return false;
}

inline long set_diameter(const LatticeGeometry& g, const std::vector<long>& sites) {
    long best = 0;
    for (std::size_t i = 0; i < sites.size(); ++i)
        for (std::size_t j = i + 1; j < sites.size(); ++j)
            best = std::max(best, g.l1_distance(sites[i], sites[j]));
    return best;
}

inline long set_distance(const LatticeGeometry& g, const std::vector<long>& a,
                         const std::vector<long>& b) {
    long best = std::numeric_limits<long>::max();
    for (long x : a)
        for (long y : b) best = std::min(best, g.l1_distance(x, y));
    return best;
}

// all lattice sites within l1 distance <= radius of the set
inline std::vector<long> l1_neighborhood(const LatticeGeometry& g, const std::vector<long>& sites,
                                         double radius) {
    std::vector<long> out;
    const long n = g.volume();
    for (long y = 0; y < n; ++y) {
        for (long x : sites) {
            if (static_cast<double>(g.l1_distance(x, y)) <= radius) {
                out.push_back(y);
                break;
            }
        }
    }
    return out;
}

// components under "within l1 range" connectivity, ordered by smallest member
inline std::vector<std::vector<long>> connected_components(const LatticeGeometry& g,
                                                           const std::vector<long>& sites,
                                                           double range) {
    const std::size_t n = sites.size();
    std::vector<std::size_t> parent(n);
    for (std::size_t i = 0; i < n; ++i) parent[i] = i;
    std::function<std::size_t(std::size_t)> find = [&](std::size_t i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    };
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (static_cast<double>(g.l1_distance(sites[i], sites[j])) <= range) {
                const auto ri = find(i), rj = find(j);
                if (ri != rj) parent[std::max(ri, rj)] = std::min(ri, rj);
            }
    std::vector<std::vector<long>> comps;
    std::vector<int> comp_of(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = find(i);
        if (comp_of[r] < 0) {
            comp_of[r] = static_cast<int>(comps.size());
            comps.emplace_back();
        }
        comps[comp_of[r]].push_back(sites[i]);
    }
    // sites arrive sorted, so each component is sorted and components are
    // already ordered by their smallest member
    return comps;
}

// ---------------------------------------------------------------------------
// cascade state
// ---------------------------------------------------------------------------

struct Block {
    int scale = 0;                    // k: component of R^(k)
    std::vector<long> sites;          // B_k
    std::vector<long> collar;         // B-bar_k, always contains sites
    std::vector<long> double_collar;  // B-double-bar_k
    long diameter = 0;
    bool isolated = false;           // diam <= L_k, closed inequality
    bool collar_is_lattice = false;  // terminal collar
    int n_hat = -1;                  // eigenvalue count recorded when E_{k+1} is chosen
    double n_hat_energy = 0.0;
};

struct RemovalRecord {
    int removed_in_step = 0;  // block was isolated and nonresonant in this step
    Block block;
};

struct ScaleLevel {
    int k = 0;
    double energy = 0.0;  // E_k
    std::vector<long> resonant_sites;
    std::vector<Block> blocks;
};

struct MultiscaleState {
    std::shared_ptr<const Hamiltonian> H;
    ScaleSchedule schedule;
    std::vector<ScaleLevel> levels;      // levels[j] describes scale j+1
    std::vector<RemovalRecord> removed;  // eliminated blocks feeding the U_k unions
    std::vector<std::string> log;
    bool terminal = false;  // some collar reached the whole rectangle

    int scale() const { return static_cast<int>(levels.size()); }
    const ScaleLevel& level(int k) const { return levels.at(k - 1); }
    ScaleLevel& level(int k) { return levels.at(k - 1); }
    double energy() const { return levels.back().energy; }
    const LatticeGeometry& geometry() const { return H->geometry; }
};

// step-1 resonance: the bare site energy against I_eps1(E1)
inline std::vector<long> resonant_sites_step1(const Hamiltonian& h, double E1, double eps1) {
    std::vector<long> out;
    for (long x = 0; x < h.volume(); ++x)
        if (std::abs(h.diagonal(x) - E1) <= eps1) out.push_back(x);
    return out;
}

namespace detail {

// B-bar_k: the 2 L_k neighborhood of the block, absorbing whole connected
// components of earlier eliminated double collars so the boundary never cuts
// through a region that once resonated.
inline std::vector<long> build_collar(const MultiscaleState& st, const std::vector<long>& sites,
                                      int k, std::vector<std::string>& log) {
    const auto& g = st.geometry();
    std::vector<long> collar = l1_neighborhood(g, sites, st.schedule.collar_reach(k));
    std::vector<long> u_sites;
    for (const auto& rec : st.removed)
        if (rec.block.scale < k) u_sites = set_union(u_sites, rec.block.double_collar);
    if (!u_sites.empty()) {
        for (const auto& comp : connected_components(g, u_sites, 1.0))
            if (sets_intersect(comp, collar)) collar = set_union(collar, comp);
    }
    if (set_diameter(g, collar) >= g.diameter()) collar.clear();  // caller promotes to Lambda
    return collar;
}

inline Block make_block(const MultiscaleState& st, std::vector<long> sites, int k,
                        std::vector<std::string>& log) {
    const auto& g = st.geometry();
    Block b;
    b.scale = k;
    b.sites = std::move(sites);
    b.diameter = set_diameter(g, b.sites);
    b.isolated = static_cast<double>(b.diameter) <= st.schedule.L(k);

    const bool force_lattice = (k >= st.schedule.k_bar - 1);
    std::vector<long> collar;
    if (!force_lattice) collar = build_collar(st, b.sites, k, log);
    if (collar.empty()) {
        collar.resize(g.volume());
        for (long i = 0; i < g.volume(); ++i) collar[i] = i;
        b.collar_is_lattice = true;
    }
    b.collar = std::move(collar);
    b.double_collar = b.collar_is_lattice
                          ? b.collar
                          : l1_neighborhood(g, b.collar, st.schedule.double_collar_reach(k));

    if (!b.collar_is_lattice &&
        static_cast<double>(set_diameter(g, b.collar)) > 5.1 * st.schedule.L(k))
        log.push_back("collar diameter bound 5.1*L_k exceeded at scale " + std::to_string(k));
    return b;
}

inline void check_collar_disjointness(const MultiscaleState& st, ScaleLevel& lvl,
                                      std::vector<std::string>& log) {
    const auto& g = st.geometry();
    const double min_sep = std::pow(st.schedule.L(lvl.k), std::sqrt(st.schedule.params.alpha));
    for (std::size_t i = 0; i < lvl.blocks.size(); ++i)
        for (std::size_t j = i + 1; j < lvl.blocks.size(); ++j) {
            if (lvl.blocks[i].collar_is_lattice || lvl.blocks[j].collar_is_lattice) continue;
            const long d = set_distance(g, lvl.blocks[i].collar, lvl.blocks[j].collar);
            if (d == 0)
                log.push_back("collars intersect at scale " + std::to_string(lvl.k));
            else if (static_cast<double>(d) <= min_sep)
                log.push_back("collar separation below L^sqrt(alpha) at scale " +
                              std::to_string(lvl.k));
        }
}

inline ScaleLevel make_level(MultiscaleState& st, int k, double energy,
                             const std::vector<long>& resonant) {
    ScaleLevel lvl;
    lvl.k = k;
    lvl.energy = energy;
    lvl.resonant_sites = resonant;
    for (auto& comp : connected_components(st.geometry(), resonant, st.schedule.component_range(k)))
        lvl.blocks.push_back(make_block(st, std::move(comp), k, st.log));
    check_collar_disjointness(st, lvl, st.log);
    for (const auto& b : lvl.blocks)
        if (b.collar_is_lattice) st.terminal = true;
    return lvl;
}

}  // namespace detail

// localized operator F-tilde^(k)_lambda(B): one-shot Schur complement of
// H restricted to the collar, eliminating everything but the block sites.
// Composition of Schur complements makes this equal to the staged cascade
// at the same shift.
struct LocalizedOperator {
    std::vector<long> collar;       // sorted global site ids
    std::vector<long> block_sites;  // sorted, subset of collar
    BlockPartition partition;       // positions within the collar ordering
    EliminationContext ctx;
};

inline LocalizedOperator make_localized_operator(const Hamiltonian& h,
                                                 const std::vector<long>& collar,
                                                 const std::vector<long>& block_sites) {
    LocalizedOperator lo;
    lo.collar = collar;
    lo.block_sites = block_sites;
    Mat K = submatrix(h.matrix, collar, collar);
    for (std::size_t i = 0; i < collar.size(); ++i) {
        if (set_contains(block_sites, collar[i]))
            lo.partition.keep.push_back(static_cast<long>(i));
        else
            lo.partition.eliminate.push_back(static_cast<long>(i));
    }
    lo.ctx = make_elimination_context(K, lo.partition);
    return lo;
}

inline LocalizedOperator make_localized_operator(const MultiscaleState& st, const Block& b) {
    return make_localized_operator(*st.H, b.collar, b.sites);
}

inline Mat localized_operator(const MultiscaleState& st, const Block& b, double lambda,
                              double floor_rel = kMarginFloorRel) {
    return make_localized_operator(st, b).ctx.evaluate(lambda, floor_rel);
}

// Def "resonant in step k+1": dist(spec F-tilde^(k)_E(B_k), E) <= eps_{k+1},
// evaluated with the closed window. Returns the window count so the caller
// can record n-hat alongside the test.
struct ResonanceResult {
    bool resonant = false;
    int n_hat = 0;
    bool conservative = false;  // near-singular elimination forced "resonant"
};

inline ResonanceResult resonance_test(const MultiscaleState& st, const Block& b, double E_next,
                                      double eps_next) {
    ResonanceResult r;
    try {
        const Mat F = localized_operator(st, b, E_next);
        r.n_hat = count_in_window(F, SpectralWindow{E_next, eps_next});
        r.resonant = r.n_hat >= 1;
    } catch (const NearSingularElimination&) {
        r.resonant = true;
        r.conservative = true;
        r.n_hat = -1;
    }
    return r;
}

inline MultiscaleState init_cascade(std::shared_ptr<const Hamiltonian> h,
                                    const ScaleSchedule& schedule, double E1) {
    MultiscaleState st;
    st.H = std::move(h);
    st.schedule = schedule;
    const auto resonant = resonant_sites_step1(*st.H, E1, schedule.eps(1));
    st.levels.push_back(detail::make_level(st, 1, E1, resonant));
    return st;
}

inline MultiscaleState init_cascade(const Hamiltonian& h, const ScaleSchedule& schedule,
                                    double E1) {
    return init_cascade(std::make_shared<Hamiltonian>(h), schedule, E1);
}

// Step sweep half-width at scale k. From scale 2 on a block's resonant
// eigenvalues live inside I_{eps_k}(E_k) by construction and the followed one
// is tracked to within the snap error, so the eps_k/3 step window is enough.
// Scale-1 resonance is diagnosed on diagonal entries alone: hybridization
// pushes the block eigenvalues beyond eps_1 by the Gershgorin reach
// 2*d*gamma, plus collar corrections of the same order once gamma <= eps_1.
// The first step sweeps that full reach, otherwise equal-level neighbor pairs
// (split by +-gamma) are unreachable at desk-scale gamma. For gamma << eps_1
// this collapses back to the plain window.
inline double sweep_half_width(const MultiscaleState& st, int k) {
    const double eps_k = st.schedule.eps(k);
    if (k > 1) return eps_k / 3.0;
    return eps_k + 4.0 * st.H->geometry.d * st.H->gamma;
}

// Largest accepted |E_{k+1} - E_k|: the sweep reach, plus the eps_2/2 grid
// snap error on the first step.
inline double shift_budget(const MultiscaleState& st, int k) {
    const double snap = k > 1 ? 0.0 : st.schedule.eps(k + 1) / 4.0;
    return sweep_half_width(st, k) + snap;
}

// one cascade step: records n-hat for the isolated blocks of the current
// scale, removes the nonresonant ones, and rebuilds blocks at the next scale
inline void advance_scale(MultiscaleState& st, double E_next) {
    const int k = st.scale();
    if (k + 1 > st.schedule.max_scale())
        throw std::invalid_argument("advance_scale: schedule exhausted at scale " +
                                    std::to_string(k));
    ScaleLevel& cur = st.level(k);
    if (std::abs(E_next - cur.energy) > shift_budget(st, k))
        throw std::invalid_argument("advance_scale: energy shift exceeds the step budget");

    const double eps_next = st.schedule.eps(k + 1);
    std::vector<long> survivors;
    for (auto& b : cur.blocks) {
        if (!b.isolated) {
            survivors = set_union(survivors, b.sites);
            continue;
        }
        const ResonanceResult r = resonance_test(st, b, E_next, eps_next);
        b.n_hat = r.n_hat;
        b.n_hat_energy = E_next;
        if (r.conservative)
            st.log.push_back("near-singular elimination at scale " + std::to_string(k) +
                             "; block kept as resonant");
        if (r.resonant) {
            survivors = set_union(survivors, b.sites);
        } else {
            st.removed.push_back(RemovalRecord{k + 1, b});
        }
    }
    st.levels.push_back(detail::make_level(st, k + 1, E_next, survivors));
}

// ---------------------------------------------------------------------------
// truncation error F^(k) - direct sum of localized blocks, in factored form
// ---------------------------------------------------------------------------

// The naive subtraction of the two O(1) operators hits the double-precision
// noise floor long before the gamma^{3.3 L_k} scale this difference lives at.
// Both pieces below are resolvent products, which keep relative precision of
// exponentially small entries (tridiagonal solves in d=1 are componentwise
// accurate), so the measured norm is trustworthy down to ~1e-290.
struct TruncationReport {
    double norm = 0.0;         // ||F^(k) - direct sum F-tilde||_2
    double bound = 0.0;        // gamma^{3.3 L_k}
    double window_next = 0.0;  // eps_{k+1}
    bool defined = false;      // false when R^(k) is empty
};

inline TruncationReport truncation_report(const MultiscaleState& st, int k, double lambda,
                                          double floor_rel = kMarginFloorRel) {
    const auto& g = st.geometry();
    const auto& h = st.H->matrix;
    const ScaleLevel& lvl = st.level(k);
    TruncationReport rep;
    rep.bound = std::pow(st.schedule.params.gamma, 3.3 * st.schedule.L(k));
    rep.window_next = k + 1 <= st.schedule.k_bar ? st.schedule.eps(k + 1) : 0.0;
    const std::vector<long>& R = lvl.resonant_sites;
    if (R.empty()) return rep;
    rep.defined = true;

    std::vector<long> all(g.volume());
    for (long i = 0; i < g.volume(); ++i) all[i] = i;
    const std::vector<long> S = set_difference(all, R);

    Mat T = Mat::Zero(R.size(), R.size());

    if (!S.empty()) {
        // global correction B_g (H_S - lambda)^{-1} C_g; off-diagonal blocks of
        // T are minus its off-diagonal blocks (the direct sum has zeros there)
        Mat HS = submatrix(h, S, S);
        HS.diagonal().array() -= lambda;
        const Mat coupling = submatrix(h, S, R);
        const Mat M_full = coupling.transpose() * HS.partialPivLu().solve(coupling);

        std::vector<int> block_of(g.volume(), -1);
        for (std::size_t bi = 0; bi < lvl.blocks.size(); ++bi)
            for (long x : lvl.blocks[bi].sites) block_of[x] = static_cast<int>(bi);
        for (std::size_t i = 0; i < R.size(); ++i)
            for (std::size_t j = 0; j < R.size(); ++j)
                if (block_of[R[i]] != block_of[R[j]]) T(i, j) = -M_full(i, j);

        // diagonal blocks: re-entry correction through the complement of the collar
        for (const auto& b : lvl.blocks) {
            const std::vector<long> ci = set_difference(b.collar, b.sites);
            const std::vector<long> rest = set_difference(S, ci);
            if (ci.empty() || rest.empty()) continue;
            Mat d1 = submatrix(h, ci, ci);
            d1.diagonal().array() -= lambda;
            const auto lu1 = d1.partialPivLu();
            const Mat Gt = -lu1.solve(submatrix(h, ci, b.sites));  // ci x |B|
            const Mat Xc = submatrix(h, ci, rest);
            Mat W = Gt.transpose() * Xc;  // |B| x rest
            Mat M_rest = submatrix(h, rest, rest);
            M_rest.diagonal().array() -= lambda;
            M_rest -= Xc.transpose() * lu1.solve(Xc);
            Mat Tb = -W * M_rest.partialPivLu().solve(Mat(W.transpose()));
            Tb = 0.5 * (Tb + Tb.transpose());
            // scatter into T
            std::vector<long> pos(b.sites.size());
            for (std::size_t i = 0; i < b.sites.size(); ++i)
                pos[i] = std::lower_bound(R.begin(), R.end(), b.sites[i]) - R.begin();
            for (std::size_t i = 0; i < b.sites.size(); ++i)
                for (std::size_t j = 0; j < b.sites.size(); ++j) T(pos[i], pos[j]) = Tb(i, j);
        }
    }

    T = 0.5 * (T + T.transpose());
    rep.norm = T.size() > 0 ? operator_norm(T) : 0.0;
    return rep;
}

// measured Lipschitz data for a localized operator over its sweep window
struct LipschitzSample {
    double lambda = 0.0;
    double E = 0.0;
    double norm = 0.0;   // ||F-tilde_lambda - F-tilde_E||
    double bound = 0.0;  // gamma * |lambda - E|
};

inline LipschitzSample localized_lipschitz(const MultiscaleState& st, const Block& b,
                                           double lambda, double E) {
    const LocalizedOperator lo = make_localized_operator(st, b);
    LipschitzSample s;
    s.lambda = lambda;
    s.E = E;
    s.norm = operator_norm(schur_shift_difference(lo.ctx, lambda, E));
    s.bound = st.schedule.params.gamma * std::abs(lambda - E);
    return s;
}

}  // namespace anderson

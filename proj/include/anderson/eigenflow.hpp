#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "anderson/multiscale.hpp"
#include "anderson/schur.hpp"

namespace anderson {

// branch-tree guards for the energy-following procedure
constexpr int kBranchFanoutCap = 64;
// fallback eigenvectors need some weight on the block to count as block modes
constexpr double kPsiBlockWeightFloor = 1e-12;

// Nearest multiple of eps_k/2; an exact midpoint resolves to the smaller
// multiple.
inline double snap_energy(double solution, double eps_k) {
    if (!(eps_k > 0.0)) throw std::invalid_argument("snap_energy: eps_k must be positive");
    const double g = 0.5 * eps_k;
    const double q = std::floor(solution / g);
    const double lo = q * g;
    const double hi = (q + 1.0) * g;
    return (solution - lo <= hi - solution) ? lo : hi;
}

struct BranchStep {
    int scale = 0;
    double energy = 0.0;     // E_k; snapped for k >= 2, exact at the terminal step
    double snap_grid = 0.0;  // eps_k/2 used, 0 when no snapping happened
    std::vector<long> block;
    int n_hat = -1;  // recorded when the branch advanced past this scale
};

struct EnergyBranch {
    long start_site = -1;
    std::vector<BranchStep> steps;
    MultiscaleState state;
    bool terminal = false;
    bool dead = false;
    std::string fate;

    int scale() const { return steps.empty() ? 0 : steps.back().scale; }
    double energy() const { return steps.empty() ? 0.0 : steps.back().energy; }
};

struct EigenpairApprox {
    long start_site = -1;
    double eigenvalue = 0.0;
    Vec psi;                    // full lattice, unit norm
    double residual = 0.0;      // ||(H - lambda) psi|| / ||psi||
    double psi_norm_pre = 0.0;  // norm before normalization; >= 1 by the lift contract
    std::vector<BranchStep> history;
    int k_hat = 0;
    int cluster = 0;
    bool via_fallback = false;
};

namespace detail {

inline int find_block_of(const ScaleLevel& lvl, long x) {
    for (std::size_t i = 0; i < lvl.blocks.size(); ++i)
        if (set_contains(lvl.blocks[i].sites, x)) return static_cast<int>(i);
    return -1;
}

struct SweepOutcome {
    std::vector<FixedPointSolution> solutions;
    bool via_fallback = false;
    std::string note;
};

// All fixed points of the localized operator in the step sweep window around
// E_k. When the window endpoints sit too close to an elimination pole the
// Schur sweep is abandoned for a direct diagonalization of H on the collar,
// keeping only modes with weight on the block.
inline SweepOutcome sweep_block(const MultiscaleState& st, const Block& b) {
    const int k = b.scale;
    const double E_k = st.level(k).energy;
    const SpectralWindow window{E_k, sweep_half_width(st, k)};
    SweepOutcome out;
    try {
        const LocalizedOperator lo = make_localized_operator(st, b);
        out.solutions = fixed_point_eigenvalues(lo.ctx, window);
        return out;
    } catch (const std::exception& e) {
        out.via_fallback = true;
        out.note = e.what();
    }

    const Mat K = submatrix(st.H->matrix, b.collar, b.collar);
    const Spectrum s = dense_spectrum(K);
    std::vector<long> block_pos;
    for (std::size_t i = 0; i < b.collar.size(); ++i)
        if (set_contains(b.sites, b.collar[i])) block_pos.push_back(static_cast<long>(i));
    for (long j = 0; j < s.values.size(); ++j) {
        if (!window.contains(s.values(j))) continue;
        Vec phi(block_pos.size());
        for (std::size_t i = 0; i < block_pos.size(); ++i) phi(i) = s.vectors(block_pos[i], j);
        const double w = phi.norm();
        if (w < kPsiBlockWeightFloor) continue;
        FixedPointSolution sol;
        sol.lambda = s.values(j);
        sol.phi = phi / w;
        sol.branch = static_cast<int>(j);
        out.solutions.push_back(std::move(sol));
    }
    int cluster = -1;
    double anchor = std::numeric_limits<double>::quiet_NaN();
    for (auto& sol : out.solutions) {
        if (cluster < 0 || sol.lambda - anchor > kFixedPointCluster) {
            ++cluster;
            anchor = sol.lambda;
        }
        sol.cluster = cluster;
    }
    return out;
}

}  // namespace detail

struct StepCandidate {
    double raw = 0.0;     // fixed-point solution before snapping
    double energy = 0.0;  // snapped E_{k+1}
    bool via_fallback = false;
};

// Candidate next energies for a live branch: sweep, snap to the eps_{k+1}/2
// grid, enforce the shift budget, merge duplicates.
inline std::vector<StepCandidate> efp_step(const EnergyBranch& br,
                                           std::vector<std::string>* log = nullptr) {
    if (br.terminal || br.dead) throw std::invalid_argument("efp_step: branch is finished");
    const MultiscaleState& st = br.state;
    const int k = br.scale();
    const ScaleLevel& lvl = st.level(k);
    const int bi = detail::find_block_of(lvl, br.start_site);
    if (bi < 0) return {};
    const Block& b = lvl.blocks[bi];

    const detail::SweepOutcome sw = detail::sweep_block(st, b);
    if (log && sw.via_fallback)
        log->push_back("scale " + std::to_string(k) + ": sweep fell back to direct collar "
                       "diagonalization (" + sw.note + ")");

    const double eps_next = st.schedule.eps(k + 1);
    const double budget = shift_budget(st, k);
    const double E_k = lvl.energy;
    std::vector<StepCandidate> cand;
    for (const auto& sol : sw.solutions) {
        const double snapped = snap_energy(sol.lambda, eps_next);
        if (std::abs(snapped - E_k) > budget) {
            if (log)
                log->push_back("scale " + std::to_string(k) + ": candidate " +
                               std::to_string(snapped) + " dropped, exceeds the step budget");
            continue;
        }
        bool merged = false;
        for (auto& c : cand)
            if (c.energy == snapped) { merged = true; break; }
        if (!merged) cand.push_back(StepCandidate{sol.lambda, snapped, sw.via_fallback});
    }
    std::sort(cand.begin(), cand.end(),
              [](const StepCandidate& a, const StepCandidate& c) { return a.energy < c.energy; });
    return cand;
}

struct EfpResult {
    long start_site = -1;
    std::vector<EigenpairApprox> eigenpairs;
    std::vector<EnergyBranch> dead_branches;
    int terminal_branches = 0;
    int overflow_dropped = 0;
    std::vector<std::string> log;
};

// One-shot lift of the top-level eigenvector through the collar: phi on the
// block, -(H_{collar minus B} - lambda)^{-1} H_{.,B} phi on the rest of the
// collar, zero outside. Indices are lattice-global.
inline Vec reconstruct_eigenvector(const MultiscaleState& st, const Block& b, const Vec& phi_top,
                                   double lambda) {
    const LocalizedOperator lo = make_localized_operator(st, b);
    const Mat K = submatrix(st.H->matrix, b.collar, b.collar);
    const Vec local = lift_eigenvector(K, lo.partition, lambda, phi_top);
    Vec psi = Vec::Zero(st.geometry().volume());
    for (std::size_t i = 0; i < b.collar.size(); ++i) psi(b.collar[i]) = local(i);
    return psi;
}

namespace detail {

// k-hat: the last scale that produced either new block sites or a multiple
// (or uncertified, n-hat < 0) resonance count. B_{x,0} = {x}, n-hat_0 = 1.
inline int compute_k_hat(const std::vector<BranchStep>& steps, long start_site) {
    int k_hat = 0;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const std::vector<long> prev =
            i == 0 ? std::vector<long>{start_site} : steps[i - 1].block;
        const bool grew = !set_difference(steps[i].block, prev).empty();
        const int n_prev = i == 0 ? 1 : steps[i - 1].n_hat;
        const bool multiple = i > 0 && (n_prev > 1 || n_prev < 0);
        if (grew || multiple) k_hat = steps[i].scale;
    }
    return k_hat;
}

inline void emit_terminal(EfpResult& res, EnergyBranch& br, const Block& b) {
    const SweepOutcome sw = sweep_block(br.state, b);
    if (sw.via_fallback)
        res.log.push_back("terminal sweep fell back to direct diagonalization (" + sw.note + ")");
    if (sw.solutions.empty()) {
        br.dead = true;
        br.fate = "terminal sweep found no solutions";
        res.dead_branches.push_back(br);
        return;
    }
    br.terminal = true;
    ++res.terminal_branches;
    const Hamiltonian& h = *br.state.H;
    for (const auto& sol : sw.solutions) {
        EigenpairApprox pair;
        pair.start_site = br.start_site;
        pair.eigenvalue = sol.lambda;
        pair.cluster = sol.cluster;
        pair.via_fallback = sw.via_fallback;
        Vec psi = reconstruct_eigenvector(br.state, b, sol.phi, sol.lambda);
        pair.psi_norm_pre = psi.norm();
        pair.residual = eigen_residual(h.matrix, sol.lambda, psi);
        pair.psi = psi / pair.psi_norm_pre;
        pair.history = br.steps;
        pair.history.push_back(
            BranchStep{b.scale + 1, sol.lambda, 0.0, b.sites, static_cast<int>(sw.solutions.size())});
        pair.k_hat = compute_k_hat(pair.history, br.start_site);
        res.eigenpairs.push_back(std::move(pair));
    }
}

}  // namespace detail

// Depth-first exploration of every energy branch out of x. Branch-level
// failures kill the branch with a recorded fate, never the run.
inline EfpResult efp_run(std::shared_ptr<const Hamiltonian> h, const ScaleSchedule& schedule,
                         long x) {
    EfpResult res;
    res.start_site = x;
    const double E1 = h->diagonal(x);

    EnergyBranch root;
    root.start_site = x;
    root.state = init_cascade(h, schedule, E1);
    {
        const int bi = detail::find_block_of(root.state.level(1), x);
        if (bi < 0) {
            // cannot happen: |v_x + 2dgamma - E1| = 0 <= eps_1
            res.log.push_back("start site not resonant at its own energy");
            return res;
        }
        root.steps.push_back(
            BranchStep{1, E1, 0.0, root.state.level(1).blocks[bi].sites, -1});
    }

    std::set<std::tuple<int, double, std::vector<long>>> seen;
    seen.insert({1, E1, root.steps.back().block});
    int created = 1;

    std::vector<EnergyBranch> stack;
    stack.push_back(std::move(root));
    while (!stack.empty()) {
        EnergyBranch br = std::move(stack.back());
        stack.pop_back();
        const int k = br.scale();
        const ScaleLevel& lvl = br.state.level(k);
        const int bi = detail::find_block_of(lvl, br.start_site);
        if (bi < 0) {
            br.dead = true;
            br.fate = "start site left the resonant set";
            res.dead_branches.push_back(std::move(br));
            continue;
        }
        const Block& b = lvl.blocks[bi];

        if (b.collar_is_lattice) {
            detail::emit_terminal(res, br, b);
            continue;
        }

        std::vector<StepCandidate> cand;
        try {
            cand = efp_step(br, &res.log);
        } catch (const std::exception& e) {
            br.dead = true;
            br.fate = std::string("sweep failed: ") + e.what();
            res.dead_branches.push_back(std::move(br));
            continue;
        }
        if (cand.empty()) {
            br.dead = true;
            br.fate = "no candidate energies in the sweep window";
            res.dead_branches.push_back(std::move(br));
            continue;
        }

        // largest-energy candidates pushed first so the smallest is explored first
        for (auto it = cand.rbegin(); it != cand.rend(); ++it) {
            EnergyBranch child;
            child.start_site = br.start_site;
            child.steps = br.steps;
            child.state = br.state;
            try {
                advance_scale(child.state, it->energy);
            } catch (const std::exception& e) {
                child.dead = true;
                child.fate = std::string("advance failed: ") + e.what();
                child.steps.push_back(BranchStep{k + 1, it->energy, schedule.eps(k + 1) / 2.0,
                                                 {}, -1});
                res.dead_branches.push_back(std::move(child));
                continue;
            }
            // the resonance count for the block we just stepped past
            const int pi = detail::find_block_of(child.state.level(k), br.start_site);
            if (pi >= 0) child.steps.back().n_hat = child.state.level(k).blocks[pi].n_hat;

            const int ni = detail::find_block_of(child.state.level(k + 1), br.start_site);
            if (ni < 0) {
                child.dead = true;
                child.fate = "start site left the resonant set";
                child.steps.push_back(BranchStep{k + 1, it->energy, schedule.eps(k + 1) / 2.0,
                                                 {}, -1});
                res.dead_branches.push_back(std::move(child));
                continue;
            }
            child.steps.push_back(BranchStep{k + 1, it->energy, schedule.eps(k + 1) / 2.0,
                                             child.state.level(k + 1).blocks[ni].sites, -1});

            const std::tuple<int, double, std::vector<long>> key{k + 1, it->energy,
                                                                 child.steps.back().block};
            if (seen.count(key)) continue;  // proliferation guard: merged branch
            if (created >= kBranchFanoutCap) {
                ++res.overflow_dropped;
                continue;
            }
            seen.insert(key);
            ++created;
            stack.push_back(std::move(child));
        }
    }
    if (res.overflow_dropped > 0)
        res.log.push_back("fan-out cap " + std::to_string(kBranchFanoutCap) + " hit, dropped " +
                          std::to_string(res.overflow_dropped) + " branches");
    return res;
}

inline EfpResult efp_run(const Hamiltonian& h, const ScaleSchedule& schedule, long x) {
    return efp_run(std::make_shared<Hamiltonian>(h), schedule, x);
}

// ---------------------------------------------------------------------------
// completeness against the dense oracle
// ---------------------------------------------------------------------------

struct CompletenessRow {
    double oracle_value = 0.0;
    bool matched = false;
    double best_error = std::numeric_limits<double>::infinity();
    bool envelope_ok = false;  // some branch kept |E_k - lambda_0| <= 0.31 eps_k at every k
};

struct CompletenessReport {
    std::vector<CompletenessRow> rows;
    long total = 0;
    long matched = 0;
    double matched_fraction = 0.0;
    std::vector<double> spurious;  // pooled values matching no oracle eigenvalue
    long pooled = 0;
    double max_residual = 0.0;
    double min_psi_norm_pre = std::numeric_limits<double>::infinity();
    long envelope_ok = 0;
    double tol = 0.0;
    std::vector<std::string> log;
};

inline double terminal_tolerance(const ScaleSchedule& schedule) {
    const int k_last = std::min(schedule.k_bar, schedule.max_scale());
    return std::max(1e-9, schedule.eps(k_last));
}

// Runs the EFP from every start site, pools the terminal eigenvalues, and
// matches them against the dense spectrum with multiplicity. Report-only: a
// missed eigenvalue shows up as matched = false, never as a throw.
inline CompletenessReport completeness_check(std::shared_ptr<const Hamiltonian> h,
                                             const ScaleSchedule& schedule,
                                             double tol_override = 0.0) {
    CompletenessReport rep;
    rep.tol = tol_override > 0.0 ? tol_override : terminal_tolerance(schedule);
    const Spectrum oracle = dense_spectrum(h->matrix);
    rep.total = oracle.values.size();
    for (long i = 0; i < oracle.values.size(); ++i)
        rep.rows.push_back(CompletenessRow{oracle.values(i), false,
                                           std::numeric_limits<double>::infinity(), false});

    std::vector<EigenpairApprox> pool;
    long dead = 0;
    for (long x = 0; x < h->volume(); ++x) {
        EfpResult r = efp_run(h, schedule, x);
        dead += static_cast<long>(r.dead_branches.size());
        for (auto& p : r.eigenpairs) {
            rep.max_residual = std::max(rep.max_residual, p.residual);
            rep.min_psi_norm_pre = std::min(rep.min_psi_norm_pre, p.psi_norm_pre);
            pool.push_back(std::move(p));
        }
        for (const auto& line : r.log)
            rep.log.push_back("x=" + std::to_string(x) + ": " + line);
    }
    rep.pooled = static_cast<long>(pool.size());
    if (dead > 0) rep.log.push_back(std::to_string(dead) + " branches died before terminal");

    std::sort(pool.begin(), pool.end(), [](const EigenpairApprox& a, const EigenpairApprox& b) {
        return a.eigenvalue < b.eigenvalue;
    });

    // multiplicity-aware greedy matching on the two sorted lists
    std::vector<bool> used(pool.size(), false);
    std::size_t lo = 0;
    for (auto& row : rep.rows) {
        while (lo < pool.size() && pool[lo].eigenvalue < row.oracle_value - rep.tol) ++lo;
        for (std::size_t j = lo; j < pool.size(); ++j) {
            if (pool[j].eigenvalue > row.oracle_value + rep.tol) break;
            if (used[j]) continue;
            used[j] = true;
            row.matched = true;
            ++rep.matched;
            break;
        }
    }
    rep.matched_fraction = rep.total > 0 ? static_cast<double>(rep.matched) / rep.total : 1.0;

    // spurious and envelope bookkeeping run over the whole pool, matched or not
    for (const auto& p : pool) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_row = 0;
        for (std::size_t i = 0; i < rep.rows.size(); ++i) {
            const double e = std::abs(rep.rows[i].oracle_value - p.eigenvalue);
            if (e < best) { best = e; best_row = i; }
        }
        if (best > rep.tol) {
            rep.spurious.push_back(p.eigenvalue);
            continue;
        }
        auto& row = rep.rows[best_row];
        row.best_error = std::min(row.best_error, best);
        bool env = true;
        for (const auto& stp : p.history)
            if (std::abs(stp.energy - row.oracle_value) > 0.31 * schedule.eps(stp.scale)) {
                env = false;
                break;
            }
        if (env) row.envelope_ok = true;
    }
    for (const auto& row : rep.rows)
        if (row.envelope_ok) ++rep.envelope_ok;
    return rep;
}

inline CompletenessReport completeness_check(const Hamiltonian& h, const ScaleSchedule& schedule,
                                             double tol_override = 0.0) {
    return completeness_check(std::make_shared<Hamiltonian>(h), schedule, tol_override);
}

// ---------------------------------------------------------------------------
// reachability counts N_{x,y,z}
// ---------------------------------------------------------------------------

// Distinct eigenvalues reached from x whose terminal block contains both y
// and z. Distinctness is up to the terminal matching tolerance.
inline long count_reachable(std::shared_ptr<const Hamiltonian> h, const ScaleSchedule& schedule,
                            long x, long y, long z) {
    const EfpResult r = efp_run(h, schedule, x);
    const double tol = terminal_tolerance(schedule);
    std::vector<double> hits;
    for (const auto& p : r.eigenpairs) {
        const auto& terminal_block = p.history.back().block;
        if (!set_contains(terminal_block, y) || !set_contains(terminal_block, z)) continue;
        bool dup = false;
        for (double v : hits)
            if (std::abs(v - p.eigenvalue) <= tol) { dup = true; break; }
        if (!dup) hits.push_back(p.eigenvalue);
    }
    return static_cast<long>(hits.size());
}

// N_{y,z}: the sum over start sites
inline long count_reachable(std::shared_ptr<const Hamiltonian> h, const ScaleSchedule& schedule,
                            long y, long z) {
    long total = 0;
    for (long x = 0; x < h->volume(); ++x) total += count_reachable(h, schedule, x, y, z);
    return total;
}

}  // namespace anderson

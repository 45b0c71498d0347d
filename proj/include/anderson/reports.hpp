#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ensemble.hpp"
#include "json_io.hpp"

namespace anderson {

// Every CLI subcommand renders through the functions here, and the golden
// fixtures hash the same strings, so "byte-identical rerun" is checkable
// without invoking the binary.

inline const char* schedule_kind_name(ScheduleKind k) {
    return k == ScheduleKind::Paper ? "paper" : "geometric";
}

inline ScheduleKind schedule_kind_from(const std::string& s) {
    if (s == "paper") return ScheduleKind::Paper;
    if (s == "geometric") return ScheduleKind::Geometric;
    throw std::invalid_argument("unknown schedule kind: " + s);
}

inline Json finite_or_null(double x) {
    if (std::isfinite(x)) return Json(x);
    return Json(nullptr);
}

inline Json config_to_json(const ExperimentConfig& cfg) {
    Json j;
    j["d"] = cfg.d;
    j["sides"] = json_list(cfg.sides);
    j["N"] = cfg.N;
    j["gamma"] = cfg.gamma;
    j["L0"] = cfg.L0;
    j["alpha"] = cfg.alpha;
    j["schedule"] = schedule_kind_name(cfg.kind);
    j["ratio"] = cfg.ratio;
    j["trials"] = cfg.trials;
    j["seed"] = cfg.base_seed;
    return j;
}

inline Json schedule_to_json(const ScaleSchedule& s) {
    Json j;
    j["k_bar"] = s.k_bar;
    j["truncated_at"] = s.truncated_at;
    j["max_scale"] = s.max_scale();
    Json L = Json::array(), eps = Json::array(), r = Json::array();
    for (int k = 0; k < static_cast<int>(s.L_ladder.size()); ++k) L.push_back(s.L(k));
    for (int k = 1; k < static_cast<int>(s.eps_ladder.size()); ++k) eps.push_back(s.eps(k));
    for (int k = 1; k < static_cast<int>(s.r_ladder.size()); ++k) r.push_back(s.r(k));
    j["L"] = L;
    j["eps"] = eps;
    j["r"] = r;
    j["strict_regime"] = s.strict_regime();
    j["warnings"] = json_list(s.warnings);
    return j;
}

namespace detail {

inline Hamiltonian config_hamiltonian(const ExperimentConfig& cfg) {
    const LatticeGeometry g = config_geometry(cfg);
    return build_hamiltonian(g, sample_disorder(g, cfg.N, cfg.base_seed), cfg.gamma);
}

inline Json block_to_json(const Block& b) {
    Json j;
    j["scale"] = b.scale;
    j["sites"] = json_list(b.sites);
    j["collar"] = json_list(b.collar);
    j["diameter"] = b.diameter;
    j["isolated"] = b.isolated;
    j["collar_is_lattice"] = b.collar_is_lattice;
    j["n_hat"] = b.n_hat;
    j["n_hat_energy"] = b.n_hat_energy;
    return j;
}

inline Json steps_to_json(const std::vector<BranchStep>& steps) {
    Json a = Json::array();
    for (const auto& s : steps) {
        Json j;
        j["scale"] = s.scale;
        j["energy"] = s.energy;
        j["snap_grid"] = s.snap_grid;
        j["block"] = json_list(s.block);
        j["n_hat"] = s.n_hat;
        a.push_back(std::move(j));
    }
    return a;
}

}  // namespace detail

// --------------------------------------------------------------------------
// sample
// --------------------------------------------------------------------------

inline std::string render_sample_report(const ExperimentConfig& cfg, bool with_matrix) {
    const Hamiltonian h = detail::config_hamiltonian(cfg);
    Json j;
    j["tool"] = "sample";
    j["config"] = config_to_json(cfg);
    j["volume"] = h.volume();
    j["spectral_upper"] = h.spectral_upper();
    j["levels"] = json_list(h.disorder.levels);
    Json vals = Json::array(), diag = Json::array();
    for (long x = 0; x < h.volume(); ++x) {
        vals.push_back(h.disorder.value(x));
        diag.push_back(h.diagonal(x));
    }
    j["values"] = std::move(vals);
    j["diagonal"] = std::move(diag);
    if (with_matrix) j["matrix"] = json_matrix(h.matrix);
    return render_json(j);
}

// --------------------------------------------------------------------------
// decompose
// --------------------------------------------------------------------------

// site >= 0 or site == -1 (center): cascade follows the block's fixed points;
// explicit energy: the cascade holds that energy at every scale.
inline std::string render_decompose_report(const ExperimentConfig& cfg, long site,
                                           std::optional<double> energy) {
    auto h = std::make_shared<const Hamiltonian>(detail::config_hamiltonian(cfg));
    const ScaleSchedule sched = config_schedule(cfg);
    const long center = site >= 0 ? site : h->volume() / 2;
    if (center >= h->volume()) throw std::invalid_argument("site outside the lattice");

    MultiscaleState st = [&] {
        if (!energy) return run_center_cascade(h, sched, center);
        MultiscaleState s = init_cascade(h, sched, *energy);
        while (!s.terminal && s.scale() + 1 <= sched.max_scale() &&
               !s.level(s.scale()).blocks.empty())
            advance_scale(s, *energy);
        return s;
    }();

    Json j;
    j["tool"] = "decompose";
    j["config"] = config_to_json(cfg);
    j["schedule"] = schedule_to_json(sched);
    j["policy"] = energy ? "fixed-energy" : "center-following";
    j["E1"] = st.level(1).energy;
    j["site"] = energy ? Json(nullptr) : Json(center);
    j["terminal"] = st.terminal;
    Json levels = Json::array();
    for (int k = 1; k <= st.scale(); ++k) {
        const ScaleLevel& lvl = st.level(k);
        Json lj;
        lj["k"] = lvl.k;
        lj["energy"] = lvl.energy;
        lj["resonant_sites"] = json_list(lvl.resonant_sites);
        Json blocks = Json::array();
        for (const auto& b : lvl.blocks) blocks.push_back(detail::block_to_json(b));
        lj["blocks"] = std::move(blocks);
        levels.push_back(std::move(lj));
    }
    j["levels"] = std::move(levels);
    Json removed = Json::array();
    for (const auto& rec : st.removed) {
        Json rj;
        rj["removed_in_step"] = rec.removed_in_step;
        rj["sites"] = json_list(rec.block.sites);
        removed.push_back(std::move(rj));
    }
    j["removed"] = std::move(removed);
    j["log"] = json_list(st.log);
    return render_json(j);
}

// --------------------------------------------------------------------------
// efp
// --------------------------------------------------------------------------

inline std::string render_efp_report(const ExperimentConfig& cfg, long start, bool with_vectors) {
    auto h = std::make_shared<const Hamiltonian>(detail::config_hamiltonian(cfg));
    const ScaleSchedule sched = config_schedule(cfg);
    if (start < 0 || start >= h->volume())
        throw std::invalid_argument("start site outside the lattice");
    const EfpResult r = efp_run(h, sched, start);

    Json j;
    j["tool"] = "efp";
    j["config"] = config_to_json(cfg);
    j["schedule"] = schedule_to_json(sched);
    j["start"] = start;
    j["E1"] = h->diagonal(start);
    j["terminal_branches"] = r.terminal_branches;
    j["overflow_dropped"] = r.overflow_dropped;
    Json pairs = Json::array();
    for (const auto& p : r.eigenpairs) {
        Json pj;
        pj["eigenvalue"] = p.eigenvalue;
        pj["residual"] = p.residual;
        pj["psi_norm_pre"] = p.psi_norm_pre;
        pj["k_hat"] = p.k_hat;
        pj["cluster"] = p.cluster;
        pj["via_fallback"] = p.via_fallback;
        pj["history"] = detail::steps_to_json(p.history);
        if (with_vectors) pj["psi"] = json_vector(p.psi);
        pairs.push_back(std::move(pj));
    }
    j["eigenpairs"] = std::move(pairs);
    Json dead = Json::array();
    for (const auto& br : r.dead_branches) {
        Json dj;
        dj["fate"] = br.fate;
        dj["steps"] = detail::steps_to_json(br.steps);
        dead.push_back(std::move(dj));
    }
    j["dead_branches"] = std::move(dead);
    j["log"] = json_list(r.log);
    return render_json(j);
}

// --------------------------------------------------------------------------
// sweep
// --------------------------------------------------------------------------

inline Json movement_to_json(const MovementDecomposition& m) {
    Json j;
    j["k"] = m.k;
    j["lambda"] = m.lambda;
    j["lambda0"] = m.lambda0;
    j["lambda_tie"] = m.lambda_tie;
    j["E_k"] = m.E_k;
    j["E_next"] = m.E_next;
    j["n_hat"] = m.n_hat;
    j["n_hat_prev"] = m.n_hat_prev;
    j["n_hat_cur"] = m.n_hat_cur;
    j["n_hat_f"] = m.n_hat_f;
    j["ybar"] = m.ybar;
    j["v_ybar"] = m.v_ybar;
    j["a_ybar_norm"] = m.a_ybar_norm;
    j["norm_rank_one"] = m.norm_rank_one;
    j["norm_C"] = m.norm_C;
    j["norm_R"] = m.norm_R;
    j["bound_C"] = m.bound_C;
    j["bound_R"] = m.bound_R;
    j["spread_rank_one"] = m.spread_rank_one;
    j["spread_f"] = m.spread_f;
    j["recon_residual_factored"] = m.recon_residual_factored;
    j["recon_residual_dense"] = m.recon_residual_dense;
    j["rank_one"] = json_matrix(m.rank_one);
    j["constant_part"] = json_matrix(m.constant_part);
    j["remainder"] = json_matrix(m.remainder);
    j["f_cur_E"] = json_matrix(m.f_cur_E);
    return j;
}

inline Json sweep_to_json(const SweepReport& s) {
    Json j;
    j["k"] = s.k;
    j["ybar"] = s.ybar;
    j["lambda"] = s.lambda;
    j["E_next"] = s.E_next;
    j["n_hat"] = s.n_hat;
    j["n_hat_prev"] = s.n_hat_prev;
    j["a_ybar_norm"] = s.a_ybar_norm;
    j["valid_entries"] = s.valid_entries;
    j["unchanged"] = s.unchanged;
    j["monotone"] = s.monotone;
    j["min_inverse_gap"] = finite_or_null(s.min_inverse_gap);
    Json entries = Json::array();
    for (const auto& e : s.entries) {
        Json ej;
        ej["level"] = e.level;
        ej["v"] = e.v;
        ej["valid"] = e.valid;
        ej["n_hat_cur"] = e.n_hat_cur;
        ej["n_hat_f"] = e.n_hat_f;
        ej["spread_f"] = e.spread_f;
        ej["norm_R"] = e.norm_R;
        if (!e.note.empty()) ej["note"] = e.note;
        entries.push_back(std::move(ej));
    }
    j["entries"] = std::move(entries);
    j["log"] = json_list(s.log);
    return j;
}

inline std::string render_sweep_report(const ExperimentConfig& cfg, long site) {
    auto h = std::make_shared<const Hamiltonian>(detail::config_hamiltonian(cfg));
    const ScaleSchedule sched = config_schedule(cfg);
    const long center = site >= 0 ? site : h->volume() / 2;
    if (center >= h->volume()) throw std::invalid_argument("site outside the lattice");
    const MovementSetup setup = prepare_movement_trial(h, sched, center);

    Json j;
    j["tool"] = "sweep";
    j["config"] = config_to_json(cfg);
    j["site"] = center;
    j["valid"] = setup.ok;
    if (!setup.ok) {
        j["note"] = setup.note;
        return render_json(j);
    }
    const Block& b =
        setup.state.level(2).blocks[static_cast<std::size_t>(setup.block_index)];
    j["E2"] = setup.state.energy();
    j["E_next"] = setup.E_next;
    j["block"] = json_list(b.sites);
    try {
        j["decomposition"] = movement_to_json(movement_decomposition(setup.state, b, setup.E_next));
        j["sweep"] = sweep_to_json(sweep_vbar(setup.state, b, setup.E_next));
    } catch (const InvalidExperiment& ex) {
        j["valid"] = false;
        j["note"] = ex.what();
    }
    return render_json(j);
}

// --------------------------------------------------------------------------
// stats
// --------------------------------------------------------------------------

inline Json accumulator_to_json(const Accumulator& a) {
    Json j;
    j["n"] = a.n;
    j["mean"] = a.mean;
    j["stderr"] = a.standard_error();
    return j;
}

inline Json hist_to_json(const std::map<long, long>& h) {
    Json j = Json::object();
    for (const auto& [key, count] : h) j[std::to_string(key)] = count;
    return j;
}

inline Json ensemble_to_json(const EnsembleReport& r) {
    const ExperimentConfig& cfg = r.config;
    Json j;
    j["tool"] = "stats";
    j["config"] = config_to_json(cfg);
    j["observables"] = Json{{"dos", cfg.with_dos},
                            {"correlator", cfg.with_correlator},
                            {"spacing", cfg.with_spacing},
                            {"blocks", cfg.with_blocks},
                            {"strict", cfg.with_strict},
                            {"efp_crosscheck", cfg.with_efp_crosscheck}};
    j["trials_done"] = r.trials_done;

    if (cfg.with_dos) {
        Json cells = Json::array();
        for (const auto& c : r.dos) {
            Json cj;
            cj["energy"] = c.energy;
            cj["delta"] = c.delta;
            cj["count"] = accumulator_to_json(c.count);
            cells.push_back(std::move(cj));
        }
        j["dos"] = std::move(cells);
        j["dos_additivity_ok"] = r.dos_additivity_ok;
    }
    if (cfg.with_correlator) {
        Json bins = Json::array();
        for (const auto& b : r.correlator) {
            Json bj;
            bj["distance"] = b.distance;
            bj["sum"] = accumulator_to_json(b.sum);
            bj["pairs"] = b.pairs;
            bj["exceed"] = b.exceed;
            bj["center_pair"] = json_list(b.center_pair);
            if (cfg.with_efp_crosscheck)
                bj["crosscheck_diff"] = accumulator_to_json(b.crosscheck_diff);
            bins.push_back(std::move(bj));
        }
        j["correlator"] = std::move(bins);
    }
    if (cfg.exceedance_min_distance > 0) {
        j["exceedance"] = Json{{"min_distance", cfg.exceedance_min_distance},
                               {"pairs", r.exceed_pairs},
                               {"hits", r.exceed_hits}};
    }
    if (cfg.with_spacing) {
        Json sj;
        sj["value"] = accumulator_to_json(r.spacing.value);
        Json pb = Json::array();
        for (const auto& [delta, p] : r.spacing.p_below)
            pb.push_back(Json{{"delta", delta}, {"p_below", p}});
        sj["p_below"] = std::move(pb);
        sj["per_trial"] = json_list(r.spacing.per_trial);
        j["spacing"] = std::move(sj);
    }
    if (cfg.with_blocks || cfg.with_strict) {
        Json ks = Json::array();
        for (const auto& bs : r.blocks) {
            Json bj;
            bj["k"] = bs.k;
            bj["r_fraction"] = accumulator_to_json(bs.r_fraction);
            bj["blocks_seen"] = bs.blocks_seen;
            bj["isolated_seen"] = bs.isolated_seen;
            bj["trials_reaching"] = bs.trials_reaching;
            bj["size_hist"] = hist_to_json(bs.size_hist);
            bj["diam_hist"] = hist_to_json(bs.diam_hist);
            ks.push_back(std::move(bj));
        }
        j["blocks"] = std::move(ks);
        Json trajs = Json::array();
        for (const auto& t : r.nhat_trajectories) {
            Json tj = Json::array();
            for (const auto& s : t)
                tj.push_back(Json{{"k", s.k},
                                  {"n_hat", s.n_hat},
                                  {"size", s.size},
                                  {"diameter", s.diameter},
                                  {"isolated", s.isolated}});
            trajs.push_back(std::move(tj));
        }
        j["nhat_trajectories"] = std::move(trajs);
    }
    if (cfg.with_strict) {
        const StrictRates& s = r.strict;
        j["strict"] = Json{{"lip_total", s.lip_total},
                           {"lip_pass", s.lip_pass},
                           {"g_pairs", s.g_pairs},
                           {"g_pass", s.g_pass},
                           {"g_untestable", s.g_untestable},
                           {"trunc_total", s.trunc_total},
                           {"trunc_pass", s.trunc_pass},
                           {"infl_total", s.infl_total},
                           {"infl_pass", s.infl_pass},
                           {"skipped_near_singular", s.skipped_near_singular},
                           {"worst_lip_ratio", s.worst_lip_ratio},
                           {"worst_g_excess", s.worst_g_excess},
                           {"worst_trunc_ratio", s.worst_trunc_ratio},
                           {"min_infl_margin", finite_or_null(s.min_infl_margin)}};
    }
    Json fails = Json::array();
    for (const auto& f : r.failures)
        fails.push_back(Json{{"trial", f.trial}, {"what", f.what}});
    j["failures"] = std::move(fails);
    j["log"] = json_list(r.log);
    return j;
}

inline std::string render_stats_report(const ExperimentConfig& cfg) {
    return render_json(ensemble_to_json(run_ensemble(cfg)));
}

// flat CSV per observable; numbers use the same shortest-round-trip format
// as the JSON reports
namespace detail {
inline std::string csv_num(double x) { return Json(x).dump(); }
}  // namespace detail

inline std::string csv_dos(const EnsembleReport& r) {
    std::string out = "energy,delta,mean,stderr,trials\n";
    for (const auto& c : r.dos)
        out += detail::csv_num(c.energy) + "," + detail::csv_num(c.delta) + "," +
               detail::csv_num(c.count.mean) + "," + detail::csv_num(c.count.standard_error()) +
               "," + std::to_string(c.count.n) + "\n";
    return out;
}

inline std::string csv_correlator(const EnsembleReport& r) {
    std::string out = "distance,mean,stderr,pairs,exceed\n";
    for (const auto& b : r.correlator)
        out += std::to_string(b.distance) + "," + detail::csv_num(b.sum.mean) + "," +
               detail::csv_num(b.sum.standard_error()) + "," + std::to_string(b.pairs) + "," +
               std::to_string(b.exceed) + "\n";
    return out;
}

inline std::string csv_spacing(const EnsembleReport& r) {
    std::string out = "delta,p_below,trials\n";
    for (const auto& [delta, p] : r.spacing.p_below)
        out += detail::csv_num(delta) + "," + detail::csv_num(p) + "," +
               std::to_string(static_cast<long>(r.spacing.per_trial.size())) + "\n";
    return out;
}

inline std::string csv_blocks(const EnsembleReport& r) {
    std::string out = "k,r_fraction_mean,r_fraction_stderr,blocks_seen,isolated_seen,trials\n";
    for (const auto& bs : r.blocks)
        out += std::to_string(bs.k) + "," + detail::csv_num(bs.r_fraction.mean) + "," +
               detail::csv_num(bs.r_fraction.standard_error()) + "," +
               std::to_string(bs.blocks_seen) + "," + std::to_string(bs.isolated_seen) + "," +
               std::to_string(bs.trials_reaching) + "\n";
    return out;
}

}  // namespace anderson

#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "lattice.hpp"

namespace anderson {

constexpr double kAlphaDefault = 1.5;
constexpr double kGeometricRatioDefault = 0.125;
constexpr double kScheduleUnderflow = 1e-300;

enum class ScheduleKind { Paper, Geometric };

struct ScheduleParams {
    double gamma = 0.0;
    int N = 2;
    int L0 = 1;
    double alpha = kAlphaDefault;
    ScheduleKind kind = ScheduleKind::Geometric;
    double ratio = kGeometricRatioDefault;  // geometric only, must be <= 1/4
    long diameter = 0;                      // l1 diameter of the target rectangle
};

// Scale ladder: L_k = L0 * 2^k, window widths eps_k, decay rates r_k, and the
// terminal step k_bar (smallest k with 5.1 * L_{k-1} >= diam). Ladders carry
// one extra rung past k_bar because step k consumes eps_{k+1} lookahead.
struct ScaleSchedule {
    ScheduleParams params;
    int k_bar = 1;
    int truncated_at = 0;  // 0 = no truncation; otherwise first unusable scale
    std::vector<double> L_ladder;    // index k in [0, k_bar+1]
    std::vector<double> eps_ladder;  // index k in [1, k_bar+1]
    std::vector<double> r_ladder;    // index k in [1, k_bar+1]
    std::vector<std::string> warnings;

    double L(int k) const { return L_ladder.at(k); }
    double eps(int k) const { return eps_ladder.at(k); }
    double r(int k) const { return r_ladder.at(k); }
    int max_scale() const { return truncated_at > 0 ? truncated_at - 1 : k_bar; }

    // range at which resonant sites merge into blocks in step k
    double component_range(int k) const { return std::pow(L(k), params.alpha); }
    // collar reach parameters
    double collar_reach(int k) const { return 2.0 * L(k); }
    double double_collar_reach(int k) const {
        return std::pow(L(k), std::sqrt(params.alpha));
    }

    bool strict_regime() const {
        const double eps_grid = 1.0 / (params.N - 1);
        return params.gamma <= std::pow(eps_grid, 20);
    }
};

inline ScaleSchedule make_schedule(const ScheduleParams& p) {
    if (p.N < 2) throw std::invalid_argument("schedule: N must be >= 2");
    if (p.L0 < 1) throw std::invalid_argument("schedule: L0 must be >= 1");
    if (p.gamma < 0) throw std::invalid_argument("schedule: gamma must be >= 0");
    if (p.kind == ScheduleKind::Geometric && !(p.ratio > 0 && p.ratio <= 0.25))
        throw std::invalid_argument("schedule: geometric ratio must be in (0, 1/4]");

    ScaleSchedule s;
    s.params = p;

    // terminal step from the geometry
    int k_bar = 1;
    double Lk = static_cast<double>(p.L0);
    while (5.1 * Lk < static_cast<double>(p.diameter)) {
        Lk *= 2.0;
        ++k_bar;
        if (k_bar > 60) throw std::invalid_argument("schedule: diameter too large");
    }
    s.k_bar = k_bar;

    const int top = k_bar + 1;
    s.L_ladder.resize(top + 1);
    s.eps_ladder.assign(top + 1, 0.0);
    s.r_ladder.assign(top + 1, 0.0);
    s.L_ladder[0] = static_cast<double>(p.L0);
    for (int k = 1; k <= top; ++k) s.L_ladder[k] = s.L_ladder[k - 1] * 2.0;

    const double eps1 = 1.0 / (3.0 * (p.N - 1));
    s.eps_ladder[1] = eps1;
    for (int k = 2; k <= top; ++k) {
        double e;
        if (p.kind == ScheduleKind::Geometric) {
            e = s.eps_ladder[k - 1] * p.ratio;
        } else {
            e = p.gamma > 0 ? std::pow(p.gamma, 1.6 * s.L_ladder[k]) : 0.0;
        }
        if (!(e >= kScheduleUnderflow)) {
            s.truncated_at = k;
            s.warnings.push_back("eps ladder underflows double precision at scale " +
                                 std::to_string(k) + "; schedule truncated");
            break;
        }
        s.eps_ladder[k] = e;
    }

    s.r_ladder[1] = 0.9;
    for (int k = 2; k <= top; ++k)
        s.r_ladder[k] = s.r_ladder[k - 1] * (1.0 - 6.0 * std::pow(s.L_ladder[k - 1], 1.0 - p.alpha));
    for (int k = 1; k <= top; ++k) {
        if (s.r_ladder[k] < 0.85) {
            s.warnings.push_back("decay rate r_" + std::to_string(k) +
                                 " fell below 0.85 (small L0 artifact)");
            break;  // one warning is enough, the ladder only decreases
        }
    }

    // shift-budget arithmetic: sum of later shifts must stay inside half the
    // current window, else energy drift can leak resonances between scales
    const int usable = s.max_scale();
    for (int j = 1; j <= usable; ++j) {
        double tail = 0.0;
        for (int i = j; i <= usable; ++i) tail += s.eps_ladder[i] / 3.0;
        if (!(tail < s.eps_ladder[j] / 2.0)) {
            s.warnings.push_back("shift budget violated at scale " + std::to_string(j));
            break;
        }
    }
    for (int k = 1; k < usable; ++k) {
        if (!(s.eps_ladder[k + 1] < s.eps_ladder[k] / 3.0)) {
            s.warnings.push_back("window ladder not contracting by 1/3 at scale " +
                                 std::to_string(k));
            break;
        }
    }
    return s;
}

inline ScaleSchedule make_schedule(const LatticeGeometry& g, double gamma, int N,
                                   ScheduleKind kind = ScheduleKind::Geometric, int L0 = 1,
                                   double ratio = kGeometricRatioDefault,
                                   double alpha = kAlphaDefault) {
    ScheduleParams p;
    p.gamma = gamma;
    p.N = N;
    p.L0 = L0;
    p.alpha = alpha;
    p.kind = kind;
    p.ratio = ratio;
    p.diameter = g.diameter();
    return make_schedule(p);
}

}  // namespace anderson

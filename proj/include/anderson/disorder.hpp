#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "lattice.hpp"
#include "rng.hpp"

namespace anderson {

// iid potential v_x uniform on {0, 1/(N-1), ..., 1}. Levels are stored as
// integers so a realization can be serialized and replayed bit-for-bit.
struct DisorderRealization {
    int N = 2;                 // number of levels, >= 2
    std::uint64_t seed = 0;
    std::vector<int> levels;   // per site, in [0, N-1]

    double value(long site) const { return static_cast<double>(levels[site]) / (N - 1); }
};

inline DisorderRealization sample_disorder(const LatticeGeometry& g, int N, std::uint64_t seed) {
    if (N < 2) throw std::invalid_argument("disorder resolution N must be >= 2");
    DisorderRealization d;
    d.N = N;
    d.seed = seed;
    d.levels.resize(g.volume());
    SplitMix64 rng(seed);
    for (auto& l : d.levels) l = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(N)));
    return d;
}

}  // namespace anderson

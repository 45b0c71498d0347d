#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hamiltonian.hpp"
#include "spectral.hpp"

namespace anderson {

// Headline observables. All of them read the oracle spectrum so they stay
// decoupled from the cascade; callers that already diagonalized H pass the
// Spectrum to avoid repeating the O(n^3) solve.

// N(I_delta(E)): eigenvalue count in the closed window of half-width delta.
inline long dos_observable(const Spectrum& s, double energy, double delta) {
    if (delta < 0) throw std::invalid_argument("delta must be >= 0");
    return count_in_window(s.values, SpectralWindow{energy, delta});
}

inline long dos_observable(const Hamiltonian& h, double energy, double delta) {
    return dos_observable(dense_spectrum(h.matrix), energy, delta);
}

struct CorrelatorValue {
    double sum = 0.0;  // sum_beta |phi_beta(x) phi_beta(y)|
    double X = 0.0;    // sum * gamma^{-|x-y|/5}; the exceedance statistic
    long distance = 0;
};

inline CorrelatorValue correlator_observable(const Spectrum& s, const LatticeGeometry& g,
                                             long x, long y, double gamma) {
    if (x < 0 || y < 0 || x >= g.volume() || y >= g.volume())
        throw std::invalid_argument("correlator sites outside the lattice");
    CorrelatorValue c;
    c.distance = g.l1_distance(x, y);
    for (long beta = 0; beta < s.values.size(); ++beta)
        c.sum += std::abs(s.vectors(x, beta) * s.vectors(y, beta));
    if (x == y)
        c.X = c.sum;  // completeness: equals 1 for an orthonormal basis
    else if (gamma == 0.0)
        c.X = 0.0;  // site-basis eigenvectors, correlator vanishes
    else
        c.X = c.sum * std::pow(gamma, -static_cast<double>(c.distance) / 5.0);
    return c;
}

inline CorrelatorValue correlator_observable(const Hamiltonian& h, long x, long y) {
    return correlator_observable(dense_spectrum(h.matrix), h.geometry, x, y, h.gamma);
}

// min over ordered pairs of |E_beta - E_betatilde|; values from the oracle
// are already sorted.
inline double min_spacing_observable(const Spectrum& s) {
    if (s.values.size() < 2) throw std::invalid_argument("spacing needs at least two levels");
    return min_spacing(s.values);
}

inline double min_spacing_observable(const Hamiltonian& h) {
    return min_spacing_observable(dense_spectrum(h.matrix));
}

}  // namespace anderson

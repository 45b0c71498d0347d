#pragma once

#include <Eigen/Dense>

#include "disorder.hpp"
#include "lattice.hpp"

namespace anderson {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// H = H0 - gamma*J on the rectangle: diagonal 2*d*gamma + v_x, off-diagonal
// -gamma exactly on nearest-neighbor pairs. Dense storage; volumes here are
// desk scale (|Lambda| <= ~4096).
struct Hamiltonian {
    LatticeGeometry geometry;
    DisorderRealization disorder;
    double gamma = 0.0;
    Mat matrix;

    long volume() const { return geometry.volume(); }

    double diagonal(long site) const {
        return 2.0 * geometry.d * gamma + disorder.value(site);
    }

    // spectrum is contained in [0, 1 + 4*d*gamma]
    double spectral_upper() const { return 1.0 + 4.0 * geometry.d * gamma; }
};

inline Hamiltonian build_hamiltonian(const LatticeGeometry& g, const DisorderRealization& dis,
                                     double gamma) {
    if (gamma < 0) throw std::invalid_argument("gamma must be >= 0");
    if (static_cast<long>(dis.levels.size()) != g.volume())
        throw std::invalid_argument("disorder size does not match lattice volume");
    Hamiltonian h;
    h.geometry = g;
    h.disorder = dis;
    h.gamma = gamma;
    const long n = g.volume();
    h.matrix = Mat::Zero(n, n);
    for (long x = 0; x < n; ++x) {
        h.matrix(x, x) = h.diagonal(x);
        for (long y : g.neighbors(x)) h.matrix(x, y) = -gamma;
    }
    return h;
}

}  // namespace anderson

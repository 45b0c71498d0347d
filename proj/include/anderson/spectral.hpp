#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace anderson {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Closed interval I_w(E) = [E - w, E + w]. Window membership is always the
// closed inequality; every resonance test in the cascade goes through here.
struct SpectralWindow {
    double center = 0.0;
    double half_width = 0.0;

    double lo() const { return center - half_width; }
    double hi() const { return center + half_width; }
    bool contains(double x) const {
        return x >= center - half_width && x <= center + half_width;
    }
    SpectralWindow widened(double factor) const { return {center, half_width * factor}; }
};

struct Spectrum {
    Vec values;   // ascending
    Mat vectors;  // orthonormal columns, vectors.col(i) <-> values(i)
};

inline double symmetry_defect(const Mat& m) {
    return (m - m.transpose()).cwiseAbs().maxCoeff();
}

// Dense symmetric eigendecomposition (the oracle primitive). Rejects visibly
// non-symmetric input instead of silently symmetrizing it.
inline Spectrum dense_spectrum(const Mat& m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("dense_spectrum: matrix not square");
    if (m.rows() == 0) return {Vec(0), Mat(0, 0)};
    const double scale = m.cwiseAbs().maxCoeff();
    if (symmetry_defect(m) > 1e-12 * (scale > 0 ? scale : 1.0))
        throw std::invalid_argument("dense_spectrum: matrix not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat> es(m);
    if (es.info() != Eigen::Success) throw std::runtime_error("dense_spectrum: solver failed");
    return {es.eigenvalues(), es.eigenvectors()};
}

inline double spectral_distance(const Vec& eigenvalues, double E) {
    double best = std::numeric_limits<double>::infinity();
    for (long i = 0; i < eigenvalues.size(); ++i)
        best = std::min(best, std::abs(eigenvalues(i) - E));
    return best;
}

inline double spectral_distance(const Mat& m, double E) {
    return spectral_distance(dense_spectrum(m).values, E);
}

inline int count_in_window(const Vec& eigenvalues, const SpectralWindow& w) {
    int n = 0;
    for (long i = 0; i < eigenvalues.size(); ++i)
        if (w.contains(eigenvalues(i))) ++n;
    return n;
}

inline int count_in_window(const Mat& m, const SpectralWindow& w) {
    return count_in_window(dense_spectrum(m).values, w);
}

// minimum nearest-neighbor gap of a (sorted or unsorted) set of eigenvalues
inline double min_spacing(Vec values) {
    if (values.size() < 2) return std::numeric_limits<double>::infinity();
    std::sort(values.data(), values.data() + values.size());
    double best = std::numeric_limits<double>::infinity();
    for (long i = 0; i + 1 < values.size(); ++i)
        best = std::min(best, values(i + 1) - values(i));
    return best;
}

}  // namespace anderson

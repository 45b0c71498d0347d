#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <limits>
#include <vector>

#include "errors.hpp"
#include "spectral.hpp"

namespace anderson {

// Pinned solver tolerances. Changing these invalidates frozen test values.
constexpr double kTolFixedPoint = 1e-12;   // absolute fixed-point convergence
constexpr double kTolLift = 1e-9;          // relative lift residual contract
constexpr double kMarginFloorRel = 1e-12;  // elimination margin floor, relative to ||K||
constexpr double kFixedPointCluster = 10 * kTolFixedPoint;  // multiplicity cluster width

// Index partition for a Schur elimination. Both lists are sorted, disjoint,
// and together cover [0, n) of the operator they are applied to.
struct BlockPartition {
    std::vector<long> keep;
    std::vector<long> eliminate;
};

inline Mat submatrix(const Mat& m, const std::vector<long>& rows, const std::vector<long>& cols) {
    Mat out(rows.size(), cols.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = m(rows[i], cols[j]);
    return out;
}

inline void validate_partition(const BlockPartition& p, long n) {
    std::vector<char> seen(n, 0);
    auto mark = [&](const std::vector<long>& v) {
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (v[i] < 0 || v[i] >= n) throw std::invalid_argument("partition index out of range");
            if (i > 0 && v[i] <= v[i - 1]) throw std::invalid_argument("partition not sorted");
            if (seen[v[i]]++) throw std::invalid_argument("partition indices overlap");
        }
    };
    mark(p.keep);
    mark(p.eliminate);
    if (static_cast<long>(p.keep.size() + p.eliminate.size()) != n)
        throw std::invalid_argument("partition does not cover the index set");
}

inline double operator_norm(const Mat& m) {
    if (m.rows() == 0 || m.cols() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Mat> es(Mat(m.transpose() * m), Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

// Reusable pieces of one elimination: the window sweeps below evaluate
// F_lambda many times against a fixed partition, so D's spectrum (margins,
// pole locations) is computed once.
struct EliminationContext {
    Mat A;       // keep x keep
    Mat B;       // keep x elim coupling; C = B^T by symmetry
    Mat D;       // elim x elim
    Vec d_eigs;  // ascending eigenvalues of D
    double off_diag_norm = 0.0;  // gamma-tilde = ||B||
    double norm_K = 0.0;         // scale reference for the margin floor

    long n_keep() const { return A.rows(); }
    long n_elim() const { return D.rows(); }

    double margin(double lambda) const {
        if (n_elim() == 0) return std::numeric_limits<double>::infinity();
        return spectral_distance(d_eigs, lambda);
    }

    double margin_floor(double floor_rel) const {
        return floor_rel * (norm_K > 0 ? norm_K : 1.0);
    }

    // F_lambda = A - B (D - lambda)^{-1} B^T, with the margin floor enforced.
    // Zero coupling short-circuits before the margin check: B = 0 makes the
    // correction vanish identically, poles or not.
    Mat evaluate(double lambda, double floor_rel = kMarginFloorRel) const {
        if (n_elim() == 0 || off_diag_norm == 0.0) return A;
        const double m = margin(lambda);
        const double floor = margin_floor(floor_rel);
        if (m < floor) throw NearSingularElimination(m, floor);
        Mat shifted = D;
        shifted.diagonal().array() -= lambda;
        Mat X = shifted.partialPivLu().solve(Mat(B.transpose()));
        Mat F = A - B * X;
        return 0.5 * (F + F.transpose());
    }
};

inline EliminationContext make_elimination_context(const Mat& K, const BlockPartition& p) {
    validate_partition(p, K.rows());
    EliminationContext ctx;
    ctx.A = submatrix(K, p.keep, p.keep);
    ctx.B = submatrix(K, p.keep, p.eliminate);
    ctx.D = submatrix(K, p.eliminate, p.eliminate);
    ctx.d_eigs = ctx.n_elim() > 0 ? dense_spectrum(ctx.D).values : Vec(0);
    ctx.off_diag_norm = operator_norm(ctx.B);
    ctx.norm_K = K.rows() > 0 ? K.cwiseAbs().rowwise().sum().maxCoeff() : 0.0;
    return ctx;
}

struct SchurComplement {
    Mat matrix;
    double lambda = 0.0;
    double elimination_margin = 0.0;  // min |eig(D) - lambda|
    double off_diag_norm = 0.0;       // ||B||
};

inline SchurComplement schur_complement(const Mat& K, const BlockPartition& p, double lambda,
                                        double floor_rel = kMarginFloorRel) {
    const EliminationContext ctx = make_elimination_context(K, p);
    SchurComplement out;
    out.matrix = ctx.evaluate(lambda, floor_rel);
    out.lambda = lambda;
    out.elimination_margin = std::min(ctx.margin(lambda), std::numeric_limits<double>::max());
    out.off_diag_norm = ctx.off_diag_norm;
    return out;
}

// Eigenvector lift: phi on the kept block extends to (phi, -(D-lambda)^{-1} B^T phi),
// returned in the original index order of K.
inline Vec lift_eigenvector(const Mat& K, const BlockPartition& p, double lambda,
                            const Vec& phi_keep, double floor_rel = kMarginFloorRel) {
    const EliminationContext ctx = make_elimination_context(K, p);
    if (phi_keep.size() != ctx.n_keep())
        throw std::invalid_argument("lift_eigenvector: phi size mismatch");
    Vec psi = Vec::Zero(K.rows());
    for (std::size_t i = 0; i < p.keep.size(); ++i) psi(p.keep[i]) = phi_keep(i);
    if (ctx.n_elim() > 0 && ctx.off_diag_norm > 0.0) {
        const double m = ctx.margin(lambda);
        const double floor = ctx.margin_floor(floor_rel);
        if (m < floor) throw NearSingularElimination(m, floor);
        Mat shifted = ctx.D;
        shifted.diagonal().array() -= lambda;
        Vec tail = -shifted.partialPivLu().solve(Vec(ctx.B.transpose() * phi_keep));
        for (std::size_t i = 0; i < p.eliminate.size(); ++i) psi(p.eliminate[i]) = tail(i);
    }
    return psi;
}

inline double eigen_residual(const Mat& K, double lambda, const Vec& psi) {
    return (K * psi - lambda * psi).norm() / psi.norm();
}

// F_lambda - F_E assembled from the second resolvent identity,
//   F_lambda - F_E = -(lambda - E) * B (D-lambda)^{-1} (D-E)^{-1} B^T,
// so exponentially small differences keep relative precision instead of
// dying in an O(1) subtraction.
inline Mat schur_shift_difference(const EliminationContext& ctx, double lambda, double E,
                                  double floor_rel = kMarginFloorRel) {
    if (ctx.n_elim() == 0 || ctx.off_diag_norm == 0.0 || lambda == E)
        return Mat::Zero(ctx.n_keep(), ctx.n_keep());
    const double floor = ctx.margin_floor(floor_rel);
    if (ctx.margin(lambda) < floor) throw NearSingularElimination(ctx.margin(lambda), floor);
    if (ctx.margin(E) < floor) throw NearSingularElimination(ctx.margin(E), floor);
    Mat shifted_l = ctx.D;
    shifted_l.diagonal().array() -= lambda;
    Mat shifted_e = ctx.D;
    shifted_e.diagonal().array() -= E;
    Mat Xl = shifted_l.partialPivLu().solve(Mat(ctx.B.transpose()));
    Mat Xe = shifted_e.partialPivLu().solve(Mat(ctx.B.transpose()));
    Mat M = -(lambda - E) * (Xl.transpose() * Xe);
    return 0.5 * (M + M.transpose());
}

// ---------------------------------------------------------------------------
// fixed-point eigenvalue extraction: all lambda in the window with
// lambda in spec F_lambda
// ---------------------------------------------------------------------------

struct FixedPointSolution {
    double lambda = 0.0;
    Vec phi;               // eigenvector of F_lambda on the kept block, unit norm
    double residual = 0.0; // |mu_j(lambda) - lambda|
    int branch = -1;       // eigenvalue branch index inside F
    int cluster = -1;      // solutions within the cluster width share an id
    int evaluations = 0;
    bool via_bisection = false;
};

struct FixedPointOptions {
    double tol = kTolFixedPoint;
    double floor_rel = kMarginFloorRel;
    int max_plain_iters = 32;
    int max_bisect_iters = 240;
};

namespace detail {

// Between consecutive poles of (D - lambda)^{-1} every eigenvalue branch
// mu_j(lambda) of F_lambda is non-increasing (dF/dlambda = -B(D-lambda)^{-2}B^T
// is negative semidefinite), so g_j = mu_j - lambda is strictly decreasing and
// has at most one root per bracket. Plain iteration lambda <- mu_j(lambda) is
// tried first and contracts when |mu_j'| < 1; bisection picks up the rest.
struct BranchRootFinder {
    const EliminationContext& ctx;
    const FixedPointOptions& opts;
    int evals = 0;

    Vec eigenvalues_at(double lambda) {
        ++evals;
        return dense_spectrum(ctx.evaluate(lambda, opts.floor_rel)).values;
    }

    // returns true and sets root on success
    bool solve_branch(int j, double a, double b, double ga, double gb, double& root,
                      bool& used_bisection) {
        used_bisection = false;
        if (ga < -opts.tol || gb > opts.tol) return false;
        if (ga <= 0) { root = a; return true; }  // touching at the left edge
        if (gb >= 0) { root = b; return true; }

        // fast path: branch-faithful plain iteration
        double x = 0.5 * (a + b);
        double prev_step = std::numeric_limits<double>::infinity();
        for (int it = 0; it < opts.max_plain_iters; ++it) {
            const Vec mu = eigenvalues_at(x);
            const double nx = mu(j);
            const double step = std::abs(nx - x);
            if (step <= opts.tol && nx >= a - opts.tol && nx <= b + opts.tol) {
                root = std::clamp(nx, a, b);
                return true;
            }
            if (nx < a || nx > b || step > 0.75 * prev_step + opts.tol) break;  // not contracting
            prev_step = step;
            x = nx;
        }

        // safeguarded path: bisection on the strictly decreasing g_j
        used_bisection = true;
        double lo = a, hi = b;
        for (int it = 0; it < opts.max_bisect_iters && (hi - lo) > opts.tol; ++it) {
            const double mid = 0.5 * (lo + hi);
            const Vec mu = eigenvalues_at(mid);
            const double g = mu(j) - mid;
            if (g > 0)
                lo = mid;
            else
                hi = mid;
        }
        root = 0.5 * (lo + hi);
        return true;
    }
};

}  // namespace detail

inline std::vector<FixedPointSolution> fixed_point_eigenvalues(
    const EliminationContext& ctx, const SpectralWindow& window,
    const FixedPointOptions& opts = {}) {
    const long nk = ctx.n_keep();
    std::vector<FixedPointSolution> out;
    if (nk == 0) return out;

    const double lo = window.lo(), hi = window.hi();

    // trivial elimination: F is constant, fixed points are its eigenvalues
    if (ctx.n_elim() == 0 || ctx.off_diag_norm == 0.0) {
        const Spectrum s = dense_spectrum(ctx.A);
        for (long j = 0; j < nk; ++j) {
            if (!window.contains(s.values(j))) continue;
            FixedPointSolution sol;
            sol.lambda = s.values(j);
            sol.phi = s.vectors.col(j);
            sol.branch = static_cast<int>(j);
            out.push_back(std::move(sol));
        }
    } else {
        const double floor = ctx.margin_floor(opts.floor_rel);
        if (ctx.margin(lo) < floor) throw NearSingularElimination(ctx.margin(lo), floor);
        if (ctx.margin(hi) < floor) throw NearSingularElimination(ctx.margin(hi), floor);

        // pole-free brackets: split the window at eigenvalues of D
        const double guard = std::max(16.0 * opts.tol, 2.0 * floor);
        std::vector<double> cuts{lo};
        for (long i = 0; i < ctx.d_eigs.size(); ++i) {
            const double pole = ctx.d_eigs(i);
            if (pole > lo + guard && pole < hi - guard) {
                cuts.push_back(pole - guard);
                cuts.push_back(pole + guard);
            }
        }
        cuts.push_back(hi);

        detail::BranchRootFinder finder{ctx, opts};
        for (std::size_t c = 0; c + 1 < cuts.size(); c += 2) {
            const double a = cuts[c], b = cuts[c + 1];
            if (b - a <= 0) continue;
            const Vec mu_a = finder.eigenvalues_at(a);
            const Vec mu_b = finder.eigenvalues_at(b);
            for (long j = 0; j < nk; ++j) {
                double root = 0.0;
                bool bisected = false;
                const int evals_before = finder.evals;
                if (!finder.solve_branch(static_cast<int>(j), a, b, mu_a(j) - a, mu_b(j) - b,
                                         root, bisected))
                    continue;
                const Spectrum s = dense_spectrum(ctx.evaluate(root, opts.floor_rel));
                FixedPointSolution sol;
                sol.lambda = root;
                sol.phi = s.vectors.col(j);
                sol.residual = std::abs(s.values(j) - root);
                sol.branch = static_cast<int>(j);
                sol.evaluations = finder.evals - evals_before + 1;
                sol.via_bisection = bisected;
                out.push_back(std::move(sol));
            }
        }
    }

    std::sort(out.begin(), out.end(), [](const FixedPointSolution& x, const FixedPointSolution& y) {
        return x.lambda != y.lambda ? x.lambda < y.lambda : x.branch < y.branch;
    });
    // multiplicity shows up as distinct branches converging to the same value;
    // cluster ids group them without collapsing the eigenpairs
    int cluster = -1;
    double cluster_anchor = std::numeric_limits<double>::quiet_NaN();
    for (auto& sol : out) {
        if (cluster < 0 || sol.lambda - cluster_anchor > kFixedPointCluster) {
            ++cluster;
            cluster_anchor = sol.lambda;
        }
        sol.cluster = cluster;
    }
    return out;
}

inline std::vector<FixedPointSolution> fixed_point_eigenvalues(
    const Mat& K, const BlockPartition& p, const SpectralWindow& window,
    const FixedPointOptions& opts = {}) {
    return fixed_point_eigenvalues(make_elimination_context(K, p), window, opts);
}

}  // namespace anderson

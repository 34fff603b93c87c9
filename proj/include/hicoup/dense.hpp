#ifndef HICOUP_DENSE_HPP
#define HICOUP_DENSE_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace hicoup {

using DenseMatrix = Eigen::MatrixXd;  // column-major
using Vector = Eigen::VectorXd;

/// Raised when a pivot falls below the singularity threshold.
class SingularMatrixError : public std::runtime_error {
public:
    explicit SingularMatrixError(const std::string& what) : std::runtime_error(what) {}
};

class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, int iterations)
        : std::runtime_error(what + " (" + std::to_string(iterations) + " iterations)"),
          iterations_(iterations) {}
    int iterations() const { return iterations_; }

private:
    int iterations_;
};

struct SvdResult {
    DenseMatrix U;
    Vector sigma;  // descending
    DenseMatrix V;
};

/// Thin SVD, A = U diag(sigma) V^T (divide and conquer, Jacobi below 16 columns).
/// Divide and conquer can return non-finite singular vectors when the spectrum
/// collapses to roundoff; one-sided Jacobi is used as a fallback then.
inline SvdResult svd(const DenseMatrix& a) {
    if (!a.allFinite()) throw std::invalid_argument("svd: non-finite entries");
    if (a.size() == 0)
        return {DenseMatrix(a.rows(), 0), Vector(0), DenseMatrix(a.cols(), 0)};
    Eigen::BDCSVD<DenseMatrix> dc(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (dc.info() == Eigen::Success && dc.matrixU().allFinite() && dc.matrixV().allFinite() &&
        dc.singularValues().allFinite())
        return {dc.matrixU(), dc.singularValues(), dc.matrixV()};
    Eigen::JacobiSVD<DenseMatrix> jac(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (jac.info() != Eigen::Success) throw ConvergenceError("svd: Jacobi fallback failed", 0);
    return {jac.matrixU(), jac.singularValues(), jac.matrixV()};
}

inline Vector singular_values(const DenseMatrix& a) {
    if (a.size() == 0) return Vector(0);
    const Vector s = Eigen::BDCSVD<DenseMatrix>(a).singularValues();
    if (s.allFinite()) return s;
    return Eigen::JacobiSVD<DenseMatrix>(a).singularValues();
}

/// Rank-r factorisation X Y^T of a |tau| x |sigma| block.
struct LowRank {
    DenseMatrix X;
    DenseMatrix Y;

    LowRank() = default;
    LowRank(Eigen::Index rows, Eigen::Index cols) : X(rows, 0), Y(cols, 0) {}
    LowRank(DenseMatrix x, DenseMatrix y) : X(std::move(x)), Y(std::move(y)) {
        if (X.cols() != Y.cols()) throw std::invalid_argument("LowRank: factor ranks differ");
    }

    Eigen::Index rows() const { return X.rows(); }
    Eigen::Index cols() const { return Y.rows(); }
    Eigen::Index rank() const { return X.cols(); }

    DenseMatrix dense() const { return X * Y.transpose(); }
    std::size_t storage() const { return static_cast<std::size_t>(rank() * (rows() + cols())); }

    /// Appends the columns of another factorisation (exact sum, rank adds up).
    void append(const DenseMatrix& x, const DenseMatrix& y, double alpha = 1.0) {
        const Eigen::Index k = rank();
        X.conservativeResize(Eigen::NoChange, k + x.cols());
        Y.conservativeResize(Eigen::NoChange, k + y.cols());
        X.rightCols(x.cols()) = alpha * x;
        Y.rightCols(y.cols()) = y;
    }
};

/// Truncation control: cap on the rank and optional relative singular value cutoff.
struct Truncation {
    int rank = 0;
    double rel_eps = 0.0;
};

/// Best rank-r approximation of X Y^T via QR of both factors and a small SVD.
/// A factorisation whose rank is already within the cap is returned unchanged
/// unless rel_eps asks for further compression.
inline LowRank truncate(const LowRank& lr, Truncation trunc) {
    if (trunc.rank < 0) throw std::invalid_argument("truncate: negative rank");
    const Eigen::Index k = lr.rank();
    if (k == 0) return lr;
    if (k <= trunc.rank && trunc.rel_eps <= 0.0) return lr;
    const Eigen::Index p = lr.rows(), q = lr.cols();
    if (p == 0 || q == 0) return LowRank(p, q);

    Eigen::HouseholderQR<DenseMatrix> qrx(lr.X), qry(lr.Y);
    const Eigen::Index kx = std::min(p, k), ky = std::min(q, k);
    const DenseMatrix rx = qrx.matrixQR().topRows(kx).triangularView<Eigen::Upper>();
    const DenseMatrix ry = qry.matrixQR().topRows(ky).triangularView<Eigen::Upper>();
    const DenseMatrix core = rx * ry.transpose();
    const SvdResult small = svd(core);
    const Vector& s = small.sigma;

    Eigen::Index keep = std::min<Eigen::Index>(trunc.rank, s.size());
    if (trunc.rel_eps > 0.0 && s.size() > 0) {
        Eigen::Index e = 0;
        while (e < s.size() && s[e] > trunc.rel_eps * s[0]) ++e;
        keep = std::min(keep, e);
    }
    const DenseMatrix qx = qrx.householderQ() * DenseMatrix::Identity(p, kx);
    const DenseMatrix qy = qry.householderQ() * DenseMatrix::Identity(q, ky);
    DenseMatrix x = qx * (small.U.leftCols(keep) * s.head(keep).asDiagonal());
    DenseMatrix y = qy * small.V.leftCols(keep);
    return LowRank(std::move(x), std::move(y));
}

/// Best rank-r approximation of a dense block.
inline LowRank truncate_dense(const DenseMatrix& a, Truncation trunc) {
    if (a.rows() == 0 || a.cols() == 0) return LowRank(a.rows(), a.cols());
    const SvdResult f = svd(a);
    Eigen::Index keep = std::min<Eigen::Index>(trunc.rank, f.sigma.size());
    if (trunc.rel_eps > 0.0) {
        Eigen::Index e = 0;
        while (e < f.sigma.size() && f.sigma[e] > trunc.rel_eps * f.sigma[0]) ++e;
        keep = std::min(keep, e);
    }
    return LowRank(f.U.leftCols(keep) * f.sigma.head(keep).asDiagonal(), f.V.leftCols(keep));
}

using MatVec = std::function<Vector(const Vector&)>;

struct NormEstimate {
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
};

inline constexpr std::uint64_t kNormSeed = 0x5EED;

/// Power iteration on M^T M; returns an estimate of the spectral norm of M.
inline NormEstimate spectral_norm_estimate(const MatVec& apply, const MatVec& apply_transpose,
                                           Eigen::Index dim, int max_iters = 200,
                                           double tol = 1e-8) {
    NormEstimate est;
    if (dim == 0) {
        est.converged = true;
        return est;
    }
    std::mt19937_64 rng(kNormSeed);
    std::normal_distribution<double> normal;
    Vector x(dim);
    for (Eigen::Index i = 0; i < dim; ++i) x[i] = normal(rng);
    x.normalize();
    double prev = 0.0;
    for (int it = 1; it <= max_iters; ++it) {
        const Vector y = apply(x);
        const double ny = y.norm();
        est.iterations = it;
        if (ny == 0.0) {
            est.value = 0.0;
            est.converged = true;
            return est;
        }
        Vector z = apply_transpose(y);
        const double nz = z.norm();
        // ||y|| <= sigma_1 and sqrt(||M^T y||) increases monotonically towards sigma_1
        const double current = std::sqrt(nz);
        est.value = std::max(est.value, std::max(ny, current));
        if (it > 1 && std::abs(current - prev) <= tol * current) {
            est.converged = true;
            return est;
        }
        prev = current;
        if (nz == 0.0) {
            est.converged = true;
            return est;
        }
        x = z / nz;
    }
    return est;
}

/// LU with partial pivoting, P A = L U, L unit lower triangular, packed in one matrix.
class DenseLU {
public:
    DenseLU() = default;

    explicit DenseLU(DenseMatrix a, double pivot_rel_tol = 1e-14) : lu_(std::move(a)) {
        if (lu_.rows() != lu_.cols()) throw std::invalid_argument("DenseLU: matrix not square");
        const Eigen::Index n = lu_.rows();
        perm_.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) perm_[i] = static_cast<int>(i);
        const double amax = n > 0 ? lu_.cwiseAbs().maxCoeff() : 0.0;
        const double threshold = pivot_rel_tol * amax;
        for (Eigen::Index k = 0; k < n; ++k) {
            Eigen::Index piv = 0;
            const double pmax = lu_.col(k).tail(n - k).cwiseAbs().maxCoeff(&piv);
            piv += k;
            if (!(pmax > threshold) || amax == 0.0)
                throw SingularMatrixError("DenseLU: pivot " + std::to_string(pmax) +
                                          " below threshold at column " + std::to_string(k));
            if (piv != k) {
                lu_.row(k).swap(lu_.row(piv));
                std::swap(perm_[k], perm_[piv]);
            }
            lu_.col(k).tail(n - k - 1) /= lu_(k, k);
            lu_.bottomRightCorner(n - k - 1, n - k - 1).noalias() -=
                lu_.col(k).tail(n - k - 1) * lu_.row(k).tail(n - k - 1);
        }
    }

    Eigen::Index size() const { return lu_.rows(); }
    const DenseMatrix& packed() const { return lu_; }
    const std::vector<int>& permutation() const { return perm_; }  // row k of PA is row perm[k] of A

    DenseMatrix L() const {
        DenseMatrix l = lu_.triangularView<Eigen::UnitLower>();
        return l;
    }
    DenseMatrix U() const {
        DenseMatrix u = lu_.triangularView<Eigen::Upper>();
        return u;
    }
    DenseMatrix P() const {
        DenseMatrix p = DenseMatrix::Zero(size(), size());
        for (Eigen::Index k = 0; k < size(); ++k) p(k, perm_[k]) = 1.0;
        return p;
    }

    /// b <- (P^T L)^{-1} b  (the "lower" factor including the row permutation)
    template <class Mat>
    void solve_lower_inplace(Mat&& b) const {
        apply_perm(b);
        lu_.triangularView<Eigen::UnitLower>().solveInPlace(b);
    }
    /// b <- U^{-1} b
    template <class Mat>
    void solve_upper_inplace(Mat&& b) const {
        lu_.triangularView<Eigen::Upper>().solveInPlace(b);
    }
    /// b <- (P^T L)^{-T} b
    template <class Mat>
    void solve_lower_transpose_inplace(Mat&& b) const {
        lu_.triangularView<Eigen::UnitLower>().transpose().solveInPlace(b);
        apply_perm_transpose(b);
    }
    /// b <- U^{-T} b
    template <class Mat>
    void solve_upper_transpose_inplace(Mat&& b) const {
        lu_.triangularView<Eigen::Upper>().transpose().solveInPlace(b);
    }

    template <class Rhs>
    DenseMatrix solve(const Rhs& b) const {
        DenseMatrix x = b;
        solve_lower_inplace(x);
        solve_upper_inplace(x);
        return x;
    }

    Vector solve(const Vector& b) const {
        Vector x = b;
        solve_lower_inplace(x);
        solve_upper_inplace(x);
        return x;
    }

    DenseMatrix inverse() const { return solve(DenseMatrix::Identity(size(), size())); }

private:
    template <class Mat>
    void apply_perm(Mat& b) const {
        const DenseMatrix copy = b;
        for (Eigen::Index k = 0; k < size(); ++k) b.row(k) = copy.row(perm_[k]);
    }
    template <class Mat>
    void apply_perm_transpose(Mat& b) const {
        const DenseMatrix copy = b;
        for (Eigen::Index k = 0; k < size(); ++k) b.row(perm_[k]) = copy.row(k);
    }

    DenseMatrix lu_;
    std::vector<int> perm_;
};

/// Solves with a triangular matrix; lower selects the forward substitution.
inline Vector solve_triangular(const DenseMatrix& t, const Vector& b, bool lower) {
    if (t.rows() != t.cols() || t.rows() != b.size())
        throw std::invalid_argument("solve_triangular: dimension mismatch");
    if (lower) return t.triangularView<Eigen::Lower>().solve(b);
    return t.triangularView<Eigen::Upper>().solve(b);
}

}  // namespace hicoup

#endif

#ifndef HICOUP_SOLVER_HPP
#define HICOUP_SOLVER_HPP

#include "hicoup/cluster.hpp"
#include "hicoup/coupling.hpp"
#include "hicoup/dense.hpp"
#include "hicoup/harith.hpp"
#include "hicoup/hmatrix.hpp"

#include <chrono>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

namespace hicoup {

struct GmresConfig {
    double tol = 1e-3;     // relative (preconditioned) residual
    int max_iters = 20000;
};

struct GmresResult {
    Vector x;
    int iterations = 0;
    bool converged = false;
    std::vector<double> history;  // relative residual, history[0] = 1
};

/// Full (unrestarted) GMRES with optional left preconditioner, zero initial guess.
inline GmresResult gmres(const MatVec& apply, const Vector& b, const GmresConfig& cfg = {},
                         const MatVec& precond = nullptr) {
    if (!(cfg.tol > 0.0)) throw std::invalid_argument("gmres: tol must be positive");
    const Eigen::Index n = b.size();
    auto prec = [&](const Vector& v) -> Vector { return precond ? precond(v) : v; };
    GmresResult res;
    res.x = Vector::Zero(n);
    const Vector r0 = prec(b);
    const double beta = r0.norm();
    res.history.push_back(1.0);
    if (beta == 0.0) {
        res.converged = true;
        return res;
    }
    const int kmax = static_cast<int>(std::min<Eigen::Index>(cfg.max_iters, n));
    std::vector<Vector> basis;
    basis.reserve(std::min(kmax + 1, 4096));
    basis.push_back(r0 / beta);
    DenseMatrix hess = DenseMatrix::Zero(std::min(kmax + 1, 64), std::min(kmax, 64));
    std::vector<double> cs, sn;
    Vector g = Vector::Zero(hess.rows());
    g[0] = beta;
    int k = 0;
    for (; k < kmax; ++k) {
        if (k + 2 > hess.rows()) {
            const Eigen::Index rows = std::min<Eigen::Index>(2 * hess.rows(), kmax + 1);
            const Eigen::Index cols = std::min<Eigen::Index>(2 * hess.cols(), kmax);
            hess.conservativeResize(rows, cols);
            hess.bottomRows(rows - (k + 1)).setZero();
            hess.rightCols(cols - k).setZero();
            g.conservativeResize(rows);
            g.tail(rows - (k + 1)).setZero();
        }
        if (k + 1 > hess.cols()) {
            const Eigen::Index cols = std::min<Eigen::Index>(2 * hess.cols(), kmax);
            hess.conservativeResize(Eigen::NoChange, cols);
            hess.rightCols(cols - k).setZero();
        }
        Vector w = prec(apply(basis[k]));
        // modified Gram-Schmidt
        for (int i = 0; i <= k; ++i) {
            hess(i, k) = basis[i].dot(w);
            w -= hess(i, k) * basis[i];
        }
        const double hn = w.norm();
        hess(k + 1, k) = hn;
        for (int i = 0; i < k; ++i) {
            const double t = cs[i] * hess(i, k) + sn[i] * hess(i + 1, k);
            hess(i + 1, k) = -sn[i] * hess(i, k) + cs[i] * hess(i + 1, k);
            hess(i, k) = t;
        }
        const double denom = std::hypot(hess(k, k), hess(k + 1, k));
        const double c = denom == 0.0 ? 1.0 : hess(k, k) / denom;
        const double s = denom == 0.0 ? 0.0 : hess(k + 1, k) / denom;
        cs.push_back(c);
        sn.push_back(s);
        hess(k, k) = c * hess(k, k) + s * hess(k + 1, k);
        hess(k + 1, k) = 0.0;
        g[k + 1] = -s * g[k];
        g[k] = c * g[k];
        const double rel = std::abs(g[k + 1]) / beta;
        res.history.push_back(std::min(rel, res.history.back()));
        if (rel <= cfg.tol || hn == 0.0) {
            ++k;
            res.converged = rel <= cfg.tol || hn == 0.0;
            break;
        }
        basis.push_back(w / hn);
    }
    res.iterations = k;
    if (k > 0) {
        const Vector y = hess.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
        for (int i = 0; i < k; ++i) res.x += y[i] * basis[i];
    }
    return res;
}

struct PrecondConfig {
    int rank = 1;
    double eta = 2.0;
    int leaf_size = 25;
    double acu_tol = 1e-10;
};

/// P = diag(L_A U_A, L_V U_V) with H-LU factors of A^st = A + b b^T and V on separate
/// cluster trees for the FEM and BEM dofs.
class BlockDiagPreconditioner {
public:
    BlockDiagPreconditioner(const CouplingSystem& sys, const PrecondConfig& cfg) : n_(sys.n()), m_(sys.m()) {
        const auto t0 = std::chrono::steady_clock::now();
        const DofTable dofs = dof_table(*sys.mesh);
        tree_a_ = std::make_unique<ClusterTree>(build_cluster_tree(dofs, 0, n_, cfg.leaf_size));
        tree_v_ = std::make_unique<ClusterTree>(build_cluster_tree(dofs, n_, m_, cfg.leaf_size));
        bt_a_ = std::make_unique<BlockClusterTree>(build_block_tree(*tree_a_, cfg.eta));
        bt_v_ = std::make_unique<BlockClusterTree>(build_block_tree(*tree_v_, cfg.eta));
        CompressConfig cc;
        cc.acu_tol = cfg.acu_tol;
        const Truncation t{cfg.rank, 0.0};
        const HMatrix ha = compress([&sys](int i, int j) { return sys.stabilized_fem_entry(i, j); }, *bt_a_, cc);
        const HMatrix hv = compress([&sys](int i, int j) { return sys.V(i, j); }, *bt_v_, cc);
        lu_a_ = HLU(ha, t);
        lu_v_ = HLU(hv, t);
        setup_seconds_ = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }

    int n() const { return n_; }
    int m() const { return m_; }

    /// P^{-1} r.
    Vector apply(const Vector& r) const {
        if (r.size() != n_ + m_) throw std::invalid_argument("BlockDiagPreconditioner: dimension mismatch");
        Vector x(r.size());
        x.head(n_) = hlu_solve(lu_a_, *tree_a_, r.head(n_));
        x.tail(m_) = hlu_solve(lu_v_, *tree_v_, r.tail(m_));
        return x;
    }
    Vector solve_fem(const Vector& r) const { return hlu_solve(lu_a_, *tree_a_, r); }
    Vector solve_bem(const Vector& r) const { return hlu_solve(lu_v_, *tree_v_, r); }

    /// Dense P_A and P_V in original order (small problems only).
    DenseMatrix dense_fem() const { return dense_factor_product(lu_a_, *tree_a_); }
    DenseMatrix dense_bem() const { return dense_factor_product(lu_v_, *tree_v_); }

    const HLU& lu_fem() const { return lu_a_; }
    const HLU& lu_bem() const { return lu_v_; }
    std::size_t memory_bytes() const { return lu_a_.memory_bytes() + lu_v_.memory_bytes(); }
    int max_rank() const { return std::max(lu_a_.max_rank(), lu_v_.max_rank()); }
    double setup_seconds() const { return setup_seconds_; }

private:
    // inverse of the dense solve operator, so leaf pivoting is accounted for
    static DenseMatrix dense_factor_product(const HLU& f, const ClusterTree& tree) {
        const int n = f.size();
        DenseMatrix s(n, n);
        for (int j = 0; j < n; ++j) s.col(j) = hlu_solve(f, tree, Vector::Unit(n, j));
        return s.partialPivLu().inverse();
    }

    int n_ = 0, m_ = 0;
    std::unique_ptr<ClusterTree> tree_a_, tree_v_;
    std::unique_ptr<BlockClusterTree> bt_a_, bt_v_;
    HLU lu_a_, lu_v_;
    double setup_seconds_ = 0.0;
};

/// Solves the stabilized system for a Galerkin right-hand side: dense LU up to
/// dense_limit unknowns, preconditioned GMRES (rank 10) beyond.
inline Vector solve_coupling(const CouplingSystem& sys, const Vector& rhs, double tol = 1e-10,
                             int dense_limit = 4000) {
    const Vector b = sys.stabilized_rhs(rhs);
    if (sys.size() <= dense_limit) return DenseLU(sys.materialize(true)).solve(b);
    const BlockDiagPreconditioner p(sys, PrecondConfig{10});
    const GmresResult r = gmres([&sys](const Vector& x) { return sys.apply_stabilized(x); }, b,
                                GmresConfig{tol, 20000}, [&p](const Vector& x) { return p.apply(x); });
    if (!r.converged) throw ConvergenceError("solve_coupling: GMRES did not converge", r.iterations);
    return r.x;
}

struct SpectralReport {
    double c_A = 0.0, C_A = 0.0;
    double c_V = 0.0, C_V = 0.0;
    bool indefinite = false;  // symmetric part of a factor product was not positive definite
    double kappa_B = 0.0;     // kappa_2 of the stabilized operator
    double kappa_PB = 0.0;    // kappa_2 of P^{-1} B
};

namespace detail {

/// Extremal eigenvalues of the pencil (A, sym(P)); flags an indefinite sym(P).
inline std::pair<double, double> pencil_bounds(const DenseMatrix& a, const DenseMatrix& p, bool& indefinite) {
    const DenseMatrix ps = 0.5 * (p + p.transpose());
    Eigen::LLT<DenseMatrix> llt(ps);
    if (llt.info() != Eigen::Success) {
        indefinite = true;
        return {std::nan(""), std::nan("")};
    }
    Eigen::GeneralizedSelfAdjointEigenSolver<DenseMatrix> ges(0.5 * (a + a.transpose()), ps,
                                                              Eigen::EigenvaluesOnly);
    return {ges.eigenvalues().minCoeff(), ges.eigenvalues().maxCoeff()};
}

}  // namespace detail

/// Spectral equivalence constants of the block-diagonal preconditioner by dense
/// generalized eigenvalue problems (small levels).
inline SpectralReport spectral_equivalence_report(const CouplingSystem& sys, const BlockDiagPreconditioner& p) {
    if (sys.size() > 6000)
        throw std::invalid_argument("spectral_equivalence_report: dense evaluation limited to 6000 dofs");
    SpectralReport rep;
    DenseMatrix ast = DenseMatrix(sys.A);
    ast += sys.s.head(sys.n()) * sys.s.head(sys.n()).transpose();
    const DenseMatrix pa = p.dense_fem();
    const DenseMatrix pv = p.dense_bem();
    std::tie(rep.c_A, rep.C_A) = detail::pencil_bounds(ast, pa, rep.indefinite);
    std::tie(rep.c_V, rep.C_V) = detail::pencil_bounds(sys.V, pv, rep.indefinite);

    const DenseMatrix b = sys.materialize(true);
    const Vector sb = singular_values(b);
    rep.kappa_B = sb[0] / sb[sb.size() - 1];
    DenseMatrix pb(b.rows(), b.cols());
    for (Eigen::Index j = 0; j < b.cols(); ++j) pb.col(j) = p.apply(b.col(j));
    const Vector spb = singular_values(pb);
    rep.kappa_PB = spb[0] / spb[spb.size() - 1];
    return rep;
}

}  // namespace hicoup

#endif

#ifndef HICOUP_HARITH_HPP
#define HICOUP_HARITH_HPP

#include "hicoup/dense.hpp"
#include "hicoup/hmatrix.hpp"

#include <limits>
#include <memory>
#include <stdexcept>
#include <string>

namespace hicoup {

namespace detail {

inline std::string block_name(const HMatrix& h) {
    return "[" + std::to_string(h.row_begin) + "," + std::to_string(h.row_end) + ")x[" +
           std::to_string(h.col_begin) + "," + std::to_string(h.col_end) + ")";
}

inline void require_square(const HMatrix& a, const char* what) {
    if (a.row_begin != a.col_begin || a.row_end != a.col_end)
        throw std::invalid_argument(std::string(what) + ": block " + block_name(a) + " is not a diagonal block");
}

}  // namespace detail

/// C += alpha * X Y^T, truncating every low-rank leaf touched.
inline void add_lowrank(HMatrix& c, double alpha, const ConstMatRef& x, const ConstMatRef& y, Truncation t) {
    if (x.cols() == 0) return;
    switch (c.kind) {
        case HKind::dense: c.D.noalias() += alpha * x * y.transpose(); break;
        case HKind::lowrank:
            c.R.append(x, y, alpha);
            c.R = truncate(c.R, t);
            break;
        case HKind::block:
            for (auto& s : c.sons)
                add_lowrank(s, alpha, x.middleRows(s.row_begin - c.row_begin, s.rows()),
                            y.middleRows(s.col_begin - c.col_begin, s.cols()), t);
            break;
    }
}

/// C += alpha * D for a dense matrix D on the block of C.
inline void add_dense(HMatrix& c, double alpha, const ConstMatRef& d, Truncation t) {
    switch (c.kind) {
        case HKind::dense: c.D += alpha * d; break;
        case HKind::lowrank: {
            const LowRank p = truncate_dense(d, t);
            add_lowrank(c, alpha, p.X, p.Y, t);
            break;
        }
        case HKind::block:
            for (auto& s : c.sons)
                add_dense(s, alpha, d.block(s.row_begin - c.row_begin, s.col_begin - c.col_begin, s.rows(), s.cols()),
                          t);
            break;
    }
}

/// C += alpha * A (formatted addition).
inline void hadd_into(HMatrix& c, double alpha, const HMatrix& a, Truncation t) {
    if (c.row_begin != a.row_begin || c.row_end != a.row_end || c.col_begin != a.col_begin ||
        c.col_end != a.col_end)
        throw std::invalid_argument("hadd: block " + detail::block_name(a) + " does not match " +
                                    detail::block_name(c));
    if (a.kind == HKind::lowrank) {
        add_lowrank(c, alpha, a.R.X, a.R.Y, t);
    } else if (a.kind == HKind::dense) {
        add_dense(c, alpha, a.leaf_dense(), t);
    } else if (c.kind == HKind::block) {
        for (std::size_t k = 0; k < 4; ++k) hadd_into(c.sons[k], alpha, a.sons[k], t);
    } else {
        add_dense(c, alpha, a.to_dense(), t);
    }
}

inline HMatrix hadd(const HMatrix& a, const HMatrix& b, Truncation t) {
    if (!a.same_structure(b)) throw std::invalid_argument("hadd: block structures differ");
    HMatrix c = a;
    hadd_into(c, 1.0, b, t);
    return c;
}

/// Blockwise projection of every low-rank leaf to the truncation t.
inline void project(HMatrix& h, Truncation t) {
    h.for_each_leaf([&](HMatrix& leaf) {
        if (leaf.kind == HKind::lowrank) leaf.R = truncate(leaf.R, t);
    });
}

namespace detail {

/// Truncation used for intermediate products before the final projection to t.
inline Truncation inner_truncation(Truncation t) {
    return {std::numeric_limits<int>::max(), t.rel_eps > 0.0 ? std::min(t.rel_eps, 1e-12) : 1e-12};
}

/// Dense product A B; used when one of the outer clusters is a leaf.
inline DenseMatrix product_dense(const HMatrix& a, const HMatrix& b) {
    if (a.kind == HKind::lowrank) return a.R.X * b.mul_transpose(a.R.Y).transpose();
    if (a.is_leaf()) return b.mul_transpose(a.D.transpose()).transpose();
    if (b.kind == HKind::lowrank) return a.mul(b.R.X) * b.R.Y.transpose();
    return a.mul(b.to_dense());
}

/// Low-rank approximation of A B, accurate to the relative cutoff of t.
inline LowRank product_lowrank(const HMatrix& a, const HMatrix& b, Truncation t) {
    if (a.kind == HKind::lowrank) return truncate(LowRank(a.R.X, b.mul_transpose(a.R.Y)), t);
    if (b.kind == HKind::lowrank) return truncate(LowRank(a.mul(b.R.X), b.R.Y), t);
    if (a.kind == HKind::dense && b.kind == HKind::dense) {
        if (a.cols() <= std::min(a.rows(), b.cols())) return truncate(LowRank(a.D, b.D.transpose()), t);
        return truncate_dense(a.D * b.D, t);
    }
    if (a.is_leaf() || b.is_leaf()) return truncate_dense(product_dense(a, b), t);
    // both subdivided: agglomerate the four quadrants
    LowRank out(a.rows(), b.cols());
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            const HMatrix& ai0 = a.son(i, 0);
            const HMatrix& b0j = b.son(0, j);
            LowRank q(ai0.rows(), b0j.cols());
            for (int k = 0; k < 2; ++k) {
                const LowRank p = product_lowrank(a.son(i, k), b.son(k, j), t);
                q.append(p.X, p.Y);
            }
            q = truncate(q, t);
            DenseMatrix x = DenseMatrix::Zero(a.rows(), q.rank());
            DenseMatrix y = DenseMatrix::Zero(b.cols(), q.rank());
            x.middleRows(ai0.row_begin - a.row_begin, ai0.rows()) = q.X;
            y.middleRows(b0j.col_begin - b.col_begin, b0j.cols()) = q.Y;
            out.append(x, y);
        }
    return truncate(out, t);
}

}  // namespace detail

/// C += alpha * A B (formatted multiplication).
inline void mul_add(HMatrix& c, double alpha, const HMatrix& a, const HMatrix& b, Truncation t) {
    if (a.col_begin != b.row_begin || a.col_end != b.row_end || c.row_begin != a.row_begin ||
        c.row_end != a.row_end || c.col_begin != b.col_begin || c.col_end != b.col_end)
        throw std::invalid_argument("mul_add: incompatible blocks " + detail::block_name(a) + " * " +
                                    detail::block_name(b) + " -> " + detail::block_name(c));
    if (c.kind == HKind::block && a.kind == HKind::block && b.kind == HKind::block) {
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                for (int k = 0; k < 2; ++k) mul_add(c.son(i, j), alpha, a.son(i, k), b.son(k, j), t);
        return;
    }
    switch (c.kind) {
        case HKind::lowrank: {
            const LowRank p = detail::product_lowrank(a, b, detail::inner_truncation(t));
            add_lowrank(c, alpha, p.X, p.Y, t);
            break;
        }
        case HKind::dense: c.D.noalias() += alpha * detail::product_dense(a, b); break;
        case HKind::block: {
            // one factor is a leaf, so the product has low rank
            LowRank p;
            if (a.kind == HKind::lowrank)
                p = LowRank(a.R.X, b.mul_transpose(a.R.Y));
            else if (b.kind == HKind::lowrank)
                p = LowRank(a.mul(b.R.X), b.R.Y);
            else if (a.kind == HKind::dense && b.kind == HKind::dense)
                p = LowRank(a.D, b.D.transpose());
            else if (a.kind == HKind::dense)
                p = LowRank(DenseMatrix::Identity(a.rows(), a.rows()), b.mul_transpose(a.D.transpose()));
            else
                p = LowRank(a.mul(b.D), DenseMatrix::Identity(b.cols(), b.cols()));
            add_lowrank(c, alpha, p.X, p.Y, t);
            break;
        }
    }
}

inline HMatrix hmul(const HMatrix& a, const HMatrix& b, Truncation t) {
    if (!a.same_structure(b)) throw std::invalid_argument("hmul: block structures differ");
    HMatrix c = a.zeros_like();
    mul_add(c, 1.0, a, b, t);
    return c;
}

/// Blockwise inversion with Schur complements, all products truncated by t.
inline HMatrix hinvert(const HMatrix& a, Truncation t) {
    detail::require_square(a, "hinvert");
    if (a.kind == HKind::lowrank)
        throw std::invalid_argument("hinvert: diagonal block " + detail::block_name(a) + " is low-rank");
    if (a.kind == HKind::dense) {
        HMatrix inv = a.zeros_like();
        try {
            inv.D = DenseLU(a.D).inverse();
        } catch (const SingularMatrixError& e) {
            throw SingularMatrixError("hinvert: leaf " + detail::block_name(a) + ": " + e.what());
        }
        return inv;
    }
    const HMatrix& a11 = a.son(0, 0);
    const HMatrix& a12 = a.son(0, 1);
    const HMatrix& a21 = a.son(1, 0);
    HMatrix x11 = hinvert(a11, t);
    HMatrix t12 = a12.zeros_like();
    mul_add(t12, 1.0, x11, a12, t);
    HMatrix t21 = a21.zeros_like();
    mul_add(t21, 1.0, a21, x11, t);
    HMatrix s = a.son(1, 1);
    mul_add(s, -1.0, a21, t12, t);
    HMatrix x22 = hinvert(s, t);
    HMatrix x12 = a12.zeros_like();
    mul_add(x12, -1.0, t12, x22, t);
    HMatrix x21 = a21.zeros_like();
    mul_add(x21, -1.0, x22, t21, t);
    mul_add(x11, -1.0, x12, t21, t);

    HMatrix inv = a.zeros_like();
    inv.sons[0] = std::move(x11);
    inv.sons[1] = std::move(x12);
    inv.sons[2] = std::move(x21);
    inv.sons[3] = std::move(x22);
    return inv;
}

// -------------------------------------------------------------------------------------
// H-LU. The factor is stored packed: blocks below the diagonal hold L, blocks above hold
// U, diagonal leaves hold a DenseLU with partial pivoting inside the leaf. The implied
// lower factor has diagonal leaves P^T L.
// -------------------------------------------------------------------------------------

/// b <- L^{-1} b.
inline void lower_solve(const HMatrix& f, MatRef b) {
    if (f.is_leaf()) {
        if (!f.lu) throw std::logic_error("lower_solve: diagonal leaf is not factorized");
        f.lu->solve_lower_inplace(b);
        return;
    }
    const HMatrix& f00 = f.son(0, 0);
    const HMatrix& f11 = f.son(1, 1);
    auto b0 = b.topRows(f00.rows());
    auto b1 = b.bottomRows(f11.rows());
    lower_solve(f00, b0);
    f.son(1, 0).addmul(-1.0, b0, b1);
    lower_solve(f11, b1);
}

/// b <- U^{-1} b.
inline void upper_solve(const HMatrix& f, MatRef b) {
    if (f.is_leaf()) {
        if (!f.lu) throw std::logic_error("upper_solve: diagonal leaf is not factorized");
        f.lu->solve_upper_inplace(b);
        return;
    }
    const HMatrix& f00 = f.son(0, 0);
    const HMatrix& f11 = f.son(1, 1);
    auto b0 = b.topRows(f00.rows());
    auto b1 = b.bottomRows(f11.rows());
    upper_solve(f11, b1);
    f.son(0, 1).addmul(-1.0, b1, b0);
    upper_solve(f00, b0);
}

/// b <- L^{-T} b.
inline void lower_transpose_solve(const HMatrix& f, MatRef b) {
    if (f.is_leaf()) {
        if (!f.lu) throw std::logic_error("lower_transpose_solve: diagonal leaf is not factorized");
        f.lu->solve_lower_transpose_inplace(b);
        return;
    }
    const HMatrix& f00 = f.son(0, 0);
    const HMatrix& f11 = f.son(1, 1);
    auto b0 = b.topRows(f00.rows());
    auto b1 = b.bottomRows(f11.rows());
    lower_transpose_solve(f11, b1);
    f.son(1, 0).addmul_transpose(-1.0, b1, b0);
    lower_transpose_solve(f00, b0);
}

/// b <- U^{-T} b.
inline void upper_transpose_solve(const HMatrix& f, MatRef b) {
    if (f.is_leaf()) {
        if (!f.lu) throw std::logic_error("upper_transpose_solve: diagonal leaf is not factorized");
        f.lu->solve_upper_transpose_inplace(b);
        return;
    }
    const HMatrix& f00 = f.son(0, 0);
    const HMatrix& f11 = f.son(1, 1);
    auto b0 = b.topRows(f00.rows());
    auto b1 = b.bottomRows(f11.rows());
    upper_transpose_solve(f00, b0);
    f.son(0, 1).addmul_transpose(-1.0, b0, b1);
    upper_transpose_solve(f11, b1);
}

/// B <- L^{-1} B for an H-matrix right-hand side.
inline void lower_solve_h(const HMatrix& f, HMatrix& b, Truncation t) {
    switch (b.kind) {
        case HKind::lowrank: lower_solve(f, b.R.X); return;
        case HKind::dense: lower_solve(f, b.D); return;
        case HKind::block:
            if (f.is_leaf()) {
                DenseMatrix d = b.to_dense();
                lower_solve(f, d);
                b = b.zeros_like();
                add_dense(b, 1.0, d, t);
                return;
            }
            for (int j = 0; j < 2; ++j) {
                lower_solve_h(f.son(0, 0), b.son(0, j), t);
                mul_add(b.son(1, j), -1.0, f.son(1, 0), b.son(0, j), t);
                lower_solve_h(f.son(1, 1), b.son(1, j), t);
            }
            return;
    }
}

/// B <- B U^{-1} for an H-matrix left-hand side.
inline void upper_solve_right_h(const HMatrix& f, HMatrix& b, Truncation t) {
    switch (b.kind) {
        case HKind::lowrank: upper_transpose_solve(f, b.R.Y); return;
        case HKind::dense: {
            DenseMatrix bt = b.D.transpose();
            upper_transpose_solve(f, bt);
            b.D = bt.transpose();
            return;
        }
        case HKind::block:
            if (f.is_leaf()) {
                DenseMatrix bt = b.to_dense().transpose();
                upper_transpose_solve(f, bt);
                b = b.zeros_like();
                add_dense(b, 1.0, bt.transpose(), t);
                return;
            }
            for (int i = 0; i < 2; ++i) {
                upper_solve_right_h(f.son(0, 0), b.son(i, 0), t);
                mul_add(b.son(i, 1), -1.0, b.son(i, 0), f.son(0, 1), t);
                upper_solve_right_h(f.son(1, 1), b.son(i, 1), t);
            }
            return;
    }
}

namespace detail {

inline void lu_inplace(HMatrix& a, Truncation t) {
    require_square(a, "hlu");
    if (a.kind == HKind::lowrank)
        throw std::invalid_argument("hlu: diagonal block " + block_name(a) + " is low-rank");
    if (a.kind == HKind::dense) {
        try {
            a.lu = std::make_shared<const DenseLU>(std::move(a.D));
        } catch (const SingularMatrixError& e) {
            throw SingularMatrixError("hlu: leaf " + block_name(a) + ": " + e.what() +
                                      "; the stabilized operator avoids singular leading blocks");
        }
        a.D.resize(0, 0);
        return;
    }
    lu_inplace(a.son(0, 0), t);
    lower_solve_h(a.son(0, 0), a.son(0, 1), t);
    upper_solve_right_h(a.son(0, 0), a.son(1, 0), t);
    mul_add(a.son(1, 1), -1.0, a.son(1, 0), a.son(0, 1), t);
    lu_inplace(a.son(1, 1), t);
}

inline void lower_apply(const HMatrix& f, const ConstMatRef& x, MatRef y) {
    if (f.is_leaf()) {
        const DenseMatrix l = f.lu->L() * x;
        for (Eigen::Index k = 0; k < l.rows(); ++k) y.row(f.lu->permutation()[k]) += l.row(k);
        return;
    }
    const int n0 = f.son(0, 0).rows();
    lower_apply(f.son(0, 0), x.topRows(n0), y.topRows(n0));
    f.son(1, 0).addmul(1.0, x.topRows(n0), y.bottomRows(f.rows() - n0));
    lower_apply(f.son(1, 1), x.bottomRows(f.rows() - n0), y.bottomRows(f.rows() - n0));
}

inline void upper_apply(const HMatrix& f, const ConstMatRef& x, MatRef y) {
    if (f.is_leaf()) {
        y.noalias() += f.lu->U() * x;
        return;
    }
    const int n0 = f.son(0, 0).rows();
    upper_apply(f.son(0, 0), x.topRows(n0), y.topRows(n0));
    f.son(0, 1).addmul(1.0, x.bottomRows(f.rows() - n0), y.topRows(n0));
    upper_apply(f.son(1, 1), x.bottomRows(f.rows() - n0), y.bottomRows(f.rows() - n0));
}

}  // namespace detail

/// H-LU factorization L U of a square H-matrix on a symmetric block tree.
class HLU {
public:
    HLU() = default;
    HLU(const HMatrix& a, Truncation t) : f_(a) {
        project(f_, t);
        detail::lu_inplace(f_, t);
    }

    const HMatrix& factors() const { return f_; }
    int size() const { return f_.rows(); }

    /// (LU)^{-1} b in cluster order.
    Vector solve_cluster(const Vector& b) const {
        Vector x = b;
        lower_solve(f_, x);
        upper_solve(f_, x);
        return x;
    }
    /// (LU)^{-T} b in cluster order.
    Vector solve_transpose_cluster(const Vector& b) const {
        Vector x = b;
        upper_transpose_solve(f_, x);
        lower_transpose_solve(f_, x);
        return x;
    }
    /// L x and U x in cluster order.
    DenseMatrix apply_lower(const ConstMatRef& x) const {
        DenseMatrix y = DenseMatrix::Zero(x.rows(), x.cols());
        detail::lower_apply(f_, x, y);
        return y;
    }
    DenseMatrix apply_upper(const ConstMatRef& x) const {
        DenseMatrix y = DenseMatrix::Zero(x.rows(), x.cols());
        detail::upper_apply(f_, x, y);
        return y;
    }

    std::size_t memory_bytes() const { return f_.memory_bytes(); }
    int max_rank() const { return f_.max_rank(); }

private:
    HMatrix f_;
};

inline HLU hlu(const HMatrix& a, Truncation t) { return HLU(a, t); }

/// Vector solves in original order through the permutation of a cluster tree.
inline Vector hlu_solve(const HLU& f, const ClusterTree& tree, const Vector& b) {
    return tree.from_cluster(f.solve_cluster(tree.to_cluster(b)));
}
inline Vector hlu_solve_transpose(const HLU& f, const ClusterTree& tree, const Vector& b) {
    return tree.from_cluster(f.solve_transpose_cluster(tree.to_cluster(b)));
}

/// ||I - B C||_2 by power iteration, C an approximate inverse given by its actions.
inline NormEstimate residual_norm(const MatVec& b, const MatVec& b_transpose, const MatVec& c,
                                  const MatVec& c_transpose, Eigen::Index dim, int max_iters = 200,
                                  double tol = 1e-6) {
    const MatVec apply = [&](const Vector& x) -> Vector { return x - b(c(x)); };
    const MatVec apply_t = [&](const Vector& x) -> Vector { return x - c_transpose(b_transpose(x)); };
    return spectral_norm_estimate(apply, apply_t, dim, max_iters, tol);
}

/// ||I - B H_inv||_2 with H_inv on block tree bt.
inline NormEstimate inverse_error(const MatVec& b, const MatVec& b_transpose, const HMatrix& inv,
                                  const BlockClusterTree& bt, int max_iters = 200, double tol = 1e-6) {
    return residual_norm(
        b, b_transpose, [&](const Vector& x) { return hmatvec(inv, bt, x); },
        [&](const Vector& x) { return hmatvec_transpose(inv, bt, x); }, inv.rows(), max_iters, tol);
}

/// ||I - B (L U)^{-1}||_2.
inline NormEstimate lu_error(const MatVec& b, const MatVec& b_transpose, const HLU& f, const ClusterTree& tree,
                             int max_iters = 200, double tol = 1e-6) {
    return residual_norm(
        b, b_transpose, [&](const Vector& x) { return hlu_solve(f, tree, x); },
        [&](const Vector& x) { return hlu_solve_transpose(f, tree, x); }, f.size(), max_iters, tol);
}

}  // namespace hicoup

#endif

#ifndef HICOUP_HMATRIX_HPP
#define HICOUP_HMATRIX_HPP

#include "hicoup/cluster.hpp"
#include "hicoup/dense.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <vector>

namespace hicoup {

using MatRef = Eigen::Ref<DenseMatrix>;
using ConstMatRef = Eigen::Ref<const DenseMatrix>;

enum class HKind { block, dense, lowrank };

/// Hierarchical matrix in cluster order. A block node has four sons (row-major 2x2);
/// leaves are dense (near field) or low-rank (far field). Diagonal leaves of an H-LU
/// factor carry a DenseLU instead of D.
class HMatrix {
public:
    HKind kind = HKind::dense;
    int row_begin = 0, row_end = 0;
    int col_begin = 0, col_end = 0;
    int row_node = -1, col_node = -1;
    std::vector<HMatrix> sons;
    DenseMatrix D;
    LowRank R;
    std::shared_ptr<const DenseLU> lu;

    int rows() const { return row_end - row_begin; }
    int cols() const { return col_end - col_begin; }
    bool is_leaf() const { return kind != HKind::block; }
    HMatrix& son(int i, int j) { return sons[2 * i + j]; }
    const HMatrix& son(int i, int j) const { return sons[2 * i + j]; }

    /// Zero matrix on the block structure of block node `id`.
    static HMatrix structure(const BlockClusterTree& bt, int id = 0) {
        const BlockNode& b = bt.blocks[id];
        HMatrix h;
        const ClusterNode& r = bt.row_cluster(b);
        const ClusterNode& c = bt.col_cluster(b);
        h.row_begin = r.begin;
        h.row_end = r.end;
        h.col_begin = c.begin;
        h.col_end = c.end;
        h.row_node = b.row;
        h.col_node = b.col;
        switch (b.kind) {
            case BlockKind::far:
                h.kind = HKind::lowrank;
                h.R = LowRank(h.rows(), h.cols());
                break;
            case BlockKind::near:
                h.kind = HKind::dense;
                h.D = DenseMatrix::Zero(h.rows(), h.cols());
                break;
            case BlockKind::inner:
                h.kind = HKind::block;
                h.sons.reserve(4);
                for (int s : b.sons) h.sons.push_back(structure(bt, s));
                break;
        }
        return h;
    }

    /// Same structure, all leaves zero.
    HMatrix zeros_like() const {
        HMatrix h;
        h.kind = kind;
        h.row_begin = row_begin;
        h.row_end = row_end;
        h.col_begin = col_begin;
        h.col_end = col_end;
        h.row_node = row_node;
        h.col_node = col_node;
        switch (kind) {
            case HKind::lowrank: h.R = LowRank(rows(), cols()); break;
            case HKind::dense: h.D = DenseMatrix::Zero(rows(), cols()); break;
            case HKind::block:
                h.sons.reserve(4);
                for (const auto& s : sons) h.sons.push_back(s.zeros_like());
                break;
        }
        return h;
    }

    /// Dense leaf contents; factor leaves report their packed L and U.
    DenseMatrix leaf_dense() const {
        if (kind == HKind::lowrank) return R.dense();
        if (lu) return lu->packed();
        return D;
    }

    /// Y += alpha * this * X (X has cols() rows, Y has rows() rows).
    void addmul(double alpha, const ConstMatRef& x, MatRef y) const {
        switch (kind) {
            case HKind::dense:
                if (lu) throw std::logic_error("HMatrix::addmul: factor leaf has no plain entries");
                y.noalias() += alpha * D * x;
                break;
            case HKind::lowrank:
                if (R.rank() > 0) y.noalias() += (alpha * R.X) * (R.Y.transpose() * x);
                break;
            case HKind::block:
                for (const auto& s : sons)
                    s.addmul(alpha, x.middleRows(s.col_begin - col_begin, s.cols()),
                             y.middleRows(s.row_begin - row_begin, s.rows()));
                break;
        }
    }

    /// Y += alpha * this^T * X.
    void addmul_transpose(double alpha, const ConstMatRef& x, MatRef y) const {
        switch (kind) {
            case HKind::dense:
                if (lu) throw std::logic_error("HMatrix::addmul_transpose: factor leaf has no plain entries");
                y.noalias() += alpha * D.transpose() * x;
                break;
            case HKind::lowrank:
                if (R.rank() > 0) y.noalias() += (alpha * R.Y) * (R.X.transpose() * x);
                break;
            case HKind::block:
                for (const auto& s : sons)
                    s.addmul_transpose(alpha, x.middleRows(s.row_begin - row_begin, s.rows()),
                                       y.middleRows(s.col_begin - col_begin, s.cols()));
                break;
        }
    }

    DenseMatrix mul(const ConstMatRef& x) const {
        DenseMatrix y = DenseMatrix::Zero(rows(), x.cols());
        addmul(1.0, x, y);
        return y;
    }
    DenseMatrix mul_transpose(const ConstMatRef& x) const {
        DenseMatrix y = DenseMatrix::Zero(cols(), x.cols());
        addmul_transpose(1.0, x, y);
        return y;
    }

    DenseMatrix to_dense() const {
        if (is_leaf()) return leaf_dense();
        DenseMatrix a(rows(), cols());
        for (const auto& s : sons)
            a.block(s.row_begin - row_begin, s.col_begin - col_begin, s.rows(), s.cols()) = s.to_dense();
        return a;
    }

    /// Stored floating point entries.
    std::size_t memory_entries() const {
        switch (kind) {
            case HKind::dense:
                return lu ? static_cast<std::size_t>(lu->packed().size()) : static_cast<std::size_t>(D.size());
            case HKind::lowrank: return R.storage();
            case HKind::block: {
                std::size_t s = 0;
                for (const auto& c : sons) s += c.memory_entries();
                return s;
            }
        }
        return 0;
    }
    std::size_t memory_bytes() const { return memory_entries() * sizeof(double); }

    /// Entries held in low-rank leaves only.
    std::size_t far_entries() const {
        if (kind == HKind::lowrank) return R.storage();
        std::size_t s = 0;
        for (const auto& c : sons) s += c.far_entries();
        return s;
    }

    int max_rank() const {
        if (kind == HKind::lowrank) return static_cast<int>(R.rank());
        int r = 0;
        for (const auto& c : sons) r = std::max(r, c.max_rank());
        return r;
    }

    template <class F>
    void for_each_leaf(F&& f) const {
        if (is_leaf()) {
            f(*this);
            return;
        }
        for (const auto& c : sons) c.for_each_leaf(f);
    }
    template <class F>
    void for_each_leaf(F&& f) {
        if (is_leaf()) {
            f(*this);
            return;
        }
        for (auto& c : sons) c.for_each_leaf(f);
    }

    bool same_structure(const HMatrix& o) const {
        if (row_begin != o.row_begin || row_end != o.row_end || col_begin != o.col_begin ||
            col_end != o.col_end || is_leaf() != o.is_leaf())
            return false;
        if (is_leaf()) return kind == o.kind;
        for (std::size_t k = 0; k < sons.size(); ++k)
            if (!sons[k].same_structure(o.sons[k])) return false;
        return true;
    }
};

/// Entry access in original (unpermuted) indices.
using EntryOracle = std::function<double(int, int)>;

struct CompressConfig {
    Truncation trunc{1 << 20, 0.0};  // rank cap and relative cutoff applied after ACA
    double acu_tol = 1e-10;          // ACA tolerance; 0 selects dense assembly + SVD
    int sample_checks = 64;          // random entries checked after ACA
};

struct CompressStats {
    int far_blocks = 0;
    int aca_blocks = 0;
    int dense_fallbacks = 0;
    int svd_blocks = 0;
    int max_rank = 0;
};

namespace detail {

inline DenseMatrix gather_block(const EntryOracle& a, const ClusterTree& rows, const ClusterTree& cols,
                                int rb, int nr, int cb, int nc) {
    DenseMatrix d(nr, nc);
    for (int j = 0; j < nc; ++j) {
        const int cj = cols.perm[cb + j];
        for (int i = 0; i < nr; ++i) d(i, j) = a(rows.perm[rb + i], cj);
    }
    return d;
}

/// ACA with partial pivoting. Returns false when the result fails the sampling check.
inline bool aca(const EntryOracle& a, const ClusterTree& rows, const ClusterTree& cols, int rb, int nr,
                int cb, int nc, double tol, int samples, LowRank& out) {
    const int max_rank = std::min(nr, nc);
    DenseMatrix u(nr, 0), v(nc, 0);
    std::vector<char> used(nr, 0);
    double frob2 = 0.0;  // ||S_k||_F^2
    int pivot_row = 0;
    int k = 0;
    int scanned = 0;
    Vector row(nc), col(nr);
    while (k < max_rank && scanned < nr) {
        used[pivot_row] = 1;
        ++scanned;
        const int gi = rows.perm[rb + pivot_row];
        for (int j = 0; j < nc; ++j) row[j] = a(gi, cols.perm[cb + j]);
        if (k > 0) row.noalias() -= v * u.row(pivot_row).transpose();
        Eigen::Index pj = 0;
        const double pmax = row.cwiseAbs().maxCoeff(&pj);
        if (!(pmax > 0.0)) {
            if (k > 0) break;  // residual row vanishes: converged
            // zero row before any step: scan the next row
            int next = -1;
            for (int i = 0; i < nr; ++i)
                if (!used[i]) {
                    next = i;
                    break;
                }
            if (next < 0) break;
            pivot_row = next;
            continue;
        }
        const Vector vk = row / row[pj];
        const int gj = cols.perm[cb + static_cast<int>(pj)];
        for (int i = 0; i < nr; ++i) col[i] = a(rows.perm[rb + i], gj);
        if (k > 0) col.noalias() -= u * v.row(pj).transpose();
        const Vector uk = col;

        // ||S_{k+1}||^2 = ||S_k||^2 + 2 sum_l (u_l.u)(v_l.v) + |u|^2 |v|^2
        double cross = 0.0;
        if (k > 0) cross = ((u.transpose() * uk).array() * (v.transpose() * vk).array()).sum();
        const double nuv = uk.norm() * vk.norm();
        frob2 += 2.0 * cross + nuv * nuv;
        u.conservativeResize(Eigen::NoChange, k + 1);
        v.conservativeResize(Eigen::NoChange, k + 1);
        u.col(k) = uk;
        v.col(k) = vk;
        ++k;
        if (nuv <= tol * std::sqrt(std::max(frob2, 0.0))) break;

        Eigen::Index best = -1;
        double bval = -1.0;
        for (int i = 0; i < nr; ++i)
            if (!used[i] && std::abs(uk[i]) > bval) {
                bval = std::abs(uk[i]);
                best = i;
            }
        if (best < 0) break;
        pivot_row = static_cast<int>(best);
    }
    out = LowRank(std::move(u), std::move(v));

    // residual sampling
    std::mt19937_64 rng(kNormSeed ^ (static_cast<std::uint64_t>(rb) << 32) ^ static_cast<std::uint64_t>(cb));
    std::uniform_int_distribution<int> di(0, nr - 1), dj(0, nc - 1);
    double amax = 0.0, emax = 0.0;
    const double scale = std::sqrt(std::max(frob2, 0.0) / (static_cast<double>(nr) * nc));
    for (int s = 0; s < samples; ++s) {
        const int i = di(rng), j = dj(rng);
        const double exact = a(rows.perm[rb + i], cols.perm[cb + j]);
        const double approx = out.rank() > 0 ? out.X.row(i).dot(out.Y.row(j)) : 0.0;
        amax = std::max(amax, std::abs(exact));
        emax = std::max(emax, std::abs(exact - approx));
    }
    const double ref = std::max(amax, scale);
    return emax <= std::max(10.0 * tol * ref, 1e-300);
}

inline HMatrix compress_node(const EntryOracle& a, const BlockClusterTree& bt, int id,
                             const CompressConfig& cfg, CompressStats& stats) {
    const BlockNode& b = bt.blocks[id];
    const ClusterNode& r = bt.row_cluster(b);
    const ClusterNode& c = bt.col_cluster(b);
    HMatrix h;
    h.row_begin = r.begin;
    h.row_end = r.end;
    h.col_begin = c.begin;
    h.col_end = c.end;
    h.row_node = b.row;
    h.col_node = b.col;
    switch (b.kind) {
        case BlockKind::near:
            h.kind = HKind::dense;
            h.D = gather_block(a, *bt.rows, *bt.cols, r.begin, r.size(), c.begin, c.size());
            break;
        case BlockKind::far: {
            h.kind = HKind::lowrank;
            ++stats.far_blocks;
            LowRank lr;
            bool ok = false;
            if (cfg.acu_tol > 0.0 && std::min(r.size(), c.size()) > 4) {
                ok = aca(a, *bt.rows, *bt.cols, r.begin, r.size(), c.begin, c.size(), cfg.acu_tol,
                         cfg.sample_checks, lr);
                if (ok)
                    ++stats.aca_blocks;
                else
                    ++stats.dense_fallbacks;
            }
            if (ok) {
                Truncation t = cfg.trunc;
                t.rel_eps = std::max(t.rel_eps, cfg.acu_tol);
                h.R = truncate(lr, t);
            } else {
                ++stats.svd_blocks;
                Truncation t = cfg.trunc;
                if (cfg.acu_tol > 0.0) t.rel_eps = std::max(t.rel_eps, cfg.acu_tol);
                h.R = truncate_dense(gather_block(a, *bt.rows, *bt.cols, r.begin, r.size(), c.begin, c.size()),
                                     t);
            }
            stats.max_rank = std::max(stats.max_rank, static_cast<int>(h.R.rank()));
            break;
        }
        case BlockKind::inner:
            h.kind = HKind::block;
            h.sons.reserve(4);
            for (int s : b.sons) h.sons.push_back(compress_node(a, bt, s, cfg, stats));
            break;
    }
    return h;
}

}  // namespace detail

/// Builds an H-matrix from entry access: dense near field, ACA (or dense SVD) far field.
inline HMatrix compress(const EntryOracle& a, const BlockClusterTree& bt, const CompressConfig& cfg = {},
                        CompressStats* stats = nullptr) {
    if (cfg.trunc.rank < 0) throw std::invalid_argument("compress: negative rank");
    CompressStats local;
    HMatrix h = detail::compress_node(a, bt, 0, cfg, local);
    if (stats) *stats = local;
    return h;
}

/// Convenience: compression of an explicit dense matrix given in original order.
inline HMatrix compress_dense(const DenseMatrix& a, const BlockClusterTree& bt, const CompressConfig& cfg = {},
                              CompressStats* stats = nullptr) {
    return compress([&a](int i, int j) { return a(i, j); }, bt, cfg, stats);
}

/// y = H x with x, y in original order.
inline Vector hmatvec(const HMatrix& h, const BlockClusterTree& bt, const Vector& x) {
    const Vector xc = bt.cols->to_cluster(x);
    Vector yc = Vector::Zero(h.rows());
    h.addmul(1.0, xc, yc);
    return bt.rows->from_cluster(yc);
}

inline Vector hmatvec_transpose(const HMatrix& h, const BlockClusterTree& bt, const Vector& x) {
    const Vector xc = bt.rows->to_cluster(x);
    Vector yc = Vector::Zero(h.cols());
    h.addmul_transpose(1.0, xc, yc);
    return bt.cols->from_cluster(yc);
}

/// Dense matrix of H in original order.
inline DenseMatrix to_dense_original(const HMatrix& h, const BlockClusterTree& bt) {
    const DenseMatrix c = h.to_dense();
    DenseMatrix a(c.rows(), c.cols());
    for (Eigen::Index j = 0; j < c.cols(); ++j)
        for (Eigen::Index i = 0; i < c.rows(); ++i) a(bt.rows->perm[i], bt.cols->perm[j]) = c(i, j);
    return a;
}

/// Writes rowstart,rowend,colstart,colend,kind,rank for every leaf (cluster order).
inline void dump_ranks(const HMatrix& h, const std::filesystem::path& file) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream os(file);
    os << "rowstart,rowend,colstart,colend,kind,rank\n";
    h.for_each_leaf([&](const HMatrix& leaf) {
        const bool far = leaf.kind == HKind::lowrank;
        os << leaf.row_begin << ',' << leaf.row_end << ',' << leaf.col_begin << ',' << leaf.col_end << ','
           << (far ? "far" : "near") << ',' << (far ? leaf.R.rank() : std::min(leaf.rows(), leaf.cols()))
           << '\n';
    });
}

}  // namespace hicoup

#endif

#ifndef HICOUP_CLUSTER_HPP
#define HICOUP_CLUSTER_HPP

#include "hicoup/geometry.hpp"
#include "hicoup/mesh.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace hicoup {

struct ClusterNode {
    int begin = 0;  // index range [begin, end) in cluster order
    int end = 0;
    Box box;        // union of the support boxes
    int sons[2] = {-1, -1};
    int level = 0;

    int size() const { return end - begin; }
    bool is_leaf() const { return sons[0] < 0; }
};

/// Binary cluster tree over indices [0, N); node 0 is the root.
struct ClusterTree {
    std::vector<ClusterNode> nodes;
    std::vector<int> perm;      // perm[k] = original index at cluster position k
    std::vector<int> inv_perm;  // inverse of perm
    int leaf_size = 0;

    int size() const { return static_cast<int>(perm.size()); }
    const ClusterNode& root() const { return nodes.front(); }
    int depth() const {
        int d = 0;
        for (const auto& nd : nodes) d = std::max(d, nd.level);
        return d;
    }
    int num_leaves() const {
        return static_cast<int>(std::count_if(nodes.begin(), nodes.end(),
                                              [](const ClusterNode& c) { return c.is_leaf(); }));
    }

    /// Gathers x (original order) into cluster order.
    template <class Vec>
    Vec to_cluster(const Vec& x) const {
        Vec y(x.size());
        for (int k = 0; k < size(); ++k) y[k] = x[perm[k]];
        return y;
    }
    /// Scatters y (cluster order) back to original order.
    template <class Vec>
    Vec from_cluster(const Vec& y) const {
        Vec x(y.size());
        for (int k = 0; k < size(); ++k) x[perm[k]] = y[k];
        return x;
    }
};

/// Geometric bisection: split along the longest axis of the point box at its midpoint,
/// ties to the lower half; an empty half triggers a median split.
inline ClusterTree build_cluster_tree(const std::vector<Vec3>& points, const std::vector<Box>& supports,
                                      int leaf_size) {
    if (leaf_size < 1) throw std::invalid_argument("build_cluster_tree: leaf_size must be >= 1");
    if (points.size() != supports.size())
        throw std::invalid_argument("build_cluster_tree: points and supports differ in length");
    ClusterTree tree;
    tree.leaf_size = leaf_size;
    const int n = static_cast<int>(points.size());
    tree.perm.resize(n);
    std::iota(tree.perm.begin(), tree.perm.end(), 0);

    tree.nodes.push_back({0, n, Box{}, {-1, -1}, 0});
    std::vector<int> stack{0};
    while (!stack.empty()) {
        const int id = stack.back();
        stack.pop_back();
        ClusterNode nd = tree.nodes[id];
        Box pbox;
        for (int k = nd.begin; k < nd.end; ++k) {
            nd.box.extend(supports[tree.perm[k]]);
            pbox.extend(points[tree.perm[k]]);
        }
        tree.nodes[id].box = nd.box;
        if (nd.size() <= leaf_size) continue;

        const int axis = pbox.longest_axis();
        const double mid = pbox.center()[axis];
        auto first = tree.perm.begin() + nd.begin, last = tree.perm.begin() + nd.end;
        auto split = std::stable_partition(first, last, [&](int i) { return points[i][axis] <= mid; });
        if (split == first || split == last) {
            split = first + nd.size() / 2;
            std::stable_sort(first, last, [&](int a, int b) { return points[a][axis] < points[b][axis]; });
        }
        const int cut = static_cast<int>(split - tree.perm.begin());
        const int s0 = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({nd.begin, cut, Box{}, {-1, -1}, nd.level + 1});
        tree.nodes.push_back({cut, nd.end, Box{}, {-1, -1}, nd.level + 1});
        tree.nodes[id].sons[0] = s0;
        tree.nodes[id].sons[1] = s0 + 1;
        stack.push_back(s0 + 1);
        stack.push_back(s0);
    }
    tree.inv_perm.resize(n);
    for (int k = 0; k < n; ++k) tree.inv_perm[tree.perm[k]] = k;
    return tree;
}

/// Simultaneous clustering of the FEM and BEM dofs.
inline ClusterTree build_cluster_tree(const DofTable& dofs, int leaf_size) {
    return build_cluster_tree(dofs.char_point, dofs.supp_box, leaf_size);
}

/// Clustering of the subset [first, first + count) of a dof table (e.g. FEM or BEM only).
inline ClusterTree build_cluster_tree(const DofTable& dofs, int first, int count, int leaf_size) {
    if (first < 0 || count < 0 || first + count > dofs.size())
        throw std::invalid_argument("build_cluster_tree: subset out of range");
    std::vector<Vec3> pts(dofs.char_point.begin() + first, dofs.char_point.begin() + first + count);
    std::vector<Box> boxes(dofs.supp_box.begin() + first, dofs.supp_box.begin() + first + count);
    return build_cluster_tree(pts, boxes, leaf_size);
}

/// eta-admissibility on bounding boxes.
inline bool admissible(const Box& a, const Box& b, double eta) {
    const double dist = distance(a, b);
    return dist > 0.0 && std::min(a.diameter(), b.diameter()) <= eta * dist;
}

enum class BlockKind { inner, far, near };

struct BlockNode {
    int row = 0;  // cluster node ids
    int col = 0;
    BlockKind kind = BlockKind::inner;
    int sons[4] = {-1, -1, -1, -1};  // (0,0), (0,1), (1,0), (1,1)
    int level = 0;
};

struct BlockClusterTree {
    const ClusterTree* rows = nullptr;
    const ClusterTree* cols = nullptr;
    double eta = 2.0;
    std::vector<BlockNode> blocks;  // node 0 is the root
    std::vector<int> far;
    std::vector<int> near;
    int sparsity_constant = 0;
    int depth = 0;

    const ClusterNode& row_cluster(const BlockNode& b) const { return rows->nodes[b.row]; }
    const ClusterNode& col_cluster(const BlockNode& b) const { return cols->nodes[b.col]; }
};

inline BlockClusterTree build_block_tree(const ClusterTree& rows, const ClusterTree& cols, double eta) {
    if (!(eta > 0.0)) throw std::invalid_argument("build_block_tree: eta must be positive");
    BlockClusterTree bt;
    bt.rows = &rows;
    bt.cols = &cols;
    bt.eta = eta;
    bt.blocks.push_back({0, 0, BlockKind::inner, {-1, -1, -1, -1}, 0});
    std::vector<int> stack{0};
    while (!stack.empty()) {
        const int id = stack.back();
        stack.pop_back();
        const BlockNode b = bt.blocks[id];
        const ClusterNode& tau = rows.nodes[b.row];
        const ClusterNode& sigma = cols.nodes[b.col];
        bt.depth = std::max(bt.depth, b.level);
        if (admissible(tau.box, sigma.box, eta)) {
            bt.blocks[id].kind = BlockKind::far;
            bt.far.push_back(id);
        } else if (tau.is_leaf() || sigma.is_leaf()) {
            bt.blocks[id].kind = BlockKind::near;
            bt.near.push_back(id);
        } else {
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) {
                    const int s = static_cast<int>(bt.blocks.size());
                    bt.blocks.push_back({tau.sons[i], sigma.sons[j], BlockKind::inner, {-1, -1, -1, -1},
                                         b.level + 1});
                    bt.blocks[id].sons[2 * i + j] = s;
                }
            for (int k = 3; k >= 0; --k) stack.push_back(bt.blocks[id].sons[k]);
        }
    }
    std::sort(bt.far.begin(), bt.far.end());
    std::sort(bt.near.begin(), bt.near.end());
    std::vector<int> row_count(rows.nodes.size(), 0), col_count(cols.nodes.size(), 0);
    for (int id : bt.far) {
        ++row_count[bt.blocks[id].row];
        ++col_count[bt.blocks[id].col];
    }
    for (int c : row_count) bt.sparsity_constant = std::max(bt.sparsity_constant, c);
    for (int c : col_count) bt.sparsity_constant = std::max(bt.sparsity_constant, c);
    return bt;
}

inline BlockClusterTree build_block_tree(const ClusterTree& tree, double eta) {
    return build_block_tree(tree, tree, eta);
}

struct StorageReport {
    std::size_t far_entries = 0;
    std::size_t near_entries = 0;
    std::size_t total() const { return far_entries + near_entries; }
};

/// Entry counts of an H-matrix with blockwise rank r on the given partition.
inline StorageReport storage_report(const BlockClusterTree& bt, int rank) {
    StorageReport rep;
    for (int id : bt.far) {
        const BlockNode& b = bt.blocks[id];
        rep.far_entries += static_cast<std::size_t>(rank) *
                           (bt.row_cluster(b).size() + bt.col_cluster(b).size());
    }
    for (int id : bt.near) {
        const BlockNode& b = bt.blocks[id];
        rep.near_entries += static_cast<std::size_t>(bt.row_cluster(b).size()) * bt.col_cluster(b).size();
    }
    return rep;
}

/// Writes rowstart,rowend,colstart,colend,kind for every leaf block (cluster order).
inline void dump_blocks(const BlockClusterTree& bt, const std::filesystem::path& file) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    std::ofstream os(file);
    os << "rowstart,rowend,colstart,colend,kind\n";
    for (std::size_t id = 0; id < bt.blocks.size(); ++id) {
        const BlockNode& b = bt.blocks[id];
        if (b.kind == BlockKind::inner) continue;
        const ClusterNode& r = bt.row_cluster(b);
        const ClusterNode& c = bt.col_cluster(b);
        os << r.begin << ',' << r.end << ',' << c.begin << ',' << c.end << ','
           << (b.kind == BlockKind::far ? "far" : "near") << '\n';
    }
}

}  // namespace hicoup

#endif

#ifndef HICOUP_MESH_HPP
#define HICOUP_MESH_HPP

#include "hicoup/geometry.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace hicoup {

/// Structured Kuhn triangulation of the unit cube (0,1)^3 with its boundary surface mesh.
///
/// Every subcube of side 2^-level is split into six congruent tetrahedra that share the
/// main diagonal; boundary triangles are exact tetrahedron faces, oriented outward.
struct Mesh {
    int level = 0;
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 4>> tets;
    std::vector<std::array<int, 3>> boundary_tris;
    std::vector<int> tet_of_tri;                    // owning tetrahedron per boundary triangle
    std::vector<std::array<int, 3>> tri_neighbors;  // edge neighbours, neighbour j opposite vertex j

    // boundary vertex numbering (trace dofs)
    std::vector<int> trace_to_volume;
    std::vector<int> volume_to_trace;  // -1 for interior vertices

    int subdivisions() const { return 1 << level; }
    double side() const { return 1.0 / subdivisions(); }
    /// Mesh width h = max diam(T).
    double h() const { return std::sqrt(3.0) * side(); }

    int num_vertices() const { return static_cast<int>(vertices.size()); }
    int num_tets() const { return static_cast<int>(tets.size()); }
    int num_boundary_tris() const { return static_cast<int>(boundary_tris.size()); }
    int num_trace() const { return static_cast<int>(trace_to_volume.size()); }

    int vertex_index(int i, int j, int k) const {
        const int np = subdivisions() + 1;
        return i + np * (j + np * k);
    }

    Triangle triangle(int t) const {
        const auto& f = boundary_tris[t];
        return Triangle(vertices[f[0]], vertices[f[1]], vertices[f[2]]);
    }

    double tet_volume(int t) const {
        const auto& e = tets[t];
        const Vec3 a = vertices[e[1]] - vertices[e[0]];
        const Vec3 b = vertices[e[2]] - vertices[e[0]];
        const Vec3 c = vertices[e[3]] - vertices[e[0]];
        return a.dot(b.cross(c)) / 6.0;
    }

    Box tet_bbox(int t) const {
        Box b;
        for (int v : tets[t]) b.extend(vertices[v]);
        return b;
    }
};

namespace detail {

inline std::uint64_t face_key(std::array<int, 3> f) {
    std::sort(f.begin(), f.end());
    return (static_cast<std::uint64_t>(f[0]) << 42) | (static_cast<std::uint64_t>(f[1]) << 21) |
           static_cast<std::uint64_t>(f[2]);
}

inline std::uint64_t edge_key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
}

}  // namespace detail

inline Mesh build_cube_mesh(int level) {
    if (level < 1 || level > 6)
        throw std::invalid_argument("build_cube_mesh: level must lie in [1, 6], got " +
                                    std::to_string(level));
    Mesh mesh;
    mesh.level = level;
    const int ns = mesh.subdivisions();
    const int np = ns + 1;
    const double hs = mesh.side();

    mesh.vertices.reserve(static_cast<std::size_t>(np) * np * np);
    for (int k = 0; k < np; ++k)
        for (int j = 0; j < np; ++j)
            for (int i = 0; i < np; ++i) mesh.vertices.emplace_back(i * hs, j * hs, k * hs);

    // Kuhn paths: (0,0,0) -> +e_p0 -> +e_p1 -> (1,1,1) for every permutation p.
    constexpr std::array<std::array<int, 3>, 6> perms{
        {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
    mesh.tets.reserve(6 * static_cast<std::size_t>(ns) * ns * ns);
    for (int k = 0; k < ns; ++k)
        for (int j = 0; j < ns; ++j)
            for (int i = 0; i < ns; ++i)
                for (const auto& p : perms) {
                    std::array<int, 3> c{i, j, k};
                    std::array<int, 4> tet{};
                    tet[0] = mesh.vertex_index(c[0], c[1], c[2]);
                    for (int s = 0; s < 3; ++s) {
                        ++c[p[s]];
                        tet[s + 1] = mesh.vertex_index(c[0], c[1], c[2]);
                    }
                    // positive orientation
                    std::array<int, 4> cand = tet;
                    const Vec3 a = mesh.vertices[cand[1]] - mesh.vertices[cand[0]];
                    const Vec3 b = mesh.vertices[cand[2]] - mesh.vertices[cand[0]];
                    const Vec3 cc = mesh.vertices[cand[3]] - mesh.vertices[cand[0]];
                    if (a.dot(b.cross(cc)) < 0) std::swap(cand[2], cand[3]);
                    mesh.tets.push_back(cand);
                }

    // boundary faces are faces owned by exactly one tetrahedron
    struct FaceRecord {
        int count = 0;
        int tet = -1;
        int local = -1;
    };
    std::unordered_map<std::uint64_t, FaceRecord> faces;
    faces.reserve(mesh.tets.size() * 3);
    for (int t = 0; t < mesh.num_tets(); ++t) {
        const auto& e = mesh.tets[t];
        for (int l = 0; l < 4; ++l) {
            std::array<int, 3> f{};
            for (int s = 0, q = 0; s < 4; ++s)
                if (s != l) f[q++] = e[s];
            auto& rec = faces[detail::face_key(f)];
            ++rec.count;
            rec.tet = t;
            rec.local = l;
        }
    }
    std::vector<std::pair<std::array<int, 3>, int>> bnd;
    for (const auto& [key, rec] : faces) {
        if (rec.count != 1) continue;
        const auto& e = mesh.tets[rec.tet];
        std::array<int, 3> f{};
        for (int s = 0, q = 0; s < 4; ++s)
            if (s != rec.local) f[q++] = e[s];
        const Vec3& opp = mesh.vertices[e[rec.local]];
        const Vec3 n = (mesh.vertices[f[1]] - mesh.vertices[f[0]])
                           .cross(mesh.vertices[f[2]] - mesh.vertices[f[0]]);
        if (n.dot(mesh.vertices[f[0]] - opp) < 0) std::swap(f[1], f[2]);
        // canonical rotation: smallest index first, for deterministic ordering
        const auto it = std::min_element(f.begin(), f.end());
        std::rotate(f.begin(), it, f.end());
        bnd.emplace_back(f, rec.tet);
    }
    std::sort(bnd.begin(), bnd.end());
    for (const auto& [f, t] : bnd) {
        mesh.boundary_tris.push_back(f);
        mesh.tet_of_tri.push_back(t);
    }

    // edge neighbours on the surface
    std::unordered_map<std::uint64_t, std::array<int, 2>> edges;
    for (int t = 0; t < mesh.num_boundary_tris(); ++t) {
        const auto& f = mesh.boundary_tris[t];
        for (int l = 0; l < 3; ++l) {
            auto [it, fresh] = edges.try_emplace(detail::edge_key(f[(l + 1) % 3], f[(l + 2) % 3]),
                                                 std::array<int, 2>{-1, -1});
            (it->second[0] < 0 ? it->second[0] : it->second[1]) = t;
        }
    }
    mesh.tri_neighbors.assign(mesh.boundary_tris.size(), {-1, -1, -1});
    for (int t = 0; t < mesh.num_boundary_tris(); ++t) {
        const auto& f = mesh.boundary_tris[t];
        for (int l = 0; l < 3; ++l) {
            const auto& pair = edges.at(detail::edge_key(f[(l + 1) % 3], f[(l + 2) % 3]));
            mesh.tri_neighbors[t][l] = pair[0] == t ? pair[1] : pair[0];
        }
    }

    mesh.volume_to_trace.assign(mesh.vertices.size(), -1);
    for (const auto& f : mesh.boundary_tris)
        for (int v : f) mesh.volume_to_trace[v] = 0;
    for (int v = 0; v < mesh.num_vertices(); ++v)
        if (mesh.volume_to_trace[v] == 0) {
            mesh.volume_to_trace[v] = mesh.num_trace();
            mesh.trace_to_volume.push_back(v);
        }
    return mesh;
}

/// Characteristic points and support boxes of the combined FEM + BEM index set.
/// Indices [0, n) are P1 vertex hats, [n, n+m) are P0 boundary-triangle indicators.
struct DofTable {
    int n = 0;
    int m = 0;
    std::vector<Vec3> char_point;
    std::vector<Box> supp_box;

    int size() const { return n + m; }
};

inline DofTable dof_table(const Mesh& mesh) {
    DofTable dofs;
    dofs.n = mesh.num_vertices();
    dofs.m = mesh.num_boundary_tris();
    dofs.char_point.reserve(dofs.size());
    dofs.supp_box.assign(dofs.n, Box{});
    for (int v = 0; v < dofs.n; ++v) dofs.char_point.push_back(mesh.vertices[v]);
    for (int t = 0; t < mesh.num_tets(); ++t) {
        const Box b = mesh.tet_bbox(t);
        for (int v : mesh.tets[t]) dofs.supp_box[v].extend(b);
    }
    for (int t = 0; t < dofs.m; ++t) {
        const Triangle tri = mesh.triangle(t);
        dofs.char_point.push_back(tri.centroid());
        dofs.supp_box.push_back(tri.bbox());
    }
    return dofs;
}

/// Writes vertices.csv, tets.csv and tris.csv into dir.
inline void dump_mesh(const Mesh& mesh, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream vs(dir / "vertices.csv");
    vs.precision(17);
    vs << "x,y,z\n";
    for (const auto& p : mesh.vertices) vs << p[0] << ',' << p[1] << ',' << p[2] << '\n';
    std::ofstream ts(dir / "tets.csv");
    ts << "v0,v1,v2,v3\n";
    for (const auto& t : mesh.tets) ts << t[0] << ',' << t[1] << ',' << t[2] << ',' << t[3] << '\n';
    std::ofstream fs(dir / "tris.csv");
    fs << "v0,v1,v2\n";
    for (const auto& f : mesh.boundary_tris) fs << f[0] << ',' << f[1] << ',' << f[2] << '\n';
}

}  // namespace hicoup

#endif

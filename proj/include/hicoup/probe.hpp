#ifndef HICOUP_PROBE_HPP
#define HICOUP_PROBE_HPP

#include "hicoup/bem.hpp"
#include "hicoup/coupling.hpp"
#include "hicoup/fem.hpp"
#include "hicoup/geometry.hpp"
#include "hicoup/mesh.hpp"
#include "hicoup/quadrature.hpp"
#include "hicoup/solver.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace hicoup {

/// Concentric axis-parallel boxes B_R and B_{(1+eps)R}; R is the side length.
struct BoxPair {
    Vec3 center = Vec3::Constant(0.25);
    double R = 0.25;
    double eps = 0.5;

    Box inner() const { return Box::centered(center, R); }
    Box outer() const { return Box::centered(center, (1.0 + eps) * R); }
};

struct ProbeConfig {
    BoxPair boxes;
    int grid_points = 8;            // Gauss points per direction for potential terms
    double tube_factor = 0.25;      // potential points closer than tube_factor * 2^-level to Gamma are skipped
    bool enforce_mesh_ratio = true; // reject meshes violating h/R < eps/16 (bmc) or eps/32 (sym, jn)
    double solve_tol = 1e-10;
};

struct ProbeReport {
    int level = 0;
    CouplingKind kind = CouplingKind::jn;
    double R = 0.0, eps = 0.0, h = 0.0;
    double lhs = 0.0;
    double rhs = 0.0;
    double normalized_ratio = 0.0;
    bool trivial = false;             // zero data, numerator and denominator vanish
    bool mesh_ratio_ok = false;
    std::string mesh_ratio_message;   // the inequality and its measured sides
    int skipped_points = 0;           // potential quadrature points dropped inside the tube
    double tube_width = 0.0;

    // individual terms
    double grad_u = 0.0, grad_v = 0.0, grad_w = 0.0;
    double l2_u = 0.0, l2_v = 0.0, l2_w = 0.0;
    double h1_u = 0.0, h1_v = 0.0, h1_w = 0.0;  // gradient terms on the outer box
};

/// Squared L2 norms of u and grad u on the part of Omega inside a box.
struct FemBoxNorms {
    double l2_sq = 0.0;
    double grad_sq = 0.0;
};

namespace detail {

/// Linear tetrahedron given by its corners and the P1 values there.
struct ValuedTet {
    std::array<Vec3, 4> x;
    std::array<double, 4> u;
};

inline double tet_volume_abs(const ValuedTet& t) {
    return std::abs((t.x[1] - t.x[0]).dot((t.x[2] - t.x[0]).cross(t.x[3] - t.x[0]))) / 6.0;
}

inline double tet_l2_sq(const ValuedTet& t) {
    double s = 0.0, q = 0.0;
    for (double v : t.u) {
        s += v;
        q += v * v;
    }
    return tet_volume_abs(t) / 20.0 * (q + s * s);
}

/// Red refinement into eight children.
inline std::array<ValuedTet, 8> refine(const ValuedTet& t) {
    auto mid = [&](int a, int b) {
        return std::pair<Vec3, double>{0.5 * (t.x[a] + t.x[b]), 0.5 * (t.u[a] + t.u[b])};
    };
    const auto [x01, u01] = mid(0, 1);
    const auto [x02, u02] = mid(0, 2);
    const auto [x03, u03] = mid(0, 3);
    const auto [x12, u12] = mid(1, 2);
    const auto [x13, u13] = mid(1, 3);
    const auto [x23, u23] = mid(2, 3);
    auto make = [](Vec3 a, Vec3 b, Vec3 c, Vec3 d, double ua, double ub, double uc, double ud) {
        return ValuedTet{{a, b, c, d}, {ua, ub, uc, ud}};
    };
    return {make(t.x[0], x01, x02, x03, t.u[0], u01, u02, u03),
            make(x01, t.x[1], x12, x13, u01, t.u[1], u12, u13),
            make(x02, x12, t.x[2], x23, u02, u12, t.u[2], u23),
            make(x03, x13, x23, t.x[3], u03, u13, u23, t.u[3]),
            make(x01, x02, x03, x13, u01, u02, u03, u13),
            make(x01, x02, x12, x13, u01, u02, u12, u13),
            make(x02, x03, x13, x23, u02, u03, u13, u23),
            make(x02, x12, x13, x23, u02, u12, u13, u23)};
}

/// Distance from x to the surface of the unit cube.
inline double distance_to_boundary(const Vec3& x) {
    const bool inside = (x.array() >= 0.0).all() && (x.array() <= 1.0).all();
    if (inside) return std::min({x[0], x[1], x[2], 1.0 - x[0], 1.0 - x[1], 1.0 - x[2]});
    const Vec3 clamped = x.cwiseMax(0.0).cwiseMin(1.0);
    return (x - clamped).norm();
}

inline bool interiors_overlap(const Box& a, const Box& b) {
    return (a.lo.array() < b.hi.array()).all() && (b.lo.array() < a.hi.array()).all();
}

}  // namespace detail

/// L2 norms of a P1 function and its gradient over box ∩ Omega; tetrahedra straddling the
/// box are refined once and the children classified by centroid.
inline FemBoxNorms fem_box_norms(const Mesh& mesh, const Vector& u, const Box& box) {
    if (u.size() != mesh.num_vertices()) throw std::invalid_argument("fem_box_norms: length mismatch");
    FemBoxNorms out;
    for (int t = 0; t < mesh.num_tets(); ++t) {
        const Box tb = mesh.tet_bbox(t);
        if (!detail::interiors_overlap(tb, box)) continue;
        const auto& e = mesh.tets[t];
        const auto [g, vol] = tet_gradients(mesh, t);
        const Eigen::Vector4d ul(u[e[0]], u[e[1]], u[e[2]], u[e[3]]);
        const double grad_sq = (g.transpose() * ul).squaredNorm();
        const detail::ValuedTet vt{{mesh.vertices[e[0]], mesh.vertices[e[1]], mesh.vertices[e[2]],
                                    mesh.vertices[e[3]]},
                                   {ul[0], ul[1], ul[2], ul[3]}};
        if (box.contains(tb)) {
            out.grad_sq += vol * grad_sq;
            out.l2_sq += detail::tet_l2_sq(vt);
            continue;
        }
        for (const auto& c : detail::refine(vt)) {
            const Vec3 centroid = 0.25 * (c.x[0] + c.x[1] + c.x[2] + c.x[3]);
            if (!box.contains(centroid)) continue;
            out.grad_sq += detail::tet_volume_abs(c) * grad_sq;
            out.l2_sq += detail::tet_l2_sq(c);
        }
    }
    return out;
}

/// Tensor Gauss points and weights over a box.
inline std::pair<std::vector<Vec3>, std::vector<double>> box_rule(const Box& box, int n) {
    const auto& rule = quad::gauss_legendre(n);
    std::vector<Vec3> pts;
    std::vector<double> w;
    const Vec3 ext = box.extent();
    const double jac = ext[0] * ext[1] * ext[2];
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                pts.push_back(box.lo + Vec3(rule.x[i] * ext[0], rule.x[j] * ext[1], rule.x[k] * ext[2]));
                w.push_back(jac * rule.w[i] * rule.w[j] * rule.w[k]);
            }
    return {pts, w};
}

/// Mesh-ratio precondition h/R < eps/16 (bmc) or eps/32 (sym, jn).
inline std::pair<bool, std::string> check_mesh_ratio(CouplingKind kind, double h, const BoxPair& b) {
    const double denom = kind == CouplingKind::bmc ? 16.0 : 32.0;
    const double lhs = h / b.R, rhs = b.eps / denom;
    std::ostringstream os;
    os << "h/R < eps/" << denom << ": " << lhs << (lhs < rhs ? " < " : " >= ") << rhs;
    return {lhs < rhs, os.str()};
}

/// P1 bump at the vertex (1,1,1) and zero boundary data.
inline CouplingData corner_bump_data(const Mesh& mesh) {
    CouplingData d = zero_data(mesh);
    const int ns = mesh.subdivisions();
    d.f[mesh.vertex_index(ns, ns, ns)] = 1.0;
    return d;
}

/// Bounding box of the support of the data (f by vertex patches, u0 by boundary vertex
/// patches, phi0 by panels).
inline Box data_support(const Mesh& mesh, const CouplingData& d) {
    Box b;
    const double hs = mesh.side();
    auto patch = [&](const Vec3& p) {
        b.extend(Box{(p.array() - hs).max(0.0).matrix(), (p.array() + hs).min(1.0).matrix()});
    };
    for (int v = 0; v < mesh.num_vertices(); ++v)
        if (d.f[v] != 0.0) patch(mesh.vertices[v]);
    for (int k = 0; k < mesh.num_trace(); ++k)
        if (d.u0[k] != 0.0) patch(mesh.vertices[mesh.trace_to_volume[k]]);
    for (int t = 0; t < mesh.num_boundary_tris(); ++t)
        if (d.phi0[t] != 0.0)
            for (int v : mesh.boundary_tris[t]) b.extend(mesh.vertices[v]);
    return b;
}

/// Solves the coupling with data supported away from the outer box and measures the
/// interior regularity ratio.
inline ProbeReport run_probe(const CouplingSystem& sys, const CouplingData& data, const ProbeConfig& cfg = {}) {
    const Mesh& mesh = *sys.mesh;
    const BoxPair& bp = cfg.boxes;
    if (!(bp.eps > 0.0 && bp.eps < 1.0) || !(bp.R > 0.0))
        throw std::invalid_argument("run_probe: need R > 0 and 0 < eps < 1");
    ProbeReport rep;
    rep.level = mesh.level;
    rep.kind = sys.kind;
    rep.R = bp.R;
    rep.eps = bp.eps;
    rep.h = mesh.h();
    std::tie(rep.mesh_ratio_ok, rep.mesh_ratio_message) = check_mesh_ratio(sys.kind, rep.h, bp);
    if (cfg.enforce_mesh_ratio && !rep.mesh_ratio_ok)
        throw std::invalid_argument("run_probe: mesh-ratio precondition violated, " + rep.mesh_ratio_message);
    const Box outer = bp.outer(), inner = bp.inner();
    const Box supp = data_support(mesh, data);
    if (!supp.empty() && detail::interiors_overlap(supp, outer))
        throw std::invalid_argument("run_probe: data support intersects B_{(1+eps)R}");

    const Vector rhs_vec = assemble_rhs(sys, data);
    if (rhs_vec.isZero(0.0)) {
        rep.trivial = true;
        return rep;
    }
    const Vector x = solve_coupling(sys, rhs_vec, cfg.solve_tol);
    const Vector u = x.head(sys.n());
    const Vector phi = x.tail(sys.m());
    const bool with_w = sys.kind != CouplingKind::bmc;

    const FemBoxNorms fi = fem_box_norms(mesh, u, inner);
    const FemBoxNorms fo = fem_box_norms(mesh, u, outer);
    rep.grad_u = std::sqrt(fi.grad_sq);
    rep.l2_u = std::sqrt(fo.l2_sq);
    rep.h1_u = std::sqrt(fo.grad_sq);

    rep.tube_width = cfg.tube_factor * mesh.side();
    QuadratureConfig q;
    q.far_tol = 1e-10;
    q.potential_order = 8;
    const Vector ut = sys.trace(u);
    auto potential_norms = [&](const Box& box, double& grad_v, double& l2_v, double& grad_w, double& l2_w) {
        auto [pts, w] = box_rule(box, cfg.grid_points);
        std::vector<Vec3> kept;
        std::vector<double> kw;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (detail::distance_to_boundary(pts[i]) < rep.tube_width) {
                ++rep.skipped_points;
                continue;
            }
            kept.push_back(pts[i]);
            kw.push_back(w[i]);
        }
        const PotentialResult sv = eval_single_layer(mesh, kept, phi, true, q);
        grad_v = l2_v = grad_w = l2_w = 0.0;
        for (std::size_t i = 0; i < kept.size(); ++i) {
            grad_v += kw[i] * sv.gradient[i].squaredNorm();
            l2_v += kw[i] * sv.value[i] * sv.value[i];
        }
        if (with_w) {
            const PotentialResult dv = eval_double_layer(mesh, kept, ut, true, q);
            for (std::size_t i = 0; i < kept.size(); ++i) {
                grad_w += kw[i] * dv.gradient[i].squaredNorm();
                l2_w += kw[i] * dv.value[i] * dv.value[i];
            }
        }
    };
    double gv_i, lv_i, gw_i, lw_i, gv_o, lv_o, gw_o, lw_o;
    potential_norms(inner, gv_i, lv_i, gw_i, lw_i);
    potential_norms(outer, gv_o, lv_o, gw_o, lw_o);
    rep.grad_v = std::sqrt(gv_i);
    rep.grad_w = std::sqrt(gw_i);
    rep.l2_v = std::sqrt(lv_o);
    rep.l2_w = std::sqrt(lw_o);
    rep.h1_v = std::sqrt(gv_o);
    rep.h1_w = std::sqrt(gw_o);

    rep.lhs = rep.grad_u + rep.grad_v + (with_w ? rep.grad_w : 0.0);
    const double h2 = rep.h * rep.h;
    const double tu = h2 * fo.grad_sq + fo.l2_sq;
    const double tv = h2 * gv_o + lv_o;
    const double tw = h2 * gw_o + lw_o;
    rep.rhs = with_w ? std::sqrt(tu + tv + tw) : std::sqrt(tu) + std::sqrt(tv);
    if (rep.rhs == 0.0) {
        rep.trivial = true;
        return rep;
    }
    const double er = bp.eps * bp.R;
    const double scale = sys.kind == CouplingKind::jn ? er * er / bp.R : er;
    rep.normalized_ratio = rep.lhs / rep.rhs * scale;
    return rep;
}

}  // namespace hicoup

#endif

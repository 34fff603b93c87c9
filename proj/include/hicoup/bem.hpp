#ifndef HICOUP_BEM_HPP
#define HICOUP_BEM_HPP

#include "hicoup/dense.hpp"
#include "hicoup/fem.hpp"
#include "hicoup/mesh.hpp"
#include "hicoup/quadrature.hpp"

#include <Eigen/Sparse>

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace hicoup {

inline constexpr double kInv4Pi = 0.25 / std::numbers::pi;

/// Laplace fundamental solution G(x) = 1 / (4 pi |x|).
inline double laplace_kernel(const Vec3& d) { return kInv4Pi / d.norm(); }

/// Double-layer kernel d/dnu(y) G(x - y) = (x - y).nu / (4 pi |x - y|^3).
inline double double_layer_kernel(const Vec3& x_minus_y, const Vec3& normal_y) {
    const double r = x_minus_y.norm();
    return kInv4Pi * x_minus_y.dot(normal_y) / (r * r * r);
}

struct QuadratureConfig {
    int gauss_order_far = 6;          // maximal order of the tensor rule for separated pairs
    int sauter_schwab_order = 5;      // per-dimension order of the singular rules
    double near_field_split_threshold = 0.5;  // size/distance ratio above which the max order is used
    double far_tol = 1e-7;            // target relative error driving the order for separated pairs
    int potential_max_depth = 6;      // recursive panel subdivision for near-singular points
    int potential_order = 6;
};

/// Assembled boundary matrix with quadrature metadata.
struct BemMatrix {
    DenseMatrix values;
    bool low_order_warning = false;  // some pair needed more than gauss_order_far
};

namespace detail {

/// Shared-vertex classification and the vertex reorderings the singular rules expect.
struct PairLayout {
    quad::PairRelation relation = quad::PairRelation::separate;
    std::array<int, 3> pa{0, 1, 2};
    std::array<int, 3> pb{0, 1, 2};
};

inline PairLayout classify_pair(const std::array<int, 3>& a, const std::array<int, 3>& b) {
    PairLayout lay;
    std::array<int, 3> ia{}, ib{};
    int shared = 0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if (a[i] == b[j]) {
                ia[shared] = i;
                ib[shared] = j;
                ++shared;
            }
    switch (shared) {
        case 3:
            lay.relation = quad::PairRelation::identical;
            lay.pa = {0, 1, 2};
            lay.pb = {0, 1, 2};
            break;
        case 2:
            lay.relation = quad::PairRelation::edge;
            lay.pa = {ia[0], ia[1], 3 - ia[0] - ia[1]};
            lay.pb = {ib[0], ib[1], 3 - ib[0] - ib[1]};
            break;
        case 1:
            lay.relation = quad::PairRelation::vertex;
            lay.pa = {ia[0], (ia[0] + 1) % 3, (ia[0] + 2) % 3};
            lay.pb = {ib[0], (ib[0] + 1) % 3, (ib[0] + 2) % 3};
            break;
        default:
            lay.relation = quad::PairRelation::separate;
    }
    return lay;
}

inline Triangle reorder(const Triangle& t, const std::array<int, 3>& p) {
    Triangle r = t;
    for (int k = 0; k < 3; ++k) r.v[k] = t.v[p[k]];
    return r;  // normal and area kept from the original orientation
}

inline double circumradius_from_centroid(const Triangle& t) {
    const Vec3 c = t.centroid();
    return std::max({(t.v[0] - c).norm(), (t.v[1] - c).norm(), (t.v[2] - c).norm()});
}

/// Order of the tensor rule for a separated pair.
inline int separated_order(const Triangle& a, const Triangle& b, const QuadratureConfig& q,
                           bool& clamped) {
    const double dist = (a.centroid() - b.centroid()).norm();
    const double radius = std::max(circumradius_from_centroid(a), circumradius_from_centroid(b));
    const double ratio = radius / dist;
    if (ratio >= q.near_field_split_threshold) return q.gauss_order_far;
    const int needed = static_cast<int>(std::ceil(std::log(q.far_tol) / (2.0 * std::log(ratio))));
    if (needed > q.gauss_order_far) clamped = true;
    return std::clamp(needed, 1, q.gauss_order_far);
}

}  // namespace detail

/// Integrates f(x, y, bary_x, bary_y) over panel a (test, x) times panel b (trial, y).
/// Barycentric weights refer to the original vertex order of each panel.
template <int N, class F>
std::array<double, N> integrate_panel_pair(const Triangle& a, const std::array<int, 3>& va,
                                           const Triangle& b, const std::array<int, 3>& vb,
                                           const QuadratureConfig& q, F&& f,
                                           bool* clamped = nullptr) {
    std::array<double, N> acc{};
    const detail::PairLayout lay = detail::classify_pair(va, vb);
    const double jac = 4.0 * a.area * b.area;
    if (lay.relation == quad::PairRelation::separate) {
        bool clamp = false;
        const int order = detail::separated_order(a, b, q, clamp);
        if (clamped && clamp) *clamped = true;
        const auto& rule = quad::triangle_rule(order);
        const std::size_t np = rule.w.size();
        thread_local std::vector<Vec3> xs, ys;
        xs.resize(np);
        ys.resize(np);
        for (std::size_t i = 0; i < np; ++i) {
            xs[i] = a.map(rule.st[i][0], rule.st[i][1]);
            ys[i] = b.map(rule.st[i][0], rule.st[i][1]);
        }
        for (std::size_t i = 0; i < np; ++i) {
            const auto bx = quad::triangle_shape(rule.st[i][0], rule.st[i][1]);
            for (std::size_t j = 0; j < np; ++j) {
                const auto by = quad::triangle_shape(rule.st[j][0], rule.st[j][1]);
                const auto val = f(xs[i], ys[j], bx, by);
                const double w = rule.w[i] * rule.w[j];
                for (int k = 0; k < N; ++k) acc[k] += w * val[k];
            }
        }
    } else {
        const Triangle ra = detail::reorder(a, lay.pa);
        const Triangle rb = detail::reorder(b, lay.pb);
        for (const auto& p : quad::singular_rule(lay.relation, q.sauter_schwab_order)) {
            const Vec3 x = ra.map(p.xs, p.xt);
            const Vec3 y = rb.map(p.ys, p.yt);
            const auto lx = quad::triangle_shape(p.xs, p.xt);
            const auto ly = quad::triangle_shape(p.ys, p.yt);
            std::array<double, 3> bx{}, by{};
            for (int k = 0; k < 3; ++k) {
                bx[lay.pa[k]] = lx[k];
                by[lay.pb[k]] = ly[k];
            }
            const auto val = f(x, y, bx, by);
            for (int k = 0; k < N; ++k) acc[k] += p.w * val[k];
        }
    }
    for (auto& v : acc) v *= jac;
    return acc;
}

/// <V chi_j, chi_i> for a single panel pair.
inline double single_layer_pair(const Triangle& a, const std::array<int, 3>& va, const Triangle& b,
                                const std::array<int, 3>& vb, const QuadratureConfig& q,
                                bool* clamped = nullptr) {
    return integrate_panel_pair<1>(
        a, va, b, vb, q,
        [](const Vec3& x, const Vec3& y, const auto&, const auto&) {
            return std::array<double, 1>{laplace_kernel(x - y)};
        },
        clamped)[0];
}

/// <K xi_k, chi_a> restricted to panel pair (a test, b trial) for the three hats of b.
inline std::array<double, 3> double_layer_pair(const Triangle& a, const std::array<int, 3>& va,
                                               const Triangle& b, const std::array<int, 3>& vb,
                                               const QuadratureConfig& q, bool* clamped = nullptr) {
    const Vec3 nb = b.normal;
    // coplanar pairs vanish identically
    if (std::abs(a.normal.dot(nb) - 1.0) < 1e-14 && std::abs((a.v[0] - b.v[0]).dot(nb)) < 1e-14)
        return {0.0, 0.0, 0.0};
    return integrate_panel_pair<3>(
        a, va, b, vb, q,
        [&nb](const Vec3& x, const Vec3& y, const auto&, const std::array<double, 3>& by) {
            const double k = double_layer_kernel(x - y, nb);
            return std::array<double, 3>{k * by[0], k * by[1], k * by[2]};
        },
        clamped);
}

inline std::vector<Triangle> boundary_panels(const Mesh& mesh) {
    std::vector<Triangle> panels;
    panels.reserve(mesh.boundary_tris.size());
    for (int t = 0; t < mesh.num_boundary_tris(); ++t) panels.push_back(mesh.triangle(t));
    return panels;
}

/// Single-layer Galerkin matrix V (m x m), V(i, j) = <V chi_j, chi_i>.
inline BemMatrix assemble_V(const Mesh& mesh, const QuadratureConfig& q = {}) {
    const auto panels = boundary_panels(mesh);
    const int m = mesh.num_boundary_tris();
    BemMatrix out;
    out.values.resize(m, m);
    for (int j = 0; j < m; ++j)
        for (int i = 0; i <= j; ++i) {
            const double v = single_layer_pair(panels[i], mesh.boundary_tris[i], panels[j],
                                               mesh.boundary_tris[j], q, &out.low_order_warning);
            out.values(i, j) = v;
            out.values(j, i) = v;
        }
    return out;
}

/// Double-layer Galerkin matrix K (m x n_Gamma), K(i, k) = <K xi_k, chi_i>, columns are
/// trace dofs; Mesh::trace_to_volume maps them to volume vertices.
inline BemMatrix assemble_K(const Mesh& mesh, const QuadratureConfig& q = {}) {
    const auto panels = boundary_panels(mesh);
    const int m = mesh.num_boundary_tris();
    BemMatrix out;
    out.values = DenseMatrix::Zero(m, mesh.num_trace());
    for (int j = 0; j < m; ++j) {
        const auto& vb = mesh.boundary_tris[j];
        for (int i = 0; i < m; ++i) {
            const auto vals = double_layer_pair(panels[i], mesh.boundary_tris[i], panels[j], vb, q,
                                                &out.low_order_warning);
            for (int k = 0; k < 3; ++k) out.values(i, mesh.volume_to_trace[vb[k]]) += vals[k];
        }
    }
    return out;
}

/// Surface curls of the trace hats: component c of curl_Gamma xi_k on panel t, as m x n_Gamma.
inline std::array<SparseMatrix, 3> surface_curl_matrices(const Mesh& mesh) {
    std::array<std::vector<Triplet>, 3> trip;
    for (int t = 0; t < mesh.num_boundary_tris(); ++t) {
        const Triangle tri = mesh.triangle(t);
        const auto& f = mesh.boundary_tris[t];
        for (int k = 0; k < 3; ++k) {
            // grad of the hat at vertex k: n x (opposite edge) / (2|T|)
            const Vec3 e = tri.v[(k + 2) % 3] - tri.v[(k + 1) % 3];
            const Vec3 grad = tri.normal.cross(e) / (2.0 * tri.area);
            const Vec3 curl = tri.normal.cross(grad);
            for (int c = 0; c < 3; ++c) trip[c].emplace_back(t, mesh.volume_to_trace[f[k]], curl[c]);
        }
    }
    std::array<SparseMatrix, 3> out;
    for (int c = 0; c < 3; ++c) {
        out[c].resize(mesh.num_boundary_tris(), mesh.num_trace());
        out[c].setFromTriplets(trip[c].begin(), trip[c].end());
    }
    return out;
}

/// Hypersingular Galerkin matrix W (n_Gamma x n_Gamma) from the surface-curl identity
/// <W u, v> = <V curl u, curl v>, reusing the P0 single-layer matrix.
inline DenseMatrix assemble_W_from_V(const Mesh& mesh, const DenseMatrix& v) {
    const auto curls = surface_curl_matrices(mesh);
    DenseMatrix w = DenseMatrix::Zero(mesh.num_trace(), mesh.num_trace());
    for (const auto& c : curls) {
        const DenseMatrix vc = v * c;
        w.noalias() += c.transpose() * vc;
    }
    return 0.5 * (w + w.transpose());
}

inline BemMatrix assemble_W(const Mesh& mesh, const QuadratureConfig& q = {}) {
    BemMatrix v = assemble_V(mesh, q);
    return {assemble_W_from_V(mesh, v.values), v.low_order_warning};
}

// -------------------------------------------------------------------------------------
// Potentials
// -------------------------------------------------------------------------------------

struct PotentialResult {
    Vector value;
    std::vector<Vec3> gradient;  // empty unless requested
};

namespace detail {

/// Sub-triangle with the barycentric coordinates (w.r.t. the parent panel) of its corners.
struct SubPanel {
    Triangle tri;
    std::array<std::array<double, 3>, 3> bary;
};

inline SubPanel root_panel(const Triangle& t) {
    return {t, {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}}};
}

inline std::array<SubPanel, 4> split(const SubPanel& s) {
    auto mid = [](const std::array<double, 3>& a, const std::array<double, 3>& b) {
        return std::array<double, 3>{0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])};
    };
    const Vec3 m01 = 0.5 * (s.tri.v[0] + s.tri.v[1]);
    const Vec3 m12 = 0.5 * (s.tri.v[1] + s.tri.v[2]);
    const Vec3 m20 = 0.5 * (s.tri.v[2] + s.tri.v[0]);
    const auto b01 = mid(s.bary[0], s.bary[1]);
    const auto b12 = mid(s.bary[1], s.bary[2]);
    const auto b20 = mid(s.bary[2], s.bary[0]);
    auto make = [&](const Vec3& a, const Vec3& b, const Vec3& c, const std::array<double, 3>& ba,
                    const std::array<double, 3>& bb, const std::array<double, 3>& bc) {
        SubPanel p;
        p.tri.v = {a, b, c};
        p.tri.normal = s.tri.normal;
        p.tri.area = 0.25 * s.tri.area;
        p.bary = {ba, bb, bc};
        return p;
    };
    return {make(s.tri.v[0], m01, m20, s.bary[0], b01, b20),
            make(m01, s.tri.v[1], m12, b01, s.bary[1], b12),
            make(m20, m12, s.tri.v[2], b20, b12, s.bary[2]),
            make(m12, m20, m01, b12, b20, b01)};
}

/// Adaptive panel integral of f(y, bary_y) * |dy| as seen from the point x.
template <int N, class F>
void integrate_from_point(const Vec3& x, const SubPanel& s, int depth, const QuadratureConfig& q,
                          F& f, std::array<double, N>& acc) {
    const double diam = s.tri.diameter();
    const double dist = point_triangle_distance(x, s.tri);
    if (dist < 2.0 * diam && depth < q.potential_max_depth) {
        for (const auto& child : split(s)) integrate_from_point<N>(x, child, depth + 1, q, f, acc);
        return;
    }
    int order = q.potential_order;
    const double ratio = circumradius_from_centroid(s.tri) / (x - s.tri.centroid()).norm();
    if (ratio < 0.5) {
        const int needed = static_cast<int>(std::ceil(std::log(q.far_tol) / (2.0 * std::log(ratio))));
        order = std::clamp(needed, 1, q.potential_order);
    }
    const auto& rule = quad::triangle_rule(order);
    const double jac = 2.0 * s.tri.area;
    for (std::size_t i = 0; i < rule.w.size(); ++i) {
        const auto l = quad::triangle_shape(rule.st[i][0], rule.st[i][1]);
        std::array<double, 3> b{};
        for (int k = 0; k < 3; ++k) b[k] = l[0] * s.bary[0][k] + l[1] * s.bary[1][k] + l[2] * s.bary[2][k];
        const Vec3 y = s.tri.map(rule.st[i][0], rule.st[i][1]);
        const auto val = f(y, b);
        for (int k = 0; k < N; ++k) acc[k] += jac * rule.w[i] * val[k];
    }
}

/// Rejects points on the surface of the unit cube.
inline void check_off_boundary(const Vec3& x) {
    const bool inside_closed = (x.array() >= 0.0).all() && (x.array() <= 1.0).all();
    if (!inside_closed) return;
    const double d = std::min({x[0], x[1], x[2], 1.0 - x[0], 1.0 - x[1], 1.0 - x[2]});
    if (d < 1e-12)
        throw std::invalid_argument("potential evaluation: point lies on the boundary");
}

}  // namespace detail

/// Single-layer potential V~phi and optionally its gradient, phi given by P0 coefficients.
inline PotentialResult eval_single_layer(const Mesh& mesh, const std::vector<Vec3>& points,
                                         const Vector& phi, bool want_gradient,
                                         const QuadratureConfig& q = {},
                                         bool singularity_subtraction = true) {
    if (phi.size() != mesh.num_boundary_tris())
        throw std::invalid_argument("eval_single_layer: density length mismatch");
    const auto panels = boundary_panels(mesh);
    PotentialResult res;
    res.value = Vector::Zero(static_cast<Eigen::Index>(points.size()));
    if (want_gradient) res.gradient.assign(points.size(), Vec3::Zero());
    for (std::size_t p = 0; p < points.size(); ++p) {
        const Vec3& x = points[p];
        detail::check_off_boundary(x);
        for (int t = 0; t < mesh.num_boundary_tris(); ++t) {
            if (phi[t] == 0.0) continue;
            const Triangle& tri = panels[t];
            std::array<double, 4> acc{};
            auto f = [&](const Vec3& y, const std::array<double, 3>&) {
                const Vec3 d = x - y;
                const double r = d.norm();
                const double g = kInv4Pi / r;
                if (!want_gradient) return std::array<double, 4>{g, 0, 0, 0};
                const Vec3 grad = -kInv4Pi * d / (r * r * r);
                return std::array<double, 4>{g, grad[0], grad[1], grad[2]};
            };
            detail::integrate_from_point<4>(x, detail::root_panel(tri), 0, q, f, acc);
            res.value[p] += phi[t] * acc[0];
            if (want_gradient) {
                Vec3 g(acc[1], acc[2], acc[3]);
                if (singularity_subtraction) {
                    // exact normal component: n . grad int_T G = Omega / (4 pi)
                    const double exact_n = kInv4Pi * solid_angle(x, tri);
                    g += (exact_n - g.dot(tri.normal)) * tri.normal;
                }
                res.gradient[p] += phi[t] * g;
            }
        }
    }
    return res;
}

/// Double-layer potential K~u and optionally its gradient, u given by trace P1 coefficients.
///
/// With singularity subtraction the constant part of u on each panel is integrated exactly
/// through the solid angle and only the linear remainder is integrated numerically.
inline PotentialResult eval_double_layer(const Mesh& mesh, const std::vector<Vec3>& points,
                                         const Vector& u, bool want_gradient,
                                         const QuadratureConfig& q = {},
                                         bool singularity_subtraction = true) {
    if (u.size() != mesh.num_trace())
        throw std::invalid_argument("eval_double_layer: density length mismatch");
    const auto panels = boundary_panels(mesh);
    PotentialResult res;
    res.value = Vector::Zero(static_cast<Eigen::Index>(points.size()));
    if (want_gradient) res.gradient.assign(points.size(), Vec3::Zero());
    for (std::size_t p = 0; p < points.size(); ++p) {
        const Vec3& x = points[p];
        detail::check_off_boundary(x);
        for (int t = 0; t < mesh.num_boundary_tris(); ++t) {
            const auto& f = mesh.boundary_tris[t];
            const std::array<double, 3> uk{u[mesh.volume_to_trace[f[0]]], u[mesh.volume_to_trace[f[1]]],
                                           u[mesh.volume_to_trace[f[2]]]};
            if (uk[0] == 0.0 && uk[1] == 0.0 && uk[2] == 0.0) continue;
            const Triangle& tri = panels[t];
            const Vec3 n = tri.normal;
            double base = 0.0;  // density value at the foot point, integrated exactly
            if (singularity_subtraction && !want_gradient) {
                const Vec3 foot = x - (x - tri.v[0]).dot(n) * n;
                // barycentric coordinates of the foot point (may lie outside the panel)
                const Vec3 e1 = tri.v[1] - tri.v[0], e2 = tri.v[2] - tri.v[0], r = foot - tri.v[0];
                const double d11 = e1.dot(e1), d12 = e1.dot(e2), d22 = e2.dot(e2);
                const double r1 = r.dot(e1), r2 = r.dot(e2);
                const double det = d11 * d22 - d12 * d12;
                const double b1 = (d22 * r1 - d12 * r2) / det;
                const double b2 = (d11 * r2 - d12 * r1) / det;
                base = (1.0 - b1 - b2) * uk[0] + b1 * uk[1] + b2 * uk[2];
            }
            std::array<double, 4> acc{};
            auto integrand = [&](const Vec3& y, const std::array<double, 3>& b) {
                const double dens = b[0] * uk[0] + b[1] * uk[1] + b[2] * uk[2] - base;
                const Vec3 d = x - y;
                const double r = d.norm();
                const double r3 = r * r * r;
                const double dn = d.dot(n);
                const double k = kInv4Pi * dn / r3;
                if (!want_gradient) return std::array<double, 4>{k * dens, 0, 0, 0};
                const Vec3 g = kInv4Pi * (n / r3 - 3.0 * dn * d / (r3 * r * r));
                return std::array<double, 4>{k * dens, g[0] * dens, g[1] * dens, g[2] * dens};
            };
            detail::integrate_from_point<4>(x, detail::root_panel(tri), 0, q, integrand, acc);
            res.value[p] += acc[0] - base * kInv4Pi * solid_angle(x, tri);
            if (want_gradient) res.gradient[p] += Vec3(acc[1], acc[2], acc[3]);
        }
    }
    return res;
}

}  // namespace hicoup

#endif

#ifndef HICOUP_DUAL_BASIS_HPP
#define HICOUP_DUAL_BASIS_HPP

#include "hicoup/coupling.hpp"
#include "hicoup/dense.hpp"
#include "hicoup/fem.hpp"
#include "hicoup/mesh.hpp"

#include <memory>
#include <random>
#include <stdexcept>
#include <vector>

namespace hicoup {

/// Element of L2(Omega) x L2(Gamma) x L2(Gamma): discontinuous P1 on tets, discontinuous
/// P1 on boundary triangles, P0 on boundary triangles.
struct PiecewiseField {
    std::vector<Eigen::Vector4d> tet;
    std::vector<Eigen::Vector3d> tri;
    Vector p0;

    static PiecewiseField zero(const Mesh& mesh) {
        PiecewiseField f;
        f.tet.assign(mesh.tets.size(), Eigen::Vector4d::Zero());
        f.tri.assign(mesh.boundary_tris.size(), Eigen::Vector3d::Zero());
        f.p0 = Vector::Zero(mesh.num_boundary_tris());
        return f;
    }
};

/// L2 inner product of two fields, exact for the piecewise polynomials involved.
inline double pairing(const Mesh& mesh, const PiecewiseField& a, const PiecewiseField& b) {
    double sum = 0.0;
    for (int t = 0; t < mesh.num_tets(); ++t)
        sum += a.tet[t].dot(element_mass(mesh.tet_volume(t)) * b.tet[t]);
    for (int t = 0; t < mesh.num_boundary_tris(); ++t) {
        const double area = mesh.triangle(t).area;
        sum += a.tri[t].dot(triangle_mass(area) * b.tri[t]) + a.p0[t] * b.p0[t] * area;
    }
    return sum;
}

/// Local L2-dual basis of the product basis
///   interior hat xi_i -> (xi_i, 0, 0), boundary hat xi_i -> (xi_i, gamma xi_i, 0),
///   indicator chi_t -> (0, 0, chi_t).
/// Interior duals live on a single tetrahedron, boundary-vertex duals on a single boundary
/// triangle, P0 duals are chi_t / |T_t|.
class DualBasis {
public:
    struct Host {
        int element = -1;  // tet for interior vertices, boundary triangle otherwise
        int local = -1;
        Eigen::Vector4d coeff = Eigen::Vector4d::Zero();  // nodal values on the host
    };

    DualBasis() = default;
    explicit DualBasis(std::shared_ptr<const Mesh> mesh) : mesh_(std::move(mesh)) {
        const Mesh& me = *mesh_;
        const int ns = me.subdivisions();
        hosts_.resize(me.num_vertices());
        for (int k = 0; k < ns; ++k)
            for (int j = 0; j < ns; ++j)
                for (int i = 0; i < ns; ++i) {
                    const int v = me.vertex_index(i, j, k);
                    if (me.volume_to_trace[v] >= 0) continue;
                    // first Kuhn tet of the subcube whose lower corner is v
                    const int t = 6 * (i + ns * (j + ns * k));
                    hosts_[v] = make_tet_host(t, v);
                }
        std::vector<int> first_tri(me.num_vertices(), -1);
        for (int t = 0; t < me.num_boundary_tris(); ++t)
            for (int v : me.boundary_tris[t])
                if (first_tri[v] < 0) first_tri[v] = t;
        for (int v = 0; v < me.num_vertices(); ++v)
            if (me.volume_to_trace[v] >= 0) hosts_[v] = make_tri_host(first_tri[v], v);
    }

    const Mesh& mesh() const { return *mesh_; }
    int n() const { return mesh_->num_vertices(); }
    int m() const { return mesh_->num_boundary_tris(); }
    int size() const { return n() + m(); }
    const Host& host(int v) const { return hosts_.at(v); }

    /// Lambda x = sum_j x_j lambda_j.
    PiecewiseField apply(const Vector& x) const {
        check_size(x);
        const Mesh& me = *mesh_;
        PiecewiseField f = PiecewiseField::zero(me);
        for (int v = 0; v < n(); ++v) {
            if (x[v] == 0.0) continue;
            const Host& h = hosts_[v];
            if (me.volume_to_trace[v] < 0)
                f.tet[h.element] += x[v] * h.coeff;
            else
                f.tri[h.element] += x[v] * h.coeff.head<3>();
        }
        for (int t = 0; t < m(); ++t) f.p0[t] = x[n() + t] / me.triangle(t).area;
        return f;
    }

    /// Lambda^T v = (<v, lambda_i>)_i.
    Vector apply_transpose(const PiecewiseField& field) const {
        const Mesh& me = *mesh_;
        Vector y(size());
        for (int v = 0; v < n(); ++v) {
            const Host& h = hosts_[v];
            if (me.volume_to_trace[v] < 0)
                y[v] = field.tet[h.element].dot(element_mass(me.tet_volume(h.element)) * h.coeff);
            else
                y[v] = field.tri[h.element].dot(triangle_mass(me.triangle(h.element).area) *
                                                h.coeff.head<3>());
        }
        for (int t = 0; t < m(); ++t) y[n() + t] = field.p0[t];
        return y;
    }

    /// Phi y = sum_j y_j phi_j in the product representation.
    PiecewiseField embed(const Vector& y) const {
        check_size(y);
        const Mesh& me = *mesh_;
        PiecewiseField f = PiecewiseField::zero(me);
        for (int t = 0; t < me.num_tets(); ++t)
            for (int a = 0; a < 4; ++a) f.tet[t][a] = y[me.tets[t][a]];
        for (int t = 0; t < m(); ++t) {
            for (int a = 0; a < 3; ++a) f.tri[t][a] = y[me.boundary_tris[t][a]];
            f.p0[t] = y[n() + t];
        }
        return f;
    }

    /// Galerkin functional (<v, phi_j>)_j of a field.
    Vector functional(const PiecewiseField& field) const {
        const Mesh& me = *mesh_;
        Vector r = Vector::Zero(size());
        for (int t = 0; t < me.num_tets(); ++t) {
            const Eigen::Vector4d loc = element_mass(me.tet_volume(t)) * field.tet[t];
            for (int a = 0; a < 4; ++a) r[me.tets[t][a]] += loc[a];
        }
        for (int t = 0; t < m(); ++t) {
            const double area = me.triangle(t).area;
            const Eigen::Vector3d loc = triangle_mass(area) * field.tri[t];
            for (int a = 0; a < 3; ++a) r[me.boundary_tris[t][a]] += loc[a];
            r[n() + t] = field.p0[t] * area;
        }
        return r;
    }

    /// Spectral norm of Lambda as a map from l2 to the product L2 space.
    NormEstimate norm_estimate(int max_iters = 500, double tol = 1e-10) const {
        const MatVec gram = [this](const Vector& x) { return apply_transpose(apply(x)); };
        NormEstimate est = spectral_norm_estimate(gram, gram, size(), max_iters, tol);
        est.value = std::sqrt(est.value);
        return est;
    }

private:
    void check_size(const Vector& x) const {
        if (x.size() != size()) throw std::invalid_argument("DualBasis: vector length mismatch");
    }

    Host make_tet_host(int t, int v) const {
        const auto& e = mesh_->tets[t];
        Host h;
        h.element = t;
        for (int a = 0; a < 4; ++a)
            if (e[a] == v) h.local = a;
        if (h.local < 0) throw std::logic_error("DualBasis: host tet does not contain vertex");
        const Eigen::Matrix4d mt = element_mass(mesh_->tet_volume(t));
        h.coeff = mt.inverse().col(h.local);
        return h;
    }

    Host make_tri_host(int t, int v) const {
        const auto& f = mesh_->boundary_tris[t];
        Host h;
        h.element = t;
        for (int a = 0; a < 3; ++a)
            if (f[a] == v) h.local = a;
        if (h.local < 0) throw std::logic_error("DualBasis: host triangle does not contain vertex");
        const Eigen::Matrix3d mt = triangle_mass(mesh_->triangle(t).area);
        h.coeff.head<3>() = mt.inverse().col(h.local);
        return h;
    }

    std::shared_ptr<const Mesh> mesh_;
    std::vector<Host> hosts_;
};

inline DualBasis build_dual_basis(std::shared_ptr<const Mesh> mesh) { return DualBasis(std::move(mesh)); }

/// Compares A^{-1} x with Lambda^T S_N Lambda x for x = e_1 and `trials` random vectors.
/// S_N Lambda x is the Galerkin solution for the functionals <Lambda x, phi_j>.
/// Returns the largest ||A^{-1}x - Lambda^T S_N Lambda x|| / ||x||.
inline double check_representation_formula(const CouplingSystem& sys, const DualBasis& dual,
                                           int trials, std::uint64_t seed = kNormSeed) {
    if (dual.size() != sys.size())
        throw std::invalid_argument("check_representation_formula: dual basis does not match system");
    const DenseLU lu(sys.materialize());
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    double worst = 0.0;
    for (int trial = 0; trial <= trials; ++trial) {
        Vector x = Vector::Zero(sys.size());
        if (trial == 0)
            x[0] = 1.0;
        else
            for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = normal(rng);
        const Vector direct = lu.solve(x);
        const Vector rhs = dual.functional(dual.apply(x));
        const Vector coeffs = lu.solve(rhs);
        const Vector via_dual = dual.apply_transpose(dual.embed(coeffs));
        worst = std::max(worst, (direct - via_dual).norm() / x.norm());
    }
    return worst;
}

}  // namespace hicoup

#endif

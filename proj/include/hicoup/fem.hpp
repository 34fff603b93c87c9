#ifndef HICOUP_FEM_HPP
#define HICOUP_FEM_HPP

#include "hicoup/dense.hpp"
#include "hicoup/mesh.hpp"

#include <Eigen/Sparse>

#include <array>
#include <stdexcept>
#include <vector>

namespace hicoup {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;

/// Constant symmetric positive definite diffusion coefficient.
class Coefficient {
public:
    Coefficient() : c_(Eigen::Matrix3d::Identity()) {}

    explicit Coefficient(const Eigen::Matrix3d& c) : c_(c) {
        if ((c - c.transpose()).cwiseAbs().maxCoeff() > 1e-14 * std::max(1.0, c.cwiseAbs().maxCoeff()))
            throw std::invalid_argument("Coefficient: matrix is not symmetric");
        if (ellipticity() <= 0.0)
            throw std::invalid_argument("Coefficient: matrix is not positive definite");
    }

    static Coefficient identity() { return Coefficient(); }
    static Coefficient scaled(double alpha) { return Coefficient(alpha * Eigen::Matrix3d::Identity()); }

    const Eigen::Matrix3d& matrix() const { return c_; }

    /// Smallest eigenvalue, the ellipticity constant.
    double ellipticity() const {
        return Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d>(c_, Eigen::EigenvaluesOnly)
            .eigenvalues()
            .minCoeff();
    }

private:
    Eigen::Matrix3d c_;
};

/// Gradients of the four barycentric coordinates on tetrahedron t (rows) and its volume.
inline std::pair<Eigen::Matrix<double, 4, 3>, double> tet_gradients(const Mesh& mesh, int t) {
    const auto& e = mesh.tets[t];
    Eigen::Matrix3d jac;
    for (int k = 0; k < 3; ++k) jac.col(k) = mesh.vertices[e[k + 1]] - mesh.vertices[e[0]];
    const double det = jac.determinant();
    const double vol = det / 6.0;
    const double scale = jac.cwiseAbs().maxCoeff();
    if (!(std::abs(det) > 1e-12 * scale * scale * scale))
        throw std::runtime_error("assembly: degenerate tetrahedron " + std::to_string(t));
    const Eigen::Matrix3d inv_t = jac.inverse().transpose();
    Eigen::Matrix<double, 4, 3> g;
    g.row(1) = inv_t.col(0).transpose();
    g.row(2) = inv_t.col(1).transpose();
    g.row(3) = inv_t.col(2).transpose();
    g.row(0) = -(g.row(1) + g.row(2) + g.row(3));
    return {g, std::abs(vol)};
}

/// Element stiffness |T| G C G^T with exact (constant) gradients.
inline Eigen::Matrix4d element_stiffness(const Mesh& mesh, int t, const Coefficient& c) {
    const auto [g, vol] = tet_gradients(mesh, t);
    return vol * g * c.matrix() * g.transpose();
}

/// Consistent P1 element mass matrix |T|/20 (1 + delta_ab).
inline Eigen::Matrix4d element_mass(double volume) {
    return volume / 20.0 * (Eigen::Matrix4d::Ones() + Eigen::Matrix4d::Identity());
}

inline Eigen::Matrix3d triangle_mass(double area) {
    return area / 12.0 * (Eigen::Matrix3d::Ones() + Eigen::Matrix3d::Identity());
}

inline SparseMatrix assemble_stiffness(const Mesh& mesh, const Coefficient& c) {
    std::vector<Triplet> trip;
    trip.reserve(16 * mesh.tets.size());
    for (int t = 0; t < mesh.num_tets(); ++t) {
        const Eigen::Matrix4d ke = element_stiffness(mesh, t, c);
        const auto& e = mesh.tets[t];
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) trip.emplace_back(e[a], e[b], ke(a, b));
    }
    SparseMatrix a(mesh.num_vertices(), mesh.num_vertices());
    a.setFromTriplets(trip.begin(), trip.end());
    return a;
}

/// Consistent P1 volume mass matrix (n x n).
inline SparseMatrix assemble_volume_mass(const Mesh& mesh) {
    std::vector<Triplet> trip;
    trip.reserve(16 * mesh.tets.size());
    for (int t = 0; t < mesh.num_tets(); ++t) {
        const Eigen::Matrix4d me = element_mass(mesh.tet_volume(t));
        const auto& e = mesh.tets[t];
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) trip.emplace_back(e[a], e[b], me(a, b));
    }
    SparseMatrix m(mesh.num_vertices(), mesh.num_vertices());
    m.setFromTriplets(trip.begin(), trip.end());
    return m;
}

/// Boundary mass M (m x n): M(i, j) = <xi_j, chi_i>_Gamma = |T_i|/3 for the vertices of T_i.
inline SparseMatrix assemble_boundary_mass(const Mesh& mesh) {
    std::vector<Triplet> trip;
    trip.reserve(3 * mesh.boundary_tris.size());
    for (int t = 0; t < mesh.num_boundary_tris(); ++t) {
        const double area = mesh.triangle(t).area;
        for (int v : mesh.boundary_tris[t]) trip.emplace_back(t, v, area / 3.0);
    }
    SparseMatrix m(mesh.num_boundary_tris(), mesh.num_vertices());
    m.setFromTriplets(trip.begin(), trip.end());
    return m;
}

/// Load vector <f, xi_i> for f given by its P1 nodal coefficients.
inline Vector assemble_load(const Mesh& mesh, const Vector& f) {
    if (f.size() != mesh.num_vertices())
        throw std::invalid_argument("assemble_load: coefficient vector has length " +
                                    std::to_string(f.size()) + ", expected " +
                                    std::to_string(mesh.num_vertices()));
    Vector load = Vector::Zero(mesh.num_vertices());
    for (int t = 0; t < mesh.num_tets(); ++t) {
        const Eigen::Matrix4d me = element_mass(mesh.tet_volume(t));
        const auto& e = mesh.tets[t];
        Eigen::Vector4d fl;
        for (int a = 0; a < 4; ++a) fl[a] = f[e[a]];
        const Eigen::Vector4d le = me * fl;
        for (int a = 0; a < 4; ++a) load[e[a]] += le[a];
    }
    return load;
}

/// Sparse entry lookup (zero when not stored).
inline double sparse_entry(const SparseMatrix& a, int i, int j) {
    const auto* outer = a.outerIndexPtr();
    const auto* inner = a.innerIndexPtr();
    const auto* begin = inner + outer[i];
    const auto* end = inner + outer[i + 1];
    const auto* it = std::lower_bound(begin, end, j);
    if (it != end && *it == j) return a.valuePtr()[it - inner];
    return 0.0;
}

}  // namespace hicoup

#endif

#ifndef HICOUP_COUPLING_HPP
#define HICOUP_COUPLING_HPP

#include "hicoup/bem.hpp"
#include "hicoup/dense.hpp"
#include "hicoup/fem.hpp"
#include "hicoup/mesh.hpp"

#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>

namespace hicoup {

enum class CouplingKind { bmc, sym, jn };

inline std::string to_string(CouplingKind k) {
    switch (k) {
        case CouplingKind::bmc: return "bmc";
        case CouplingKind::sym: return "sym";
        case CouplingKind::jn: return "jn";
    }
    return "?";
}

inline CouplingKind parse_kind(const std::string& s) {
    if (s == "bmc") return CouplingKind::bmc;
    if (s == "sym") return CouplingKind::sym;
    if (s == "jn") return CouplingKind::jn;
    throw std::invalid_argument("unknown coupling kind '" + s + "' (expected bmc, sym or jn)");
}

/// Data of the transmission problem as coefficient vectors: f in P1 (n), u0 in trace P1
/// (n_Gamma), phi0 in P0 (m).
struct CouplingData {
    Vector f;
    Vector u0;
    Vector phi0;
};

/// Coupled FEM-BEM Galerkin system on the index set [0, n) x [n, n+m).
///
/// K and W are kept on the trace dofs; the accessors below expand them to volume columns.
class CouplingSystem {
public:
    CouplingKind kind = CouplingKind::jn;
    std::shared_ptr<const Mesh> mesh;
    SparseMatrix A;       // n x n
    SparseMatrix M;       // m x n, row = P0 test dof
    DenseMatrix V;        // m x m
    DenseMatrix K;        // m x n_Gamma
    DenseMatrix W;        // n_Gamma x n_Gamma, empty unless kind == sym
    Vector s;             // stabilization, length n + m
    bool low_order_warning = false;

    int n() const { return static_cast<int>(A.rows()); }
    int m() const { return static_cast<int>(V.rows()); }
    int size() const { return n() + m(); }

    /// Restriction of a volume P1 vector to the trace dofs.
    Vector trace(const Vector& u) const {
        Vector t(mesh->num_trace());
        for (int k = 0; k < mesh->num_trace(); ++k) t[k] = u[mesh->trace_to_volume[k]];
        return t;
    }
    /// Extension by zero from the trace dofs to all volume dofs.
    Vector extend(const Vector& t) const {
        Vector u = Vector::Zero(n());
        for (int k = 0; k < mesh->num_trace(); ++k) u[mesh->trace_to_volume[k]] = t[k];
        return u;
    }

    /// (1/2 M - K) u for a volume vector u.
    Vector half_minus_K(const Vector& u) const { return 0.5 * (M * u) - K * trace(u); }
    /// (1/2 M - K)^T phi as a volume vector.
    Vector half_minus_K_transpose(const Vector& phi) const {
        Vector r = 0.5 * (M.transpose() * phi);
        return r - extend(K.transpose() * phi);
    }

    Vector apply(const Vector& x) const {
        if (x.size() != size()) throw std::invalid_argument("CouplingSystem::apply: dimension mismatch");
        const Vector u = x.head(n());
        const Vector phi = x.tail(m());
        Vector y(size());
        switch (kind) {
            case CouplingKind::jn:
                y.head(n()) = A * u - M.transpose() * phi;
                y.tail(m()) = half_minus_K(u) + V * phi;
                break;
            case CouplingKind::sym:
                y.head(n()) = A * u + extend(W * trace(u)) - half_minus_K_transpose(phi);
                y.tail(m()) = half_minus_K(u) + V * phi;
                break;
            case CouplingKind::bmc:
                y.head(n()) = A * u + half_minus_K_transpose(phi);
                y.tail(m()) = -(M * u) + V * phi;
                break;
        }
        return y;
    }

    Vector apply_transpose(const Vector& x) const {
        if (x.size() != size())
            throw std::invalid_argument("CouplingSystem::apply_transpose: dimension mismatch");
        const Vector u = x.head(n());
        const Vector phi = x.tail(m());
        Vector y(size());
        switch (kind) {
            case CouplingKind::jn:
                y.head(n()) = A.transpose() * u + half_minus_K_transpose(phi);
                y.tail(m()) = -(M * u) + V.transpose() * phi;
                break;
            case CouplingKind::sym:
                y.head(n()) = A.transpose() * u + extend(W.transpose() * trace(u)) +
                              half_minus_K_transpose(phi);
                y.tail(m()) = -half_minus_K(u) + V.transpose() * phi;
                break;
            case CouplingKind::bmc:
                y.head(n()) = A.transpose() * u - M.transpose() * phi;
                y.tail(m()) = half_minus_K(u) + V.transpose() * phi;
                break;
        }
        return y;
    }

    /// B x = A x + s (s^T x).
    Vector apply_stabilized(const Vector& x) const { return apply(x) + s * s.dot(x); }
    Vector apply_stabilized_transpose(const Vector& x) const { return apply_transpose(x) + s * s.dot(x); }

    /// Right-hand side of the stabilized system with the same solution as the original one.
    /// Summing the BEM equations against the constant gives s^T x = 1^T rhs_bem.
    Vector stabilized_rhs(const Vector& rhs) const { return rhs + s * rhs.tail(m()).sum(); }

    /// Entry (i, j) of the coupling matrix; stabilized adds s_i s_j.
    double entry(int i, int j, bool stabilized = false) const {
        const int nn = n();
        double v = 0.0;
        if (i < nn && j < nn) {
            v = sparse_entry(A, i, j);
            if (kind == CouplingKind::sym) {
                const int ti = mesh->volume_to_trace[i], tj = mesh->volume_to_trace[j];
                if (ti >= 0 && tj >= 0) v += W(ti, tj);
            }
        } else if (i < nn) {
            const int t = j - nn;
            switch (kind) {
                case CouplingKind::jn: v = -sparse_entry(M, t, i); break;
                case CouplingKind::sym: v = -half_minus_K_entry(t, i); break;
                case CouplingKind::bmc: v = half_minus_K_entry(t, i); break;
            }
        } else if (j < nn) {
            const int t = i - nn;
            switch (kind) {
                case CouplingKind::jn:
                case CouplingKind::sym: v = half_minus_K_entry(t, j); break;
                case CouplingKind::bmc: v = -sparse_entry(M, t, j); break;
            }
        } else {
            v = V(i - nn, j - nn);
        }
        if (stabilized) v += s[i] * s[j];
        return v;
    }

    /// Dense coupling matrix (small levels only).
    DenseMatrix materialize(bool stabilized = false) const {
        const int nn = n(), mm = m(), nt = mesh->num_trace();
        DenseMatrix a = DenseMatrix::Zero(size(), size());
        a.topLeftCorner(nn, nn) = DenseMatrix(A);
        DenseMatrix hk = 0.5 * DenseMatrix(M);  // m x n
        for (int k = 0; k < nt; ++k) hk.col(mesh->trace_to_volume[k]) -= K.col(k);
        switch (kind) {
            case CouplingKind::jn:
                a.topRightCorner(nn, mm) = -DenseMatrix(M).transpose();
                a.bottomLeftCorner(mm, nn) = hk;
                break;
            case CouplingKind::sym:
                for (int r = 0; r < nt; ++r)
                    for (int c = 0; c < nt; ++c)
                        a(mesh->trace_to_volume[r], mesh->trace_to_volume[c]) += W(r, c);
                a.topRightCorner(nn, mm) = -hk.transpose();
                a.bottomLeftCorner(mm, nn) = hk;
                break;
            case CouplingKind::bmc:
                a.topRightCorner(nn, mm) = hk.transpose();
                a.bottomLeftCorner(mm, nn) = -DenseMatrix(M);
                break;
        }
        a.bottomRightCorner(mm, mm) = V;
        if (stabilized) a += s * s.transpose();
        return a;
    }

    /// FEM block with its stabilization part, A + b b^T.
    double stabilized_fem_entry(int i, int j) const { return sparse_entry(A, i, j) + s[i] * s[j]; }

private:
    double half_minus_K_entry(int t, int v) const {
        const int tv = mesh->volume_to_trace[v];
        if (tv < 0) return 0.0;
        return 0.5 * sparse_entry(M, t, v) - K(t, tv);
    }
};

/// Assembles the coupling blocks and the stabilization vector.
inline CouplingSystem assemble_coupling(CouplingKind kind, std::shared_ptr<const Mesh> mesh,
                                        const Coefficient& c = Coefficient::identity(),
                                        const QuadratureConfig& q = {}) {
    if (!mesh) throw std::invalid_argument("assemble_coupling: null mesh");
    const double cell = c.ellipticity();
    if (kind != CouplingKind::sym && !(cell > 0.25))
        throw std::invalid_argument("assemble_coupling: " + to_string(kind) +
                                    " coupling requires C_ell > 1/4, got " + std::to_string(cell));
    CouplingSystem sys;
    sys.kind = kind;
    sys.mesh = mesh;
    sys.A = assemble_stiffness(*mesh, c);
    sys.M = assemble_boundary_mass(*mesh);
    BemMatrix v = assemble_V(*mesh, q);
    BemMatrix k = assemble_K(*mesh, q);
    sys.low_order_warning = v.low_order_warning || k.low_order_warning;
    sys.V = std::move(v.values);
    sys.K = std::move(k.values);
    if (kind == CouplingKind::sym) sys.W = assemble_W_from_V(*mesh, sys.V);

    const int n = sys.n(), m = sys.m();
    sys.s = Vector::Zero(n + m);
    // column sums of (1/2 M - K) and of V, i.e. pairings with the constant 1 on Gamma
    const Vector ones_m = Vector::Ones(m);
    sys.s.head(n) = sys.half_minus_K_transpose(ones_m);
    sys.s.tail(m) = sys.V.transpose() * ones_m;
    return sys;
}

inline CouplingSystem assemble_coupling(CouplingKind kind, const Mesh& mesh,
                                        const Coefficient& c = Coefficient::identity(),
                                        const QuadratureConfig& q = {}) {
    return assemble_coupling(kind, std::make_shared<const Mesh>(mesh), c, q);
}

/// Galerkin right-hand side for the chosen coupling.
inline Vector assemble_rhs(const CouplingSystem& sys, const CouplingData& data) {
    const Mesh& mesh = *sys.mesh;
    if (data.f.size() != mesh.num_vertices() || data.u0.size() != mesh.num_trace() ||
        data.phi0.size() != mesh.num_boundary_tris())
        throw std::invalid_argument("assemble_rhs: data vector sizes do not match the mesh");
    const int n = sys.n(), m = sys.m();
    Vector rhs(n + m);
    const Vector u0 = sys.extend(data.u0);
    rhs.head(n) = assemble_load(mesh, data.f) + sys.M.transpose() * data.phi0;
    switch (sys.kind) {
        case CouplingKind::jn:
            rhs.tail(m) = sys.half_minus_K(u0);
            break;
        case CouplingKind::sym:
            rhs.head(n) += sys.extend(sys.W * data.u0);
            rhs.tail(m) = sys.half_minus_K(u0);
            break;
        case CouplingKind::bmc:
            rhs.tail(m) = -(sys.M * u0);
            break;
    }
    return rhs;
}

/// Zero data of the right sizes.
inline CouplingData zero_data(const Mesh& mesh) {
    return {Vector::Zero(mesh.num_vertices()), Vector::Zero(mesh.num_trace()),
            Vector::Zero(mesh.num_boundary_tris())};
}

/// Writes the nonzero entries of the materialized operator as row,col,value.
inline void dump_operator(const CouplingSystem& sys, const std::filesystem::path& file,
                          bool stabilized = false) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    const DenseMatrix a = sys.materialize(stabilized);
    std::ofstream os(file);
    os.precision(17);
    os << "row,col,value\n";
    for (Eigen::Index j = 0; j < a.cols(); ++j)
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            if (a(i, j) != 0.0) os << i << ',' << j << ',' << a(i, j) << '\n';
}

}  // namespace hicoup

#endif

#include "hicoup/coupling.hpp"
#include "hicoup/dual_basis.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace hicoup;

namespace {

std::shared_ptr<const Mesh> mesh2() {
    static const auto m = std::make_shared<const Mesh>(build_cube_mesh(2));
    return m;
}

const CouplingSystem& system2(CouplingKind k) {
    static const CouplingSystem bmc = assemble_coupling(CouplingKind::bmc, mesh2());
    static const CouplingSystem sym = assemble_coupling(CouplingKind::sym, mesh2());
    static const CouplingSystem jn = assemble_coupling(CouplingKind::jn, mesh2());
    return k == CouplingKind::bmc ? bmc : k == CouplingKind::sym ? sym : jn;
}

Vector random_vector(Eigen::Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    Vector x(n);
    for (auto& v : x) v = normal(rng);
    return x;
}

}  // namespace

TEST(Coupling, KindParsing) {
    EXPECT_EQ(parse_kind("jn"), CouplingKind::jn);
    EXPECT_EQ(to_string(parse_kind("bmc")), "bmc");
    EXPECT_THROW(parse_kind("costabel"), std::invalid_argument);
}

TEST(Coupling, EllipticityRequirement) {
    EXPECT_THROW(assemble_coupling(CouplingKind::jn, mesh2(), Coefficient::scaled(0.2)), std::invalid_argument);
    EXPECT_THROW(assemble_coupling(CouplingKind::bmc, mesh2(), Coefficient::scaled(0.25)), std::invalid_argument);
}

TEST(Coupling, DimensionsAndStabilization) {
    const CouplingSystem& s = system2(CouplingKind::jn);
    EXPECT_EQ(s.n(), 125);
    EXPECT_EQ(s.m(), 192);
    EXPECT_EQ(s.size(), 317);
    for (int v = 0; v < s.n(); ++v)
        if (s.mesh->volume_to_trace[v] < 0) EXPECT_EQ(s.s[v], 0.0);
    std::mt19937_64 rng(3);
    const Vector x = random_vector(s.size(), rng);
    EXPECT_LT((s.apply_stabilized(x) - s.apply(x) - s.s * s.s.dot(x)).norm(), 1e-14 * s.apply(x).norm());
}

TEST(Coupling, MatvecMatchesMaterializedColumns) {
    for (CouplingKind k : {CouplingKind::bmc, CouplingKind::sym, CouplingKind::jn}) {
        const CouplingSystem& s = system2(k);
        const DenseMatrix b = s.materialize(false);
        for (int j : {0, 31, 124, 125, 200, 316}) {
            const Vector e = Vector::Unit(s.size(), j);
            EXPECT_LT((s.apply(e) - b.col(j)).norm(), 1e-14 * b.col(j).norm()) << to_string(k);
            EXPECT_LT((s.apply_transpose(e) - b.row(j).transpose()).norm(), 1e-14 * b.row(j).norm());
            for (int i : {0, 60, 130, 250}) EXPECT_DOUBLE_EQ(s.entry(i, j, true), s.materialize(true)(i, j));
        }
    }
}

TEST(Coupling, BlockSigns) {
    const int n = system2(CouplingKind::jn).n(), m = system2(CouplingKind::jn).m();
    const DenseMatrix jn = system2(CouplingKind::jn).materialize();
    const DenseMatrix bmc = system2(CouplingKind::bmc).materialize();
    const DenseMatrix sym = system2(CouplingKind::sym).materialize();
    const CouplingSystem& s = system2(CouplingKind::jn);
    DenseMatrix hk = 0.5 * DenseMatrix(s.M);
    for (int k = 0; k < s.mesh->num_trace(); ++k) hk.col(s.mesh->trace_to_volume[k]) -= s.K.col(k);
    const DenseMatrix mt = DenseMatrix(s.M).transpose();
    EXPECT_LT((jn.topRightCorner(n, m) + mt).norm(), 1e-14);
    EXPECT_LT((jn.bottomLeftCorner(m, n) - hk).norm(), 1e-14);
    EXPECT_LT((bmc.topRightCorner(n, m) - hk.transpose()).norm(), 1e-14);
    EXPECT_LT((bmc.bottomLeftCorner(m, n) + DenseMatrix(s.M)).norm(), 1e-14);
    EXPECT_LT((sym.topRightCorner(n, m) + hk.transpose()).norm(), 1e-14);
    EXPECT_LT((sym.bottomLeftCorner(m, n) - hk).norm(), 1e-14);
    // diagonal blocks shared by bmc and jn
    EXPECT_EQ((jn.topLeftCorner(n, n) - bmc.topLeftCorner(n, n)).norm(), 0.0);
    EXPECT_EQ((jn.bottomRightCorner(m, m) - bmc.bottomRightCorner(m, m)).norm(), 0.0);
    // sym adds W on the trace block, and the skew structure of the off-diagonal blocks
    EXPECT_GT((sym.topLeftCorner(n, n) - jn.topLeftCorner(n, n)).norm(), 0.0);
    EXPECT_LT((sym.topRightCorner(n, m) + sym.bottomLeftCorner(m, n).transpose()).norm(), 1e-14);
}

TEST(Coupling, StabilizedJnPositiveDefinite) {
    const CouplingSystem& s = system2(CouplingKind::jn);
    std::mt19937_64 rng(17);
    for (int k = 0; k < 100; ++k) {
        const Vector x = random_vector(s.size(), rng);
        EXPECT_GT(x.dot(s.apply_stabilized(x)), 0.0);
    }
    const DenseMatrix b = s.materialize(true);
    const double lmin = Eigen::SelfAdjointEigenSolver<DenseMatrix>(0.5 * (b + b.transpose()), Eigen::EigenvaluesOnly)
                            .eigenvalues()
                            .minCoeff();
    EXPECT_GT(lmin, 0.0);
}

TEST(Coupling, StabilizedSystemHasSameSolution) {
    const CouplingSystem& s = system2(CouplingKind::jn);
    CouplingData d = zero_data(*s.mesh);
    d.f.setOnes();
    for (int k = 0; k < s.mesh->num_trace(); ++k) d.u0[k] = s.mesh->vertices[s.mesh->trace_to_volume[k]][1];
    const Vector rhs = assemble_rhs(s, d);
    const Vector x = DenseLU(s.materialize(true)).solve(s.stabilized_rhs(rhs));
    EXPECT_LT((s.apply(x) - rhs).norm(), 1e-10 * rhs.norm());
}

TEST(Coupling, RightHandSides) {
    const CouplingSystem& jn = system2(CouplingKind::jn);
    const Mesh& m = *jn.mesh;
    EXPECT_EQ(assemble_rhs(jn, zero_data(m)).cwiseAbs().maxCoeff(), 0.0);
    CouplingData d = zero_data(m);
    d.f.setOnes();
    const Vector r = assemble_rhs(jn, d);
    EXPECT_LT((r.head(jn.n()) - assemble_load(m, d.f)).norm(), 1e-15);
    EXPECT_EQ(r.tail(jn.m()).cwiseAbs().maxCoeff(), 0.0);

    const CouplingSystem& sym = system2(CouplingKind::sym);
    CouplingData e = zero_data(m);
    for (int k = 0; k < m.num_trace(); ++k) e.u0[k] = m.vertices[m.trace_to_volume[k]][0];
    const Vector rs = assemble_rhs(sym, e);
    // direct dense application of the boundary blocks
    Vector w0 = Vector::Zero(sym.n());
    const Vector wu = sym.W * e.u0;
    for (int k = 0; k < m.num_trace(); ++k) w0[m.trace_to_volume[k]] = wu[k];
    EXPECT_LT((rs.head(sym.n()) - w0).norm(), 1e-10 * w0.norm());
    const Vector bem = 0.5 * (DenseMatrix(sym.M) * sym.extend(e.u0)) - sym.K * e.u0;
    EXPECT_LT((rs.tail(sym.m()) - bem).norm(), 1e-10 * bem.norm());
    EXPECT_THROW(assemble_rhs(sym, CouplingData{Vector::Zero(3), e.u0, e.phi0}), std::invalid_argument);
}

TEST(DualBasisTest, Biorthogonality) {
    const DualBasis dual(mesh2());
    std::mt19937_64 rng(23);
    std::uniform_int_distribution<int> pick(0, dual.size() - 1);
    for (int k = 0; k < 50; ++k) {
        const int i = k < 5 ? k : pick(rng), j = k < 5 ? k : pick(rng);
        const Vector y = dual.functional(dual.apply(Vector::Unit(dual.size(), i)));
        EXPECT_NEAR(y[j], i == j ? 1.0 : 0.0, 1e-12);
    }
    const int p0 = dual.n() + 7;
    EXPECT_DOUBLE_EQ(dual.functional(dual.apply(Vector::Unit(dual.size(), p0)))[p0], 1.0);
}

TEST(DualBasisTest, LocalSupport) {
    const DualBasis dual(mesh2());
    const Mesh& m = dual.mesh();
    for (int v = 0; v < m.num_vertices(); ++v) {
        const auto& h = dual.host(v);
        if (m.volume_to_trace[v] < 0) {
            const auto& e = m.tets[h.element];
            EXPECT_NE(std::find(e.begin(), e.end(), v), e.end());
        } else {
            const auto& f = m.boundary_tris[h.element];
            EXPECT_NE(std::find(f.begin(), f.end(), v), f.end());
        }
    }
}

TEST(DualBasisTest, NormScaling) {
    std::vector<double> norms;
    for (int level = 1; level <= 3; ++level)
        norms.push_back(DualBasis(std::make_shared<const Mesh>(build_cube_mesh(level))).norm_estimate().value);
    const double expected = std::pow(2.0, 1.5);
    for (int k = 1; k < 3; ++k) EXPECT_NEAR(norms[k] / norms[k - 1], expected, 0.15 * expected);
}

TEST(DualBasisTest, RepresentationFormula) {
    const DualBasis dual(mesh2());
    for (CouplingKind k : {CouplingKind::bmc, CouplingKind::sym, CouplingKind::jn})
        EXPECT_LE(check_representation_formula(system2(k), dual, 20), 1e-10) << to_string(k);
    EXPECT_LE(check_representation_formula(system2(CouplingKind::jn), dual, 0), 1e-10);
}

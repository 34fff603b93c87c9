#include "hicoup/probe.hpp"
#include "hicoup/solver.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace hicoup;

namespace {

std::shared_ptr<const Mesh> cube(int level) { return std::make_shared<const Mesh>(build_cube_mesh(level)); }

DenseMatrix random_spd(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    DenseMatrix g(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) g(i, j) = normal(rng);
    return g * g.transpose() + n * DenseMatrix::Identity(n, n);
}

}  // namespace

TEST(Gmres, IdentityConvergesInOneStep) {
    const Vector b = Vector::LinSpaced(12, 1.0, 2.0);
    const GmresResult r = gmres([](const Vector& x) { return x; }, b, GmresConfig{1e-12, 100});
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.iterations, 1);
    EXPECT_LT((r.x - b).norm(), 1e-14);
}

TEST(Gmres, SpdSystemWithinDimensionSteps) {
    const DenseMatrix a = random_spd(10, 1);
    const Vector b = Vector::Ones(10);
    const GmresResult r = gmres([&](const Vector& x) { return Vector(a * x); }, b, GmresConfig{1e-12, 100});
    EXPECT_TRUE(r.converged);
    EXPECT_LE(r.iterations, 10);
    EXPECT_LT((a * r.x - b).norm(), 1e-10 * b.norm());
    for (std::size_t k = 1; k < r.history.size(); ++k) EXPECT_LE(r.history[k], r.history[k - 1]);
}

TEST(Gmres, PreconditionerIsApplied) {
    const DenseMatrix a = random_spd(40, 2);
    const Vector b = Vector::Ones(40);
    const DenseMatrix ainv = a.inverse();
    const GmresResult r = gmres([&](const Vector& x) { return Vector(a * x); }, b, GmresConfig{1e-10, 100},
                                [&](const Vector& x) { return Vector(ainv * x); });
    EXPECT_TRUE(r.converged);
    EXPECT_LE(r.iterations, 2);
}

TEST(Gmres, NonConvergenceIsReported) {
    // cyclic shift: Krylov residuals stay at 1 until the last step
    const int n = 30;
    const auto shift = [n](const Vector& x) {
        Vector y(n);
        for (int i = 0; i < n; ++i) y[(i + 1) % n] = x[i];
        return y;
    };
    const GmresResult r = gmres(shift, Vector::Unit(n, 0), GmresConfig{1e-6, 10});
    EXPECT_FALSE(r.converged);
    EXPECT_EQ(r.iterations, 10);
    EXPECT_THROW(gmres(shift, Vector::Unit(n, 0), GmresConfig{0.0, 10}), std::invalid_argument);
}

TEST(Preconditioner, BasicProperties) {
    const auto mesh = cube(2);
    const CouplingSystem sys = assemble_coupling(CouplingKind::jn, mesh);
    const BlockDiagPreconditioner p(sys, PrecondConfig{1});
    EXPECT_EQ(p.apply(Vector::Zero(sys.size())).norm(), 0.0);
    const Vector r = Vector::LinSpaced(sys.size(), -1.0, 1.0);
    const BlockDiagPreconditioner p2(sys, PrecondConfig{1});
    EXPECT_EQ((p.apply(r) - p2.apply(r)).norm(), 0.0);
    EXPECT_LE(p.max_rank(), 1);
    EXPECT_GT(p.memory_bytes(), 0u);
    EXPECT_THROW(p.apply(Vector::Zero(3)), std::invalid_argument);
}

TEST(Preconditioner, SpectralReport) {
    const auto mesh = cube(2);
    const CouplingSystem sys = assemble_coupling(CouplingKind::jn, mesh);
    const BlockDiagPreconditioner p(sys, PrecondConfig{1});
    const SpectralReport rep = spectral_equivalence_report(sys, p);
    EXPECT_FALSE(rep.indefinite);
    EXPECT_GT(rep.c_A, 0.0);
    EXPECT_GE(rep.C_A, rep.c_A);
    EXPECT_GT(rep.c_V, 0.0);
    EXPECT_GE(rep.C_V, rep.c_V);
    EXPECT_TRUE(std::isfinite(rep.kappa_PB));

    // the exact block-diagonal preconditioner cannot worsen the conditioning
    const BlockDiagPreconditioner exact(sys, PrecondConfig{1000});
    const SpectralReport full = spectral_equivalence_report(sys, exact);
    EXPECT_NEAR(full.c_A, 1.0, 1e-8);
    EXPECT_NEAR(full.C_V, 1.0, 1e-8);
    EXPECT_LE(full.kappa_PB, full.kappa_B * 1.01);
}

TEST(Preconditioner, SolveCouplingMatchesDense) {
    const auto mesh = cube(2);
    const CouplingSystem sys = assemble_coupling(CouplingKind::sym, mesh);
    const Vector rhs = Vector::LinSpaced(sys.size(), 0.0, 1.0);
    const Vector dense = solve_coupling(sys, rhs);
    const Vector iterative = solve_coupling(sys, rhs, 1e-12, 0);
    EXPECT_LT((dense - iterative).norm(), 1e-8 * dense.norm());
}

TEST(Probe, ZeroDataIsTrivial) {
    const auto mesh = cube(2);
    const CouplingSystem sys = assemble_coupling(CouplingKind::bmc, mesh);
    ProbeConfig pc;
    pc.enforce_mesh_ratio = false;
    const ProbeReport r = run_probe(sys, zero_data(*mesh), pc);
    EXPECT_TRUE(r.trivial);
    EXPECT_EQ(r.normalized_ratio, 0.0);
}

TEST(Probe, MeshRatioPrecondition) {
    const auto mesh = cube(2);
    const CouplingSystem sys = assemble_coupling(CouplingKind::bmc, mesh);
    try {
        run_probe(sys, corner_bump_data(*mesh));
        FAIL() << "expected a mesh-ratio rejection";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("mesh-ratio"), std::string::npos);
    }
    EXPECT_TRUE(check_mesh_ratio(CouplingKind::bmc, 0.001, BoxPair{}).first);
    EXPECT_FALSE(check_mesh_ratio(CouplingKind::jn, 0.00390625 * 1.01, BoxPair{}).first);
    EXPECT_TRUE(check_mesh_ratio(CouplingKind::bmc, 0.0078125 * 0.99, BoxPair{}).first);
}

TEST(Probe, DataInsideOuterBoxIsRejected) {
    const auto mesh = cube(2);
    const CouplingSystem sys = assemble_coupling(CouplingKind::bmc, mesh);
    CouplingData d = zero_data(*mesh);
    d.f[mesh->vertex_index(1, 1, 1)] = 1.0;
    ProbeConfig pc;
    pc.enforce_mesh_ratio = false;
    EXPECT_THROW(run_probe(sys, d, pc), std::invalid_argument);
}

TEST(Probe, FemBoxNormsOfLinearFunction) {
    const Mesh mesh = build_cube_mesh(2);
    Vector u(mesh.num_vertices());
    for (int v = 0; v < mesh.num_vertices(); ++v) u[v] = mesh.vertices[v][0];
    // box straddles element faces: refinement must still integrate |grad u|^2 = 1 over the volume
    const Box box{Vec3(0.1, 0.2, 0.3), Vec3(0.6, 0.7, 0.8)};
    const FemBoxNorms n = fem_box_norms(mesh, u, box);
    EXPECT_NEAR(n.grad_sq, 0.125, 0.125 * 0.1);
    const FemBoxNorms whole = fem_box_norms(mesh, u, Box{Vec3(0, 0, 0), Vec3(1, 1, 1)});
    EXPECT_NEAR(whole.grad_sq, 1.0, 1e-12);
    EXPECT_NEAR(whole.l2_sq, 1.0 / 3.0, 1e-12);
}

TEST(Probe, BoxRuleIntegratesPolynomials) {
    const Box box{Vec3(0, 0, 0), Vec3(0.5, 1.0, 2.0)};
    const auto [pts, w] = box_rule(box, 4);
    double vol = 0.0, mom = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        vol += w[i];
        mom += w[i] * pts[i][2] * pts[i][2] * pts[i][0];
    }
    EXPECT_NEAR(vol, 1.0, 1e-14);
    EXPECT_NEAR(mom, 0.125 * 8.0 / 3.0, 1e-13);
}

TEST(Probe, FrozenRegressionRatio) {
    const auto mesh = cube(3);
    const CouplingSystem sys = assemble_coupling(CouplingKind::bmc, mesh);
    ProbeConfig pc;
    pc.enforce_mesh_ratio = false;
    const ProbeReport r = run_probe(sys, corner_bump_data(*mesh), pc);
    EXPECT_FALSE(r.trivial);
    EXPECT_FALSE(r.mesh_ratio_ok);
    EXPECT_EQ(r.skipped_points, 0);
    EXPECT_GE(r.rhs, r.l2_u);
    EXPECT_NEAR(r.normalized_ratio, 0.03470, 0.03470 * 0.02);
}

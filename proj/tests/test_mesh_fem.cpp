#include "hicoup/fem.hpp"
#include "hicoup/mesh.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

using namespace hicoup;

TEST(Mesh, CountsFollowLevel) {
    for (int k = 1; k <= 3; ++k) {
        const Mesh m = build_cube_mesh(k);
        const int np = (1 << k) + 1;
        EXPECT_EQ(m.num_vertices(), np * np * np);
        EXPECT_EQ(m.num_boundary_tris(), 12 * (1 << (2 * k)));
        EXPECT_EQ(m.num_tets(), 6 * (1 << (3 * k)));
    }
}

TEST(Mesh, TableDofCounts) {
    const Mesh m1 = build_cube_mesh(1);
    EXPECT_EQ(m1.num_vertices(), 27);
    EXPECT_EQ(m1.num_boundary_tris(), 48);
    const Mesh m3 = build_cube_mesh(3);
    EXPECT_EQ(m3.num_vertices(), 729);
    EXPECT_EQ(m3.num_boundary_tris(), 768);
    EXPECT_EQ(dof_table(m3).size(), 1497);
    const Mesh m4 = build_cube_mesh(4);
    EXPECT_EQ(m4.num_vertices(), 4913);
    EXPECT_EQ(m4.num_boundary_tris(), 3072);
}

TEST(Mesh, VolumesAreasAndOrientation) {
    const Mesh m = build_cube_mesh(2);
    double vol = 0.0;
    for (int t = 0; t < m.num_tets(); ++t) {
        EXPECT_GT(m.tet_volume(t), 0.0);
        vol += m.tet_volume(t);
    }
    EXPECT_NEAR(vol, 1.0, 1e-12);
    double area = 0.0;
    for (int t = 0; t < m.num_boundary_tris(); ++t) {
        const Triangle tri = m.triangle(t);
        area += tri.area;
        EXPECT_GT(tri.normal.dot(tri.centroid() - Vec3::Constant(0.5)), 0.0);
    }
    EXPECT_NEAR(area, 6.0, 1e-12);
}

TEST(Mesh, CongruentTetsAndBoundaryFaces) {
    const Mesh m = build_cube_mesh(2);
    const double v0 = m.tet_volume(0);
    for (int t = 0; t < m.num_tets(); ++t) EXPECT_NEAR(m.tet_volume(t), v0, 1e-15);
    for (int t = 0; t < m.num_boundary_tris(); ++t) {
        const auto& f = m.boundary_tris[t];
        const auto& e = m.tets[m.tet_of_tri[t]];
        for (int v : f) EXPECT_NE(std::find(e.begin(), e.end(), v), e.end());
    }
}

TEST(Mesh, RefinementKeepsVertices) {
    const Mesh a = build_cube_mesh(1), b = build_cube_mesh(2);
    std::set<std::array<double, 3>> fine;
    for (const auto& p : b.vertices) fine.insert({p[0], p[1], p[2]});
    for (const auto& p : a.vertices) EXPECT_TRUE(fine.count({p[0], p[1], p[2]}));
}

TEST(Mesh, DofTableSupports) {
    const Mesh m = build_cube_mesh(2);
    const DofTable d = dof_table(m);
    EXPECT_EQ(d.size(), m.num_vertices() + m.num_boundary_tris());
    for (int i = 0; i < d.size(); ++i) EXPECT_TRUE(d.supp_box[i].contains(d.char_point[i]));
    const Box corner = d.supp_box[0];
    EXPECT_LE(corner.extent().maxCoeff(), 2.0 * m.h());
    const int t = 5;
    const Triangle tri = m.triangle(t);
    EXPECT_LT((d.char_point[m.num_vertices() + t] - tri.centroid()).norm(), 1e-15);
}

TEST(Fem, ReferenceKuhnTetStiffness) {
    Mesh m;
    m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 1, 0), Vec3(1, 1, 1)};
    m.tets = {{0, 1, 2, 3}};
    Eigen::Matrix4d expected;
    expected << 1, -1, 0, 0, -1, 2, -1, 0, 0, -1, 2, -1, 0, 0, -1, 1;
    expected /= 6.0;
    const Eigen::Matrix4d k = element_stiffness(m, 0, Coefficient::identity());
    EXPECT_LT((k - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Fem, StiffnessKernelSymmetryEllipticity) {
    const Mesh m = build_cube_mesh(2);
    const SparseMatrix a = assemble_stiffness(m, Coefficient::identity());
    EXPECT_LT((a * Vector::Ones(a.cols())).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_EQ((DenseMatrix(a) - DenseMatrix(a).transpose()).cwiseAbs().maxCoeff(), 0.0);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> normal;
    for (int k = 0; k < 10; ++k) {
        Vector x(a.cols());
        for (auto& v : x) v = normal(rng);
        x.array() -= x.mean();
        EXPECT_GT(x.dot(a * x), 0.0);
    }
}

TEST(Fem, BoundaryMass) {
    const Mesh m1 = build_cube_mesh(1);
    const SparseMatrix mm = assemble_boundary_mass(m1);
    EXPECT_EQ(mm.rows(), m1.num_boundary_tris());
    EXPECT_EQ(mm.cols(), m1.num_vertices());
    EXPECT_NEAR(DenseMatrix(mm).sum(), 6.0, 1e-13);
    for (int k = 0; k < mm.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(mm, k); it; ++it) EXPECT_NEAR(it.value(), 0.125 / 3.0, 1e-15);
    const Mesh m2 = build_cube_mesh(2);
    const SparseMatrix m2m = assemble_boundary_mass(m2);
    const Vector rows = m2m * Vector::Ones(m2.num_vertices());
    for (int t = 0; t < m2.num_boundary_tris(); ++t) EXPECT_NEAR(rows[t], m2.triangle(t).area, 1e-15);
}

TEST(Fem, LoadVector) {
    const Mesh m = build_cube_mesh(2);
    EXPECT_NEAR(assemble_load(m, Vector::Ones(m.num_vertices())).sum(), 1.0, 1e-14);
    EXPECT_EQ(assemble_load(m, Vector::Zero(m.num_vertices())).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Fem, LoadMatchesFourPointRule) {
    const Mesh m = build_cube_mesh(2);
    Vector f = Vector::Zero(m.num_vertices());
    f[m.vertex_index(2, 1, 3)] = 1.0;
    f[m.vertex_index(2, 2, 3)] = 0.5;
    const Vector load = assemble_load(m, f);
    // degree-2 exact rule on each tet
    const double a = 0.5854101966249685, b = 0.1381966011250105;
    Vector oracle = Vector::Zero(m.num_vertices());
    for (int t = 0; t < m.num_tets(); ++t) {
        const auto& e = m.tets[t];
        const double vol = m.tet_volume(t);
        for (int q = 0; q < 4; ++q) {
            double lam[4] = {b, b, b, b};
            lam[q] = a;
            double fq = 0.0;
            for (int k = 0; k < 4; ++k) fq += lam[k] * f[e[k]];
            for (int k = 0; k < 4; ++k) oracle[e[k]] += vol / 4.0 * fq * lam[k];
        }
    }
    EXPECT_LT((load - oracle).cwiseAbs().maxCoeff(), 1e-14);
}

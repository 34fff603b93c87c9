#include "hicoup/dense.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <random>

using namespace hicoup;

namespace {

DenseMatrix random_matrix(int p, int q, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    DenseMatrix a(p, q);
    for (Eigen::Index j = 0; j < q; ++j)
        for (Eigen::Index i = 0; i < p; ++i) a(i, j) = normal(rng);
    return a;
}

}  // namespace

TEST(Svd, SimpleSpectra) {
    EXPECT_LT((singular_values(DenseMatrix::Identity(3, 3)) - Vector::Ones(3)).norm(), 1e-15);
    DenseMatrix d = Vector(Eigen::Vector3d(3, 2, 1)).asDiagonal();
    EXPECT_LT((singular_values(d) - Eigen::Vector3d(3, 2, 1)).norm(), 1e-15);
}

TEST(Svd, LowRankProductHasSmallTail) {
    const DenseMatrix a = random_matrix(20, 4, 1) * random_matrix(4, 10, 2);
    const Vector s = singular_values(a);
    EXPECT_LE(s[4], 1e-12 * s[0]);
    const SvdResult f = svd(a);
    EXPECT_LT((f.U * f.sigma.asDiagonal() * f.V.transpose() - a).norm(), 1e-12 * a.norm());
}

TEST(Truncate, ExactAndNoOp) {
    const LowRank lr(random_matrix(12, 2, 3), random_matrix(9, 2, 4));
    EXPECT_LT((truncate(lr, Truncation{2, 0.0}).dense() - lr.dense()).norm(), 1e-13 * lr.dense().norm());
    const LowRank same = truncate(lr, Truncation{5, 0.0});
    EXPECT_EQ(same.rank(), 2);
    EXPECT_EQ((same.dense() - lr.dense()).norm(), 0.0);
}

TEST(Truncate, HilbertBlockEckartYoung) {
    DenseMatrix h(8, 8);
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) h(i, j) = 1.0 / (i + j + 1.0);
    const Vector s = singular_values(h);
    const LowRank t = truncate_dense(h, Truncation{3, 0.0});
    EXPECT_NEAR(singular_values(h - t.dense())[0], s[3], 1e-10 * s[0]);
    const LowRank t2 = truncate(LowRank(h, DenseMatrix::Identity(8, 8)), Truncation{3, 0.0});
    EXPECT_NEAR(singular_values(h - t2.dense())[0], s[3], 1e-10 * s[0]);
}

TEST(Truncate, RandomizedEckartYoung) {
    std::mt19937_64 rng(11);
    for (int k = 0; k < 200; ++k) {
        const int p = 2 + k % 17, q = 2 + (k * 7) % 13;
        const DenseMatrix a = random_matrix(p, q, rng());
        const int r = static_cast<int>(rng() % std::min(p, q));
        const Vector s = singular_values(a);
        EXPECT_NEAR(singular_values(a - truncate_dense(a, Truncation{r, 0.0}).dense())[0], s[r], 1e-10 * s[0]);
    }
}

TEST(NormEstimate, DiagonalZeroAndRandom) {
    const Vector d = Eigen::Vector3d(5, 1, 1);
    const MatVec diag = [&](const Vector& x) { return Vector(d.cwiseProduct(x)); };
    EXPECT_NEAR(spectral_norm_estimate(diag, diag, 3, 500, 1e-12).value, 5.0, 1e-8);
    const MatVec zero = [](const Vector& x) { return Vector(Vector::Zero(x.size())); };
    EXPECT_EQ(spectral_norm_estimate(zero, zero, 4).value, 0.0);
    const DenseMatrix a = random_matrix(50, 50, 5);
    const MatVec ap = [&](const Vector& x) { return Vector(a * x); };
    const MatVec at = [&](const Vector& x) { return Vector(a.transpose() * x); };
    const double s1 = singular_values(a)[0];
    EXPECT_NEAR(spectral_norm_estimate(ap, at, 50, 5000, 1e-12).value, s1, 1e-6 * s1);
}

TEST(DenseLUTest, IdentityPermutationAndResidual) {
    const DenseLU id(DenseMatrix::Identity(4, 4));
    EXPECT_EQ((id.L() - DenseMatrix::Identity(4, 4)).norm(), 0.0);
    EXPECT_EQ((id.U() - DenseMatrix::Identity(4, 4)).norm(), 0.0);
    DenseMatrix swap(2, 2);
    swap << 0, 1, 1, 0;
    const DenseLU s(swap);
    EXPECT_LT((s.solve(Vector(Eigen::Vector2d(2, 3))) - Eigen::Vector2d(3, 2)).norm(), 1e-15);
    const DenseMatrix r = random_matrix(10, 10, 9);
    const DenseMatrix spd = r * r.transpose() + DenseMatrix::Identity(10, 10);
    const Vector b = random_matrix(10, 1, 10);
    EXPECT_LE((spd * DenseLU(spd).solve(b) - b).norm(), 1e-12 * b.norm());
    EXPECT_LT((s.P() * swap - s.L() * s.U()).norm(), 1e-15);
}

TEST(DenseLUTest, SingularMatrixRejected) {
    EXPECT_THROW(DenseLU(DenseMatrix::Zero(3, 3)), SingularMatrixError);
}

TEST(Triangular, Solves) {
    DenseMatrix l(2, 2);
    l << 2, 0, 1, 4;
    const Vector x = solve_triangular(l, Vector(Eigen::Vector2d(2, 9)), true);
    EXPECT_LT((x - Eigen::Vector2d(1, 2)).norm(), 1e-15);
}

TEST(Svd, RankCollapseCoreStaysFinite) {
    // a truncation core from an H-LU whose spectrum drops from 1e-4 to 1e-19
    std::ifstream is(std::string(HICOUP_TEST_DATA) + "/rank_collapse_core.txt");
    ASSERT_TRUE(is);
    int r = 0, c = 0;
    is >> r >> c;
    DenseMatrix a(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) is >> a(i, j);
    const SvdResult f = svd(a);
    ASSERT_TRUE(f.U.allFinite() && f.V.allFinite());
    EXPECT_LT((f.U * f.sigma.asDiagonal() * f.V.transpose() - a).norm(), 1e-12 * a.norm());
    const LowRank t = truncate(LowRank(a, DenseMatrix::Identity(c, c)), Truncation{10, 0.0});
    EXPECT_TRUE(t.X.allFinite() && t.Y.allFinite());
}

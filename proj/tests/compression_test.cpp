#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "test_keys.hpp"
#include "vflsim/compression/pca.hpp"
#include "vflsim/linalg/cipher_vector.hpp"

namespace vflsim::compression {
namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) m(r, c) = nd(gen);
  return m;
}

/// Rows drawn from a fixed k-dimensional subspace of R^n.
Matrix rank_k_matrix(std::size_t rows, std::size_t cols, std::size_t k, std::uint64_t seed) {
  return matmul(random_matrix(rows, k, seed), random_matrix(k, cols, seed + 1));
}

double orthonormality_error(const Matrix& w) {
  const Matrix g = matmul_transposed(w, w);
  double err = 0.0;
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j)
      err = std::max(err, std::abs(g(i, j) - (i == j ? 1.0 : 0.0)));
  return err;
}

TEST(Pca, RowsAreOrthonormalAndVarianceDescends) {
  for (std::size_t k : {1u, 4u, 8u}) {
    const auto plan = fit_pca(random_matrix(50, 8, 1), k);
    EXPECT_LT(orthonormality_error(plan.w), 1e-8);
    for (std::size_t i = 1; i < plan.k; ++i) EXPECT_GE(plan.explained[i - 1], plan.explained[i]);
  }
}

TEST(Pca, MatchesEigenOracleUpToSign) {
  const Matrix x = random_matrix(50, 8, 2);
  const auto plan = fit_pca(x, 8);
  Eigen::MatrixXd ex(50, 8);
  for (int i = 0; i < 50; ++i)
    for (int j = 0; j < 8; ++j) ex(i, j) = x(i, j);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(ex.transpose() * ex);
  for (int r = 0; r < 8; ++r) {
    const int col = 7 - r;  // Eigen sorts ascending
    EXPECT_NEAR(plan.explained[r], solver.eigenvalues()(col), 1e-9 * solver.eigenvalues()(7));
    const double sign = solver.eigenvectors().col(col).dot(
                            Eigen::Map<const Eigen::VectorXd>(plan.w.row(r).data(), 8)) < 0
                            ? -1.0
                            : 1.0;
    for (int c = 0; c < 8; ++c) {
      EXPECT_NEAR(plan.w(r, c), sign * solver.eigenvectors()(c, col), 1e-8);
    }
  }
}

TEST(Pca, SignConvention) {
  const auto plan = fit_pca(random_matrix(30, 5, 3), 5);
  for (std::size_t r = 0; r < plan.k; ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < plan.n; ++c)
      if (std::abs(plan.w(r, c)) > std::abs(plan.w(r, best))) best = c;
    EXPECT_GT(plan.w(r, best), 0.0);
  }
  Matrix tie{{-1, 1}};
  fix_row_signs(tie);
  EXPECT_EQ(tie, (Matrix{{1, -1}}));
}

TEST(Pca, SingleNonzeroColumnGivesAxis) {
  Matrix x(10, 4);
  for (std::size_t i = 0; i < 10; ++i) x(i, 2) = static_cast<double>(i) - 3.0;
  const auto plan = fit_pca(x, 1);
  EXPECT_NEAR(plan.w(0, 2), 1.0, 1e-12);
  for (std::size_t c : {0u, 1u, 3u}) EXPECT_NEAR(plan.w(0, c), 0.0, 1e-12);
}

TEST(Pca, RankDeficientIsDeterministic) {
  const Matrix x = rank_k_matrix(40, 6, 2, 4);
  const auto a = fit_pca(x, 6);
  const auto b = fit_pca(x, 6);
  EXPECT_EQ(a.w, b.w);
  EXPECT_LT(orthonormality_error(a.w), 1e-8);
}

TEST(Pca, RejectsBadInputs) {
  const Matrix x = random_matrix(5, 3, 5);
  EXPECT_THROW(fit_pca(x, 0), ConfigError);
  EXPECT_THROW(fit_pca(x, 4), ConfigError);
  Matrix bad = x;
  bad(1, 1) = std::nan("");
  EXPECT_THROW(fit_pca(bad, 2), ConfigError);
  EXPECT_THROW(target_dimension(10, 0.0), ConfigError);
  EXPECT_THROW(target_dimension(10, 1.5), ConfigError);
}

TEST(Pca, TargetDimensionRounds) {
  EXPECT_EQ(target_dimension(10, 0.6), 6u);
  EXPECT_EQ(target_dimension(200, 0.6), 120u);
  EXPECT_EQ(target_dimension(3, 0.1), 1u);
  EXPECT_EQ(target_dimension(7, 1.0), 7u);
}

TEST(Compress, FullRankIsLossless) {
  const Matrix x = random_matrix(20, 5, 6);
  const auto plan = fit_pca(x, 5);
  const Matrix z = compress_data(plan, x);
  const Matrix back = matmul(z, plan.w);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_LT(max_abs_diff(back.row(i), x.row(i)), 1e-10);
  const Vector theta{0.5, -1, 2, 0.25, 3};
  EXPECT_LT(max_abs_diff(decompress_gradient(plan, compress_params(plan, theta)), theta), 1e-12);
}

TEST(Compress, ZerosStayZero) {
  const auto plan = fit_pca(random_matrix(10, 4, 7), 2);
  EXPECT_EQ(compress_params(plan, Vector(4, 0.0)), Vector(2, 0.0));
  EXPECT_EQ(decompress_gradient(plan, Vector(2, 0.0)), Vector(4, 0.0));
  EXPECT_THROW(compress_params(plan, Vector(3, 0.0)), ShapeError);
  EXPECT_THROW(compress_data(plan, Matrix(2, 5)), ShapeError);
  EXPECT_THROW(decompress_gradient(plan, Vector(3, 0.0)), ShapeError);
}

TEST(Compress, DecompressAfterCompressIsProjection) {
  const auto plan = fit_pca(random_matrix(30, 6, 8), 3);
  const Vector v{1, -2, 0.5, 3, -1, 0.25};
  const Vector round_trip = decompress_gradient(plan, compress_params(plan, v));
  // v W^T W computed independently through the full projector.
  const Matrix projector = matmul(plan.w.transpose(), plan.w);
  const Vector expect = matvec(projector, v);
  EXPECT_LT(max_abs_diff(round_trip, expect), 1e-12);
}

TEST(Compress, EncryptedGradientCostScalesWithK) {
  const auto scheme = testing::test_scheme();
  he::Rng rng(9);
  const Matrix x = random_matrix(100, 10, 10);
  const auto plan = fit_pca(x, 6);
  const Matrix z = compress_data(plan, x);
  const auto d = linalg::encrypt_vector(scheme, Vector(100, 0.5), rng);
  const auto before = he::global_op_counter().snapshot();
  (void)linalg::encrypted_gradient_matvec(
      scheme, std::span<const he::Ciphertext>(d), z);
  EXPECT_EQ((he::global_op_counter().snapshot() - before).enc_mul, 600u);
}

// Rows in a k-dim subspace: the compressed gradient mapped back equals the
// full gradient X^T d when the parameters live in that subspace.
TEST(Compress, RankKDataGivesExactGradient) {
  const std::size_t m = 60;
  const std::size_t n = 9;
  const std::size_t k = 4;
  const Matrix x = rank_k_matrix(m, n, k, 11);
  const auto plan = fit_pca(x, k);
  const Matrix z = compress_data(plan, x);
  std::mt19937_64 gen(12);
  std::normal_distribution<double> nd;
  Vector y(m);
  for (auto& v : y) v = nd(gen) > 0 ? 1.0 : 0.0;
  Vector theta_c(k);
  for (auto& v : theta_c) v = 0.1 * nd(gen);
  const Vector theta = decompress_gradient(plan, theta_c);  // a full theta on span(W)

  const Vector full = testing_oracles::central_gradient(x, theta, y, 0, 0.0);
  const Vector g_c = testing_oracles::central_gradient(z, theta_c, y, 0, 0.0);
  EXPECT_LT(max_abs_diff(decompress_gradient(plan, g_c), full), 1e-8);
}

TEST(Compress, PlanCsvRoundTripsValues) {
  const auto plan = fit_pca(random_matrix(12, 3, 13), 2);
  std::ostringstream out;
  write_plan_csv(plan, out);
  std::istringstream in(out.str());
  std::string line;
  std::size_t r = 0;
  while (std::getline(in, line)) {
    std::istringstream cells(line);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(cells, cell, ',')) EXPECT_EQ(std::stod(cell), plan.w(r, c++));
    EXPECT_EQ(c, 3u);
    ++r;
  }
  EXPECT_EQ(r, 2u);
}

TEST(CompressionHook, FitsOnceAndCachesProjection) {
  const Matrix x = random_matrix(25, 10, 14);
  CompressionHook hook(x, 0.6);
  const CompressionPlan* first = &hook.plan_for_iteration(1);
  EXPECT_EQ(first, &hook.plan_for_iteration(7));
  EXPECT_EQ(first->k, 6u);
  EXPECT_EQ(hook.compressed_data().rows(), 25u);
  EXPECT_EQ(hook.compressed_data().cols(), 6u);
  EXPECT_THROW(CompressionHook(x, 0.0), ConfigError);
}

}  // namespace
}  // namespace vflsim::compression

#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "cutmg/linear_solvers.hpp"
#include "cutmg/sparse_matrix.hpp"
#include "cutmg/spectral.hpp"

using namespace cutmg;

namespace {

SparseMatrix laplace_1d(int n) {
  std::vector<Triplet> t;
  for (int i = 0; i < n; ++i) {
    t.push_back({i, i, 2.0});
    if (i > 0) t.push_back({i, i - 1, -1.0});
    if (i + 1 < n) t.push_back({i, i + 1, -1.0});
  }
  return SparseMatrix::from_triplets(n, n, t);
}

Eigen::MatrixXd random_spd(int n, unsigned seed, double sparsity = 0.0) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> U(-1, 1);
  Eigen::MatrixXd B(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) B(i, j) = (std::abs(U(gen)) < sparsity) ? 0.0 : U(gen);
  return B * B.transpose() + n * Eigen::MatrixXd::Identity(n, n);
}

std::vector<double> random_vector(int n, unsigned seed) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> U(-1, 1);
  std::vector<double> v(n);
  for (auto& x : v) x = U(gen);
  return v;
}

}  // namespace

TEST(SparseMatrix, TripletsSumDuplicatesAndSortColumns) {
  const auto A = SparseMatrix::from_triplets(2, 3, {{1, 2, 1.0}, {0, 1, 2.0}, {1, 0, 3.0}, {0, 1, 0.5}});
  EXPECT_EQ(A.nnz(), 3u);
  EXPECT_DOUBLE_EQ(A.at(0, 1), 2.5);
  EXPECT_EQ(A.row_cols(1)[0], 0);
  EXPECT_EQ(A.row_cols(1)[1], 2);
  EXPECT_THROW(SparseMatrix::from_triplets(1, 1, {{1, 0, 1.0}}), Error);
}

TEST(SparseMatrix, IdentityMatvec) {
  const auto I = SparseMatrix::identity(5);
  const auto x = random_vector(5, 1);
  EXPECT_EQ(I * std::span<const double>(x), x);
}

TEST(SparseMatrix, DimensionMismatch) {
  const auto I = SparseMatrix::identity(3);
  std::vector<double> x(4), y(3);
  EXPECT_THROW(I.multiply(x, y), Error);
}

TEST(SparseMatrix, DenseOracleAndSymmetry) {
  const Eigen::MatrixXd D = random_spd(10, 3, 0.5);
  const auto A = SparseMatrix::from_dense(D);
  const auto x = random_vector(10, 4), z = random_vector(10, 5);
  const auto Ax = A * std::span<const double>(x);
  const Eigen::VectorXd ref = D * Eigen::Map<const Eigen::VectorXd>(x.data(), 10);
  for (int i = 0; i < 10; ++i) EXPECT_NEAR(Ax[i], ref(i), 1e-13);
  const auto Az = A * std::span<const double>(z);
  EXPECT_NEAR(dot(Ax, z), dot(x, Az), 1e-12 * std::abs(dot(Ax, z)));
  EXPECT_LE(A.max_asymmetry(), 1e-15);
}

TEST(SparseMatrix, TransposeProductAndSubmatrix) {
  std::mt19937 gen(11);
  std::uniform_real_distribution<double> U(-1, 1);
  Eigen::MatrixXd D(6, 4);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 4; ++j) D(i, j) = (i + j) % 3 == 0 ? 0.0 : U(gen);
  const auto A = SparseMatrix::from_dense(D);
  EXPECT_LE((A.transpose().to_dense() - D.transpose()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LE((A.transpose().multiply(A).to_dense() - D.transpose() * D).cwiseAbs().maxCoeff(), 1e-14);
  const auto y = random_vector(6, 2);
  std::vector<double> aty(4);
  A.multiply_transpose(y, aty);
  const Eigen::VectorXd ref = D.transpose() * Eigen::Map<const Eigen::VectorXd>(y.data(), 6);
  for (int j = 0; j < 4; ++j) EXPECT_NEAR(aty[j], ref(j), 1e-14);
  const Eigen::MatrixXd S = random_spd(6, 9);
  const std::vector<int> idx{4, 1, 3};
  const auto sub = SparseMatrix::from_dense(S).principal_submatrix(idx);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) EXPECT_EQ(sub.at(a, b), S(idx[a], idx[b]));
}

TEST(SparseMatrix, MatrixMarketExport) {
  std::ostringstream os;
  SparseMatrix::identity(2).write_matrix_market(os);
  EXPECT_EQ(os.str().substr(0, 14), "%%MatrixMarket");
  EXPECT_NE(os.str().find("2 2 2"), std::string::npos);
}

TEST(GaussSeidel, HandExample) {
  const auto A = laplace_1d(3);
  std::vector<double> x(3, 0.0), b(3, 1.0);
  gauss_seidel_sweep(A, x, b, SweepDirection::Forward);
  EXPECT_DOUBLE_EQ(x[0], 0.5);
  EXPECT_DOUBLE_EQ(x[1], 0.75);
  EXPECT_DOUBLE_EQ(x[2], 0.875);
  // brute-force oracle: x = (D + L)^{-1} b
  Eigen::MatrixXd DL = A.to_dense().triangularView<Eigen::Lower>();
  const Eigen::VectorXd ref = DL.lu().solve(Eigen::VectorXd::Ones(3));
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(x[i], ref(i), 1e-15);
  std::vector<double> y(3, 0.0);
  gauss_seidel_sweep(A, y, b, SweepDirection::Backward);
  EXPECT_DOUBLE_EQ(y[2], 0.5);
  EXPECT_DOUBLE_EQ(y[1], 0.75);
  EXPECT_DOUBLE_EQ(y[0], 0.875);
}

TEST(GaussSeidel, DiagonalExactAndFixedPoint) {
  std::vector<double> d{2.0, 4.0, 8.0};
  const auto D = SparseMatrix::diagonal_matrix(d);
  std::vector<double> x(3, 0.0), b{1.0, 1.0, 1.0};
  gauss_seidel_sweep(D, x, b, SweepDirection::Forward);
  EXPECT_DOUBLE_EQ(x[2], 0.125);
  const auto A = SparseMatrix::from_dense(random_spd(8, 21));
  const auto xs = random_vector(8, 22);
  const auto rhs = A * std::span<const double>(xs);
  auto y = xs;
  gauss_seidel_sweep(A, y, rhs, SweepDirection::Forward);
  for (int i = 0; i < 8; ++i) EXPECT_NEAR(y[i], xs[i], 1e-14);
}

TEST(GaussSeidel, ZeroDiagonal) {
  const auto A = SparseMatrix::from_triplets(2, 2, {{0, 1, 1.0}, {1, 0, 1.0}});
  std::vector<double> x(2), b(2, 1.0);
  EXPECT_THROW(gauss_seidel_sweep(A, x, b, SweepDirection::Forward), NumericalError);
}

TEST(Pcg, IdentityAndDiagonalOneIteration) {
  std::vector<double> b{1, 2, 3}, x(3, 0.0);
  auto r = pcg_jacobi(SparseMatrix::identity(3), b, x, 1e-12, 10);
  EXPECT_EQ(r.iterations, 1);
  std::vector<double> d{1.0, 10.0, 100.0};
  std::fill(x.begin(), x.end(), 0.0);
  r = pcg_jacobi(SparseMatrix::diagonal_matrix(d), b, x, 1e-12, 10);
  EXPECT_EQ(r.iterations, 1);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(x[2], 0.03, 1e-15);
}

TEST(Pcg, DenseOracleAndEnergyDecrease) {
  const Eigen::MatrixXd D = random_spd(50, 31, 0.7);
  const auto A = SparseMatrix::from_dense(D);
  const auto b = random_vector(50, 32);
  const Eigen::VectorXd ref = D.llt().solve(Eigen::Map<const Eigen::VectorXd>(b.data(), 50));
  std::vector<double> x(50, 0.0);
  const auto r = pcg_jacobi(A, b, x, 1e-12, 500);
  EXPECT_TRUE(r.converged);
  for (int i = 0; i < 50; ++i) EXPECT_NEAR(x[i], ref(i), 1e-8);
  // A-norm of the error does not increase from step to step
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= 20; ++k) {
    std::vector<double> y(50, 0.0);
    pcg_jacobi(A, b, y, 0.0, k);
    Eigen::VectorXd e = Eigen::Map<const Eigen::VectorXd>(y.data(), 50) - ref;
    const double en = std::sqrt(e.dot(D * e));
    EXPECT_LE(en, prev * (1 + 1e-12));
    prev = en;
  }
}

TEST(Pcg, IndefiniteDetected) {
  const auto A = SparseMatrix::from_triplets(2, 2, {{0, 0, 1.0}, {0, 1, 2.0}, {1, 0, 2.0}, {1, 1, 1.0}});
  std::vector<double> b{1.0, -1.0}, x(2, 0.0);
  EXPECT_THROW(pcg_jacobi(A, b, x, 1e-10, 10), NumericalError);
}

TEST(Cholesky, DiagonalNoFill) {
  std::vector<double> d{4.0, 9.0, 16.0};
  const auto C = EnvelopeCholesky::factor_bfs(SparseMatrix::diagonal_matrix(d));
  EXPECT_EQ(C.nnz_l(), 3u);
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(C.l(i, i), std::sqrt(d[C.permutation()[i]]));
}

TEST(Cholesky, TridiagonalBidiagonalFactor) {
  const auto A = laplace_1d(20);
  const auto C = EnvelopeCholesky::factor_bfs(A);
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j + 1 < i; ++j) EXPECT_EQ(C.l(i, j), 0.0);
  EXPECT_LE(static_cast<double>(C.nnz_l()) / static_cast<double>(A.nnz()), 1.0);
}

TEST(Cholesky, ReconstructionAndSolve) {
  const Eigen::MatrixXd D = random_spd(30, 41, 0.8);
  const auto A = SparseMatrix::from_dense(D);
  const auto C = EnvelopeCholesky::factor_bfs(A);
  const int n = 30;
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n), PAP(n, n);
  const auto& p = C.permutation();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      L(i, j) = C.l(i, j);
      PAP(i, j) = D(p[i], p[j]);
    }
  EXPECT_LE((PAP - L * L.transpose()).cwiseAbs().maxCoeff() / D.cwiseAbs().maxCoeff(), 1e-10);
  const auto b = random_vector(n, 42);
  const auto x = C.solve(b);
  std::vector<double> y(n, 0.0);
  pcg_jacobi(A, b, y, 1e-13, 1000);
  for (int i = 0; i < n; ++i) EXPECT_NEAR(x[i], y[i], 1e-8);
}

TEST(Cholesky, NotSpd) {
  const auto A = SparseMatrix::from_triplets(2, 2, {{0, 0, 1.0}, {0, 1, 2.0}, {1, 0, 2.0}, {1, 1, 1.0}});
  EXPECT_THROW(EnvelopeCholesky::factor_bfs(A), NumericalError);
}

TEST(Cholesky, BlockedBfsKeepsNodeDofsAdjacent) {
  // path graph 0-1-2 with two dofs per node
  const std::vector<std::vector<int>> adj{{1}, {0, 2}, {1}};
  const std::vector<std::vector<int>> dofs{{0, 3}, {1, 4}, {2, 5}};
  const auto perm = blocked_bfs_permutation(adj, dofs);
  EXPECT_EQ(perm, (std::vector<int>{0, 3, 1, 4, 2, 5}));
}

TEST(BfsOrder, Components) {
  const std::vector<std::vector<int>> adj{{2}, {}, {0, 3}, {2}};
  EXPECT_EQ(bfs_order(adj), (std::vector<int>{0, 2, 3, 1}));
}

TEST(Condition, IdentityAndScaling) {
  EXPECT_NEAR(estimate_condition(SparseMatrix::identity(5), false).condition, 1.0, 1e-10);
  std::vector<double> d{1.0, 10.0};
  EXPECT_NEAR(estimate_condition(SparseMatrix::diagonal_matrix(d), true).condition, 1.0, 1e-10);
  EXPECT_NEAR(estimate_condition(SparseMatrix::diagonal_matrix(d), false).condition, 10.0, 1e-8);
}

TEST(Condition, Laplace1DMatchesDenseEigensolve) {
  const auto A = laplace_1d(10);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A.to_dense());
  const double ref = es.eigenvalues()(9) / es.eigenvalues()(0);
  const auto est = estimate_condition(A, false);
  EXPECT_NEAR(est.condition, ref, 0.05 * ref);
  const auto big = laplace_1d(300);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es2(big.to_dense());
  const double ref2 = es2.eigenvalues()(299) / es2.eigenvalues()(0);
  EXPECT_NEAR(estimate_condition(big, true).condition, ref2, 0.05 * ref2);
}

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "solverkit/factorization.hpp"
#include "solverkit/matrix_market.hpp"
#include "solverkit/saddle.hpp"
#include "solverkit/sparse.hpp"
#include "test_support.hpp"

using namespace solverkit;

namespace {

SparseMatrix from_dense(const Eigen::MatrixXd& a, double drop_tol = 0.0) {
  std::vector<Triplet> trips;
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) {
      if (std::abs(a(i, j)) > drop_tol) {
        trips.push_back({i, j, a(i, j), 0});
      }
    }
  }
  return SparseMatrix::from_triplets(static_cast<int>(a.rows()),
                                     static_cast<int>(a.cols()), std::move(trips));
}

SparseMatrix random_sparse(int rows, int cols, unsigned seed, double density = 0.35) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> val(-1.0, 1.0);
  std::uniform_real_distribution<double> pick(0.0, 1.0);
  std::vector<Triplet> trips;
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      if (pick(rng) < density) trips.push_back({i, j, val(rng), 0});
    }
  }
  return SparseMatrix::from_triplets(rows, cols, std::move(trips));
}

}  // namespace

TEST_CASE("spmv with the identity returns the input") {
  SparseMatrix eye = SparseMatrix::identity(5);
  Vector x = testsup::random_vector(5, 11);
  Vector y = spmv(eye, x);
  CHECK(testsup::max_abs_diff(x, y) == 0.0);
}

TEST_CASE("submatrix of diag(1..4) at rows/cols {1,3}") {
  std::vector<Triplet> trips;
  for (int i = 0; i < 4; ++i) trips.push_back({i, i, double(i + 1), 0});
  SparseMatrix d = SparseMatrix::from_triplets(4, 4, std::move(trips));
  SparseMatrix s = extract_submatrix(d, {1, 3}, {1, 3});
  CHECK(s.rows() == 2);
  CHECK(s.cols() == 2);
  CHECK(s.at(0, 0) == 2.0);
  CHECK(s.at(1, 1) == 4.0);
  CHECK(s.at(0, 1) == 0.0);
  CHECK(s.at(1, 0) == 0.0);
}

TEST_CASE("transpose is an involution") {
  SparseMatrix m = random_sparse(7, 5, 42);
  SparseMatrix mtt = transpose(transpose(m));
  REQUIRE(mtt.rows() == m.rows());
  REQUIRE(mtt.cols() == m.cols());
  REQUIRE(mtt.nnz() == m.nnz());
  for (int i = 0; i < m.rows(); ++i) {
    for (int k = m.row_offsets()[i]; k < m.row_offsets()[i + 1]; ++k) {
      CHECK(mtt.at(i, m.col_indices()[k]) == m.values()[k]);
    }
  }
}

TEST_CASE("factorization solves a diagonal system exactly") {
  SparseMatrix d = SparseMatrix::from_triplets(2, 2, {{0, 0, 2.0, 0}, {1, 1, 4.0, 0}});
  Factorization f(d);
  Vector x = f.solve({2.0, 4.0});
  CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(x[1] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("factorization matches the dense oracle on a random SPD matrix") {
  const int n = 20;
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = dist(rng);
  Eigen::MatrixXd spd = m.transpose() * m + double(n) * Eigen::MatrixXd::Identity(n, n);
  SparseMatrix k = from_dense(spd);
  Vector b = testsup::random_vector(n, 3);

  Factorization f(k);
  Vector x = f.solve(b);

  Vector resid = spmv(k, x);
  for (int i = 0; i < n; ++i) resid[size_t(i)] -= b[size_t(i)];
  CHECK(norm2(resid) / norm2(b) < 1e-10);

  Vector oracle = testsup::dense_solve(spd, b);
  CHECK(testsup::max_abs_diff(x, oracle) < 1e-10);
}

TEST_CASE("refactorize on scaled values equals a fresh factorization") {
  SparseMatrix k = from_dense(Eigen::MatrixXd::Identity(6, 6) * 2.0 +
                              testsup::to_dense(random_sparse(6, 6, 5, 0.3)) * 0.1);
  Factorization f(k);
  SparseMatrix k2 = k;
  for (double& v : k2.values()) v *= 3.0;
  f.refactorize(k2);

  Factorization fresh(k2);
  Vector b = testsup::random_vector(6, 9);
  Vector x_reused = f.solve(b);
  Vector x_fresh = fresh.solve(b);
  CHECK(testsup::max_abs_diff(x_reused, x_fresh) == 0.0);
}

TEST_CASE("numerically singular matrices raise SingularMatrixError") {
  SparseMatrix s = SparseMatrix::from_triplets(2, 2, {{0, 0, 1.0, 0}, {0, 1, 1.0, 0},
                                                      {1, 0, 1.0, 0}, {1, 1, 1.0, 0}});
  CHECK_THROWS_AS(Factorization{s}, SingularMatrixError);
}

TEST_CASE("diagonal scalings on a 2x2 example") {
  SparseMatrix m = SparseMatrix::from_triplets(
      2, 2, {{0, 0, 1.0, 0}, {0, 1, -1.0, 0}, {1, 1, 2.0, 0}});
  Vector hs = absrowsum_inverse(m);
  CHECK(hs[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(hs[1] == doctest::Approx(0.5).epsilon(1e-15));
  Vector hd = diag_inverse(m);
  CHECK(hd[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(hd[1] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("diag_inverse of the identity is all ones") {
  Vector h = diag_inverse(SparseMatrix::identity(4));
  for (double v : h) CHECK(v == 1.0);
}

TEST_CASE("zero divisors raise errors naming the row") {
  SparseMatrix m = SparseMatrix::from_triplets(3, 3, {{0, 0, 1.0, 0}, {1, 1, 1.0, 0}});
  // Row 2 is empty: both scalings fail and say which row.
  CHECK_THROWS_WITH_AS(diag_inverse(m), doctest::Contains("2"), SingularMatrixError);
  CHECK_THROWS_WITH_AS(absrowsum_inverse(m), doctest::Contains("2"), SingularMatrixError);
}

TEST_CASE("monolithic saddle view equals blockwise application") {
  SaddleOperator op;
  op.F = random_sparse(6, 6, 21, 0.5);
  op.B = random_sparse(3, 6, 22, 0.5);
  op.Bt = transpose(op.B);
  Eigen::MatrixXd c = testsup::to_dense(random_sparse(3, 3, 23, 0.6));
  op.C = from_dense(0.5 * (c + c.transpose()));

  Vector x = testsup::random_vector(op.size(), 31);
  Vector block = op.apply(x);
  Vector mono = spmv(op.monolithic(), x);
  CHECK(testsup::max_abs_diff(block, mono) <= 1e-14);
}

TEST_CASE("factorized solve is a right inverse on diagonally dominant matrices") {
  for (unsigned seed : {1u, 2u, 3u}) {
    SparseMatrix m = random_sparse(15, 15, seed, 0.3);
    Eigen::MatrixXd d = testsup::to_dense(m);
    for (int i = 0; i < 15; ++i) d(i, i) = 20.0 + d.row(i).cwiseAbs().sum();
    SparseMatrix k = from_dense(d);
    Factorization f(k);
    Vector b = testsup::random_vector(15, seed + 100);
    Vector x = f.solve(b);
    Vector r = spmv(k, x);
    for (int i = 0; i < 15; ++i) r[size_t(i)] -= b[size_t(i)];
    CHECK(norm2(r) <= 1e-10 * norm2(b));
  }
}

TEST_CASE("matrix market round trip preserves the matrix") {
  SparseMatrix m = random_sparse(9, 7, 77, 0.3);
  auto path = std::filesystem::temp_directory_path() / "solverkit_mm_roundtrip.mtx";
  write_matrix_market(path.string(), m);
  SparseMatrix r = read_matrix_market(path.string());
  std::filesystem::remove(path);
  REQUIRE(r.rows() == m.rows());
  REQUIRE(r.cols() == m.cols());
  REQUIRE(r.nnz() == m.nnz());
  for (int i = 0; i < m.rows(); ++i) {
    for (int k = m.row_offsets()[i]; k < m.row_offsets()[i + 1]; ++k) {
      CHECK(r.at(i, m.col_indices()[k]) == m.values()[k]);
    }
  }
}

TEST_CASE("matrix market reader expands symmetric storage") {
  auto path = std::filesystem::temp_directory_path() / "solverkit_mm_sym.mtx";
  testsup::write_file(path.string(),
                      "%%MatrixMarket matrix coordinate real symmetric\n"
                      "3 3 4\n"
                      "1 1 2.0\n"
                      "2 1 -1.0\n"
                      "2 2 2.0\n"
                      "3 3 1.5\n");
  SparseMatrix m = read_matrix_market(path.string());
  std::filesystem::remove(path);
  CHECK(m.at(0, 1) == -1.0);
  CHECK(m.at(1, 0) == -1.0);
  CHECK(m.at(0, 0) == 2.0);
  CHECK(m.at(2, 2) == 1.5);
  CHECK(m.nnz() == 5);  // diagonal entries stored once
}

TEST_CASE("Dirichlet row elimination is idempotent") {
  SparseMatrix m = random_sparse(6, 6, 13, 0.6);
  for (int i = 0; i < 6; ++i) {
    if (m.at(i, i) == 0.0) {
      m = add(1.0, m, 1.0, SparseMatrix::identity(6));
      break;
    }
  }
  SparseMatrix once = m;
  zero_rows_keep_diagonal(once, {1, 4});
  SparseMatrix twice = once;
  zero_rows_keep_diagonal(twice, {1, 4});
  CHECK(testsup::max_abs_diff(once.values(), twice.values()) == 0.0);
  CHECK(once.at(1, 1) == 1.0);
  CHECK(once.at(4, 4) == 1.0);
  CHECK(once.at(1, 0) == 0.0);
}

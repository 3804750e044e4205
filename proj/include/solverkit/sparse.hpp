#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace solverkit {

using Vector = std::vector<double>;

class SingularMatrixError : public std::runtime_error {
 public:
  explicit SingularMatrixError(const std::string& what) : std::runtime_error(what) {}
};

// One assembly contribution. `seq` disambiguates the summation order of
// duplicate (row, col) entries so that parallel assembly is bit-identical
// to the serial reference.
struct Triplet {
  int row = 0;
  int col = 0;
  double value = 0.0;
  int seq = 0;
};

// Compressed sparse row matrix. Column indices within each row are sorted
// and unique; explicitly stored zeros are permitted.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(int rows, int cols, std::vector<int> row_offsets,
               std::vector<int> col_indices, std::vector<double> values);

  static SparseMatrix from_triplets(int rows, int cols, std::vector<Triplet> triplets);
  static SparseMatrix identity(int n);
  static SparseMatrix zero(int rows, int cols);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int nnz() const { return static_cast<int>(values_.size()); }

  const std::vector<int>& row_offsets() const { return row_offsets_; }
  const std::vector<int>& col_indices() const { return col_indices_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  // Value at (i, j); zero when the entry is not stored.
  double at(int i, int j) const;

  bool same_pattern(const SparseMatrix& other) const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<int> row_offsets_{0};
  std::vector<int> col_indices_;
  std::vector<double> values_;
};

Vector spmv(const SparseMatrix& m, const Vector& x);
void spmv_into(const SparseMatrix& m, const Vector& x, Vector& y);

SparseMatrix transpose(const SparseMatrix& m);

// Rows/cols are index lists into m; entry (i, j) of the result is
// m(rows[i], cols[j]). Duplicate indices are allowed.
SparseMatrix extract_submatrix(const SparseMatrix& m, const std::vector<int>& rows,
                               const std::vector<int>& cols);

SparseMatrix add(double alpha, const SparseMatrix& a, double beta, const SparseMatrix& b);
SparseMatrix matmul(const SparseMatrix& a, const SparseMatrix& b);

// B = A * diag(d) and B = diag(d) * A.
SparseMatrix scale_columns(const SparseMatrix& a, const Vector& d);
SparseMatrix scale_rows(const SparseMatrix& a, const Vector& d);

// Entrywise inverses of the diagonal and of the absolute row sums.
// A zero diagonal entry / zero row raises SingularMatrixError naming the row.
Vector diag_inverse(const SparseMatrix& m);
Vector absrowsum_inverse(const SparseMatrix& m);
Vector diagonal_of(const SparseMatrix& m);

// Dirichlet elimination: zero each listed row, keep a unit diagonal.
// Requires the diagonal entry to be present in the pattern. Idempotent.
void zero_rows_keep_diagonal(SparseMatrix& m, const std::vector<int>& rows);
// Same but the rows are zeroed entirely (off-diagonal coupling blocks).
void zero_rows(SparseMatrix& m, const std::vector<int>& rows);

// Dense vector helpers.
double dot(const Vector& a, const Vector& b);
double norm2(const Vector& a);
void axpy(double alpha, const Vector& x, Vector& y);  // y += alpha x
Vector scaled(const Vector& x, double alpha);
Vector hadamard(const Vector& a, const Vector& b);

Vector gather(const Vector& x, const std::vector<int>& idx);
void scatter_add(const Vector& local, const std::vector<int>& idx, Vector& global);

}  // namespace solverkit

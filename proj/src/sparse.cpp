#include "solverkit/sparse.hpp"

#include <algorithm>
#include <cassert>
#include <tuple>

#include "solverkit/exec_mode.hpp"
#include "solverkit/saddle.hpp"

namespace solverkit {

SparseMatrix::SparseMatrix(int rows, int cols, std::vector<int> row_offsets,
                           std::vector<int> col_indices, std::vector<double> values)
    : rows_(rows),
      cols_(cols),
      row_offsets_(std::move(row_offsets)),
      col_indices_(std::move(col_indices)),
      values_(std::move(values)) {
  assert(static_cast<int>(row_offsets_.size()) == rows_ + 1);
  assert(col_indices_.size() == values_.size());
}

SparseMatrix SparseMatrix::from_triplets(int rows, int cols, std::vector<Triplet> t) {
  std::sort(t.begin(), t.end(), [](const Triplet& a, const Triplet& b) {
    return std::tie(a.row, a.col, a.seq, a.value) < std::tie(b.row, b.col, b.seq, b.value);
  });
  std::vector<int> offsets(rows + 1, 0);
  std::vector<int> cidx;
  std::vector<double> vals;
  cidx.reserve(t.size());
  vals.reserve(t.size());
  std::size_t i = 0;
  while (i < t.size()) {
    const int r = t[i].row;
    const int c = t[i].col;
    assert(r >= 0 && r < rows && c >= 0 && c < cols);
    double sum = 0.0;
    while (i < t.size() && t[i].row == r && t[i].col == c) {
      sum += t[i].value;
      ++i;
    }
    cidx.push_back(c);
    vals.push_back(sum);
    ++offsets[r + 1];
  }
  for (int r = 0; r < rows; ++r) offsets[r + 1] += offsets[r];
  return SparseMatrix(rows, cols, std::move(offsets), std::move(cidx), std::move(vals));
}

SparseMatrix SparseMatrix::identity(int n) {
  std::vector<int> offsets(n + 1);
  std::vector<int> cidx(n);
  std::vector<double> vals(n, 1.0);
  for (int i = 0; i <= n; ++i) offsets[i] = i;
  for (int i = 0; i < n; ++i) cidx[i] = i;
  return SparseMatrix(n, n, std::move(offsets), std::move(cidx), std::move(vals));
}

SparseMatrix SparseMatrix::zero(int rows, int cols) {
  return SparseMatrix(rows, cols, std::vector<int>(rows + 1, 0), {}, {});
}

double SparseMatrix::at(int i, int j) const {
  const int b = row_offsets_[i];
  const int e = row_offsets_[i + 1];
  auto it = std::lower_bound(col_indices_.begin() + b, col_indices_.begin() + e, j);
  if (it != col_indices_.begin() + e && *it == j) {
    return values_[static_cast<std::size_t>(it - col_indices_.begin())];
  }
  return 0.0;
}

bool SparseMatrix::same_pattern(const SparseMatrix& other) const {
  return rows_ == other.rows_ && cols_ == other.cols_ &&
         row_offsets_ == other.row_offsets_ && col_indices_ == other.col_indices_;
}

void spmv_into(const SparseMatrix& m, const Vector& x, Vector& y) {
  assert(static_cast<int>(x.size()) == m.cols());
  y.assign(static_cast<std::size_t>(m.rows()), 0.0);
  const auto& off = m.row_offsets();
  const auto& cidx = m.col_indices();
  const auto& vals = m.values();
  const int n = m.rows();
#pragma omp parallel for schedule(static) if (!exec::serial() && n > 2048)
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int k = off[i]; k < off[i + 1]; ++k) s += vals[k] * x[cidx[k]];
    y[i] = s;
  }
}

Vector spmv(const SparseMatrix& m, const Vector& x) {
  Vector y;
  spmv_into(m, x, y);
  return y;
}

SparseMatrix transpose(const SparseMatrix& m) {
  const int rows = m.rows();
  const int cols = m.cols();
  std::vector<int> offsets(cols + 1, 0);
  for (int k = 0; k < m.nnz(); ++k) ++offsets[m.col_indices()[k] + 1];
  for (int c = 0; c < cols; ++c) offsets[c + 1] += offsets[c];
  std::vector<int> cidx(m.nnz());
  std::vector<double> vals(m.nnz());
  std::vector<int> cursor(offsets.begin(), offsets.end() - 1);
  for (int r = 0; r < rows; ++r) {
    for (int k = m.row_offsets()[r]; k < m.row_offsets()[r + 1]; ++k) {
      const int c = m.col_indices()[k];
      const int pos = cursor[c]++;
      cidx[pos] = r;
      vals[pos] = m.values()[k];
    }
  }
  return SparseMatrix(cols, rows, std::move(offsets), std::move(cidx), std::move(vals));
}

SparseMatrix extract_submatrix(const SparseMatrix& m, const std::vector<int>& rows,
                               const std::vector<int>& cols) {
  std::vector<int> col_map(static_cast<std::size_t>(m.cols()), -1);
  for (std::size_t j = 0; j < cols.size(); ++j) col_map[cols[j]] = static_cast<int>(j);
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int r = rows[i];
    for (int k = m.row_offsets()[r]; k < m.row_offsets()[r + 1]; ++k) {
      const int cj = col_map[m.col_indices()[k]];
      if (cj >= 0) t.push_back({static_cast<int>(i), cj, m.values()[k], 0});
    }
  }
  return SparseMatrix::from_triplets(static_cast<int>(rows.size()),
                                     static_cast<int>(cols.size()), std::move(t));
}

SparseMatrix add(double alpha, const SparseMatrix& a, double beta, const SparseMatrix& b) {
  assert(a.rows() == b.rows() && a.cols() == b.cols());
  std::vector<int> offsets(a.rows() + 1, 0);
  std::vector<int> cidx;
  std::vector<double> vals;
  cidx.reserve(a.nnz() + b.nnz());
  vals.reserve(a.nnz() + b.nnz());
  for (int r = 0; r < a.rows(); ++r) {
    int ka = a.row_offsets()[r];
    int kb = b.row_offsets()[r];
    const int ea = a.row_offsets()[r + 1];
    const int eb = b.row_offsets()[r + 1];
    while (ka < ea || kb < eb) {
      int c;
      double v;
      if (kb >= eb || (ka < ea && a.col_indices()[ka] < b.col_indices()[kb])) {
        c = a.col_indices()[ka];
        v = alpha * a.values()[ka];
        ++ka;
      } else if (ka >= ea || b.col_indices()[kb] < a.col_indices()[ka]) {
        c = b.col_indices()[kb];
        v = beta * b.values()[kb];
        ++kb;
      } else {
        c = a.col_indices()[ka];
        v = alpha * a.values()[ka] + beta * b.values()[kb];
        ++ka;
        ++kb;
      }
      cidx.push_back(c);
      vals.push_back(v);
    }
    offsets[r + 1] = static_cast<int>(cidx.size());
  }
  return SparseMatrix(a.rows(), a.cols(), std::move(offsets), std::move(cidx), std::move(vals));
}

SparseMatrix matmul(const SparseMatrix& a, const SparseMatrix& b) {
  assert(a.cols() == b.rows());
  const int rows = a.rows();
  const int cols = b.cols();
  std::vector<int> offsets(rows + 1, 0);
  std::vector<int> cidx;
  std::vector<double> vals;
  std::vector<double> accum(static_cast<std::size_t>(cols), 0.0);
  std::vector<int> marked;
  for (int r = 0; r < rows; ++r) {
    marked.clear();
    for (int ka = a.row_offsets()[r]; ka < a.row_offsets()[r + 1]; ++ka) {
      const int k = a.col_indices()[ka];
      const double av = a.values()[ka];
      for (int kb = b.row_offsets()[k]; kb < b.row_offsets()[k + 1]; ++kb) {
        const int c = b.col_indices()[kb];
        if (accum[c] == 0.0 &&
            std::find(marked.begin(), marked.end(), c) == marked.end()) {
          marked.push_back(c);
        }
        accum[c] += av * b.values()[kb];
      }
    }
    std::sort(marked.begin(), marked.end());
    for (int c : marked) {
      cidx.push_back(c);
      vals.push_back(accum[c]);
      accum[c] = 0.0;
    }
    offsets[r + 1] = static_cast<int>(cidx.size());
  }
  return SparseMatrix(rows, cols, std::move(offsets), std::move(cidx), std::move(vals));
}

SparseMatrix scale_columns(const SparseMatrix& a, const Vector& d) {
  assert(static_cast<int>(d.size()) == a.cols());
  SparseMatrix out = a;
  auto& vals = out.values();
  for (int r = 0; r < a.rows(); ++r) {
    for (int k = a.row_offsets()[r]; k < a.row_offsets()[r + 1]; ++k) {
      vals[k] *= d[a.col_indices()[k]];
    }
  }
  return out;
}

SparseMatrix scale_rows(const SparseMatrix& a, const Vector& d) {
  assert(static_cast<int>(d.size()) == a.rows());
  SparseMatrix out = a;
  auto& vals = out.values();
  for (int r = 0; r < a.rows(); ++r) {
    for (int k = a.row_offsets()[r]; k < a.row_offsets()[r + 1]; ++k) vals[k] *= d[r];
  }
  return out;
}

Vector diag_inverse(const SparseMatrix& m) {
  assert(m.rows() == m.cols());
  Vector d(static_cast<std::size_t>(m.rows()));
  for (int i = 0; i < m.rows(); ++i) {
    const double v = m.at(i, i);
    if (v == 0.0) {
      throw SingularMatrixError("diag_inverse: zero diagonal entry at row " +
                                std::to_string(i));
    }
    d[i] = 1.0 / v;
  }
  return d;
}

Vector absrowsum_inverse(const SparseMatrix& m) {
  Vector d(static_cast<std::size_t>(m.rows()));
  for (int i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (int k = m.row_offsets()[i]; k < m.row_offsets()[i + 1]; ++k) {
      s += std::abs(m.values()[k]);
    }
    if (s == 0.0) {
      throw SingularMatrixError("absrowsum_inverse: zero row " + std::to_string(i));
    }
    d[i] = 1.0 / s;
  }
  return d;
}

Vector diagonal_of(const SparseMatrix& m) {
  Vector d(static_cast<std::size_t>(std::min(m.rows(), m.cols())));
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = m.at(static_cast<int>(i), static_cast<int>(i));
  return d;
}

void zero_rows_keep_diagonal(SparseMatrix& m, const std::vector<int>& rows) {
  auto& vals = m.values();
  for (int r : rows) {
    bool diag_found = false;
    for (int k = m.row_offsets()[r]; k < m.row_offsets()[r + 1]; ++k) {
      if (m.col_indices()[k] == r) {
        vals[k] = 1.0;
        diag_found = true;
      } else {
        vals[k] = 0.0;
      }
    }
    if (!diag_found) {
      throw std::runtime_error("zero_rows_keep_diagonal: diagonal entry missing in row " +
                               std::to_string(r));
    }
  }
}

void zero_rows(SparseMatrix& m, const std::vector<int>& rows) {
  auto& vals = m.values();
  for (int r : rows) {
    for (int k = m.row_offsets()[r]; k < m.row_offsets()[r + 1]; ++k) vals[k] = 0.0;
  }
}

double dot(const Vector& a, const Vector& b) {
  assert(a.size() == b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const Vector& a) { return std::sqrt(dot(a, a)); }

void axpy(double alpha, const Vector& x, Vector& y) {
  assert(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

Vector scaled(const Vector& x, double alpha) {
  Vector y(x);
  for (double& v : y) v *= alpha;
  return y;
}

Vector hadamard(const Vector& a, const Vector& b) {
  assert(a.size() == b.size());
  Vector y(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) y[i] = a[i] * b[i];
  return y;
}

Vector gather(const Vector& x, const std::vector<int>& idx) {
  Vector y(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) y[i] = x[idx[i]];
  return y;
}

void scatter_add(const Vector& local, const std::vector<int>& idx, Vector& global) {
  assert(local.size() == idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) global[idx[i]] += local[i];
}

Vector SaddleOperator::apply(const Vector& x) const {
  assert(static_cast<int>(x.size()) == size());
  const Vector u(x.begin(), x.begin() + n_u());
  const Vector p(x.begin() + n_u(), x.end());
  Vector yu = spmv(F, u);
  axpy(1.0, spmv(Bt, p), yu);
  Vector yp = spmv(B, u);
  if (C.nnz() > 0) axpy(-1.0, spmv(C, p), yp);
  return stack(yu, yp);
}

SparseMatrix SaddleOperator::monolithic() const {
  const int nu = n_u();
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(F.nnz() + B.nnz() + Bt.nnz() + C.nnz()));
  auto emit = [&t](const SparseMatrix& m, int roff, int coff, double s) {
    for (int r = 0; r < m.rows(); ++r) {
      for (int k = m.row_offsets()[r]; k < m.row_offsets()[r + 1]; ++k) {
        t.push_back({r + roff, m.col_indices()[k] + coff, s * m.values()[k], 0});
      }
    }
  };
  emit(F, 0, 0, 1.0);
  emit(Bt, 0, nu, 1.0);
  emit(B, nu, 0, 1.0);
  emit(C, nu, nu, -1.0);
  return SparseMatrix::from_triplets(size(), size(), std::move(t));
}

Vector SaddleOperator::velocity_part(const Vector& x) const {
  return Vector(x.begin(), x.begin() + n_u());
}

Vector SaddleOperator::pressure_part(const Vector& x) const {
  return Vector(x.begin() + n_u(), x.end());
}

Vector SaddleOperator::stack(const Vector& u, const Vector& p) {
  Vector x;
  x.reserve(u.size() + p.size());
  x.insert(x.end(), u.begin(), u.end());
  x.insert(x.end(), p.begin(), p.end());
  return x;
}

}  // namespace solverkit

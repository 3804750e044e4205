#include "solverkit/factorization.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <cassert>

namespace solverkit {

namespace {

Eigen::SparseMatrix<double> to_eigen(const SparseMatrix& m) {
  Eigen::SparseMatrix<double> e(m.rows(), m.cols());
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(m.nnz()));
  for (int r = 0; r < m.rows(); ++r) {
    for (int k = m.row_offsets()[r]; k < m.row_offsets()[r + 1]; ++k) {
      t.emplace_back(r, m.col_indices()[k], m.values()[k]);
    }
  }
  e.setFromTriplets(t.begin(), t.end());
  e.makeCompressed();
  return e;
}

}  // namespace

struct Factorization::Impl {
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  SparseMatrix pattern_ref;  // values unused; kept for pattern checks
  std::string label;
  int n = 0;
};

Factorization::Factorization(const SparseMatrix& m, std::string label)
    : impl_(std::make_shared<Impl>()) {
  assert(m.rows() == m.cols());
  impl_->label = std::move(label);
  impl_->n = m.rows();
  impl_->pattern_ref = m;
  const auto e = to_eigen(m);
  impl_->lu.analyzePattern(e);
  impl_->lu.factorize(e);
  if (impl_->lu.info() != Eigen::Success) {
    throw SingularMatrixError("factorization of " + impl_->label + " failed: " +
                              impl_->lu.lastErrorMessage());
  }
}

void Factorization::refactorize(const SparseMatrix& m) {
  if (!m.same_pattern(impl_->pattern_ref)) {
    throw std::runtime_error("refactorize: sparsity pattern changed for " + impl_->label);
  }
  impl_->pattern_ref = m;
  impl_->lu.factorize(to_eigen(m));
  if (impl_->lu.info() != Eigen::Success) {
    throw SingularMatrixError("refactorization of " + impl_->label + " failed: " +
                              impl_->lu.lastErrorMessage());
  }
}

Vector Factorization::solve(const Vector& rhs) const {
  assert(static_cast<int>(rhs.size()) == impl_->n);
  Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(rhs.data(), rhs.size());
  Eigen::VectorXd x = impl_->lu.solve(b);
  return Vector(x.data(), x.data() + x.size());
}

int Factorization::size() const { return impl_->n; }

const std::string& Factorization::label() const { return impl_->label; }

}  // namespace solverkit

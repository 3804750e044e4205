#pragma once

#include <memory>
#include <string>

#include "solverkit/sparse.hpp"

namespace solverkit {

// Sparse LU factorization. The symbolic analysis is retained so that
// refactorize() on a matrix with the identical pattern redoes only the
// numeric phase. Copies share the underlying factors; solve() is safe to
// call concurrently from several threads.
class Factorization {
 public:
  explicit Factorization(const SparseMatrix& m, std::string label = "matrix");

  // Numeric-only refactorization; requires the same sparsity pattern.
  void refactorize(const SparseMatrix& m);

  Vector solve(const Vector& rhs) const;
  int size() const;
  const std::string& label() const;

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

}  // namespace solverkit

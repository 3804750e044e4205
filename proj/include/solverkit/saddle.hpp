#pragma once

#include "solverkit/sparse.hpp"

namespace solverkit {

// Block operator [F  Bt; B  -C] acting on stacked (velocity, pressure)
// vectors. C is the stabilization block; it may have an empty pattern.
struct SaddleOperator {
  SparseMatrix F;   // n_u x n_u
  SparseMatrix B;   // n_p x n_u
  SparseMatrix Bt;  // n_u x n_p
  SparseMatrix C;   // n_p x n_p

  int n_u() const { return F.rows(); }
  int n_p() const { return B.rows(); }
  int size() const { return n_u() + n_p(); }

  Vector apply(const Vector& x) const;

  // Assembled monolithic view; agrees with blockwise application exactly.
  SparseMatrix monolithic() const;

  Vector velocity_part(const Vector& x) const;
  Vector pressure_part(const Vector& x) const;
  static Vector stack(const Vector& u, const Vector& p);
};

}  // namespace solverkit

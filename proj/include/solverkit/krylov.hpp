#pragma once

#include <functional>
#include <utility>

#include "solverkit/sparse.hpp"

namespace solverkit {

using LinOp = std::function<Vector(const Vector&)>;

struct GmresConfig {
  double rel_tol = 1e-8;
  int max_iter = 200;
  int restart = 0;  // 0 = no restart
};

struct SolveStats {
  int iterations = 0;
  double final_relative_residual = 0.0;  // recomputed from the returned x
  std::vector<double> history;           // unpreconditioned residual estimates
  bool converged = false;
  bool breakdown_exact = false;  // Krylov space became invariant
};

// Right-preconditioned GMRES with modified Gram-Schmidt and conditional
// reorthogonalization. The convergence quantity is the unpreconditioned
// residual relative to the initial one. preconditioner may be empty.
std::pair<Vector, SolveStats> gmres(const LinOp& apply_operator,
                                    const LinOp& apply_preconditioner_right,
                                    const Vector& b, const Vector& x0,
                                    const GmresConfig& cfg);

struct SpectralRadiusEstimate {
  double value = 0.0;
  bool converged = false;  // false once the matvec budget is exhausted
  int matvecs = 0;
};

// Largest eigenvalue magnitude via a single-vector Arnoldi iteration with a
// fixed seed; converged when the dominant Ritz residual is below rel_tol
// relative to the eigenvalue magnitude.
SpectralRadiusEstimate estimate_spectral_radius(const LinOp& op, int n,
                                                double rel_tol = 0.05,
                                                int max_matvecs = 200);

}  // namespace solverkit

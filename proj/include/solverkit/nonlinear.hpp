#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "solverkit/krylov.hpp"
#include "solverkit/sparse.hpp"

namespace solverkit {

struct ForcingConfig {
  double eta0 = 1e-3;
  double eta_min = 1e-8;
  double eta_max = 1e-3;
  double alpha = 1.5;
  double gamma = 0.9;
};

// eta_k = gamma (|R_k| / |R_{k-1}|)^alpha clamped into
// [max(gamma eta_{k-1}^alpha, eta_min), eta_max]. A zero previous norm
// returns eta_min (the outer iteration has already converged).
double forcing_choice2(double r_norm, double r_prev_norm, double eta_prev,
                       const ForcingConfig& cfg);

struct LineSearchConfig {
  double initial = 1.0;
  double contraction = 0.5;
  int max_backtracks = 8;
  double sufficient_decrease = 1e-4;
};

struct NewtonConfig {
  double residual_tol = 1e-8;  // relative to the initial residual
  double update_tol = 1e-8;    // absolute 2-norm of the applied update
  int max_steps = 20;
  ForcingConfig forcing;
  LineSearchConfig line_search;
  int gmres_max_iter = 500;
  int gmres_restart = 0;
  std::optional<double> fixed_forcing;  // overrides the adaptive sequence
};

// One linearization: Jacobian action, residual at the expansion point, and
// the preconditioner to use for this step (may be empty).
struct NewtonSystem {
  LinOp jacobian;
  Vector residual;
  LinOp preconditioner;
};

// assemble() receives the Newton step index so the problem can gate
// preconditioner rebuilds (rebuild only within the first k steps).
struct NewtonProblem {
  int n = 0;
  std::function<NewtonSystem(const Vector& x, int step)> assemble;
  std::function<Vector(const Vector& x)> residual_only;
};

struct NewtonStepStats {
  int step = 0;
  double residual_norm = 0.0;
  double eta = 0.0;
  int gmres_iterations = 0;
  double gmres_relative_residual = 0.0;
  int backtracks = 0;
  double step_length = 1.0;
  double update_norm = 0.0;
  double gmres_seconds = 0.0;  // wall time inside the linear solve
};

struct NewtonReport {
  bool converged = false;
  std::string failure;  // empty when converged
  int steps = 0;        // updates applied
  double initial_residual_norm = 0.0;
  double final_residual_norm = 0.0;
  std::vector<NewtonStepStats> step_stats;
};

// Inexact Newton with backtracking: each step solves J dx = -R with GMRES
// (zero initial guess, relative tolerance from the forcing sequence), then
// halves the step until |R(x + t dx)| <= (1 - c t) |R(x)|. Stops when the
// relative residual or the update norm reaches its tolerance. Line-search
// exhaustion and the step cap produce a non-converged report, not a throw.
NewtonReport newton_solve(const NewtonProblem& problem, Vector& x, const NewtonConfig& cfg);

}  // namespace solverkit

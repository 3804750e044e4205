#pragma once

#include <functional>
#include <utility>

#include "solverkit/fe_assembly.hpp"
#include "solverkit/mesh.hpp"
#include "solverkit/nonlinear.hpp"
#include "solverkit/sparse.hpp"

namespace solverkit {

struct TransientConfig {
  double dt = 0.0;
  double t_end = 0.0;
};

// Residual weights of the discrete time derivative:
//   c0 M x^{n+1} + c_n M x^n + c_nm1 M x^{n-1}.
// Second order: (3/(2dt), -2/dt, 1/(2dt)); the bootstrap step (no x^{n-1})
// uses backward Euler (1/dt, -1/dt, 0).
struct Bdf2Terms {
  double c0 = 0.0;
  double c_n = 0.0;
  double c_nm1 = 0.0;
};

Bdf2Terms bdf2_terms(double dt, bool bootstrap);

// History vector c_n M x^n + c_nm1 M x^{n-1} (bootstrap when x_nm1 is null).
Vector bdf2_history(const std::function<Vector(const Vector&)>& apply_mass,
                    const Vector& x_n, const Vector* x_nm1, double dt);

// Builds the Newton problem of one implicit step. x_nm1 is null on the
// bootstrap step; t_next is the time level being solved for.
using ImplicitStepFactory = std::function<NewtonProblem(
    double dt, const Vector& x_n, const Vector* x_nm1, double t_next)>;

struct StepResult {
  Vector x;
  NewtonReport report;
};

// Advances one step: builds the problem via the factory, starts Newton from
// x_n. Non-convergence is reported, not thrown.
StepResult bdf2_advance(const ImplicitStepFactory& factory, const Vector& x_n,
                        const Vector* x_nm1, double dt, double t_next,
                        const NewtonConfig& cfg);

// u_inf dt / h.
double cfl_structured(double u_inf, double dt, double h);

// Per-element CFL u_inf(T) dt / d_I(T) with u_inf(T) the max-norm of the
// velocity over the element's nodes and d_I the incircle diameter:
// triangles 2 area / semiperimeter, quadrilaterals and hexahedra the
// shortest edge. Returns (max, average) over elements.
std::pair<double, double> cfl_unstructured(const Mesh& mesh, const DofMap& dofmap,
                                           const Vector& u, double dt);

}  // namespace solverkit

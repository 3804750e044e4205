#pragma once

#include <string>

#include "solverkit/fe_assembly.hpp"
#include "solverkit/mesh.hpp"

namespace solverkit {

// A concrete benchmark problem: geometry, boundary data, and parameters.
// Body force is zero throughout.
struct ProblemSetup {
  Mesh mesh;
  DofMap dofmap;  // Dirichlet data already set
  std::string name;
  double nu = 1.0;
  double v_max = 0.0;      // 0 for enclosed flows
  bool enclosed = false;   // no outflow boundary
  bool stabilized = false;  // equal-order pair
};

// Lid-driven cavity on the unit square/cube: lid velocity (1,0,0) on the
// whole top including the rim, no-slip elsewhere, nu = 1/Re, no outflow and
// no pressure pinning.
ProblemSetup make_cavity(int dim, double reynolds, int cells_per_side,
                         ElementKind kind, int order);

// Backward-facing step: parabolic-like inflow scaled by v_max, no-slip
// walls, natural outflow.
ProblemSetup make_bfs(int dim, double v_max, double nu, int cells_per_unit,
                      ElementKind kind, int order);

}  // namespace solverkit

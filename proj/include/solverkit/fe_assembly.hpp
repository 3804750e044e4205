#pragma once

#include <array>
#include <functional>
#include <optional>

#include "solverkit/mesh.hpp"
#include "solverkit/saddle.hpp"
#include "solverkit/sparse.hpp"

namespace solverkit {

enum class Field { velocity, pressure };

// Homogeneous boundary treatments for the pressure operators, per the
// (outlet, inlet, wall) table: bc1 = (D, N, N) for both operators;
// bc2 = A_p (D, N, N), F_p (D, R, N); bc3 = A_p (D, N, N), F_p (N, R, N).
enum class BcStrategy { bc1, bc2, bc3 };

enum class LinearizationMode { picard, newton, transient_newton };

// Velocity dofs are node-major (dim components per node), pressure dofs
// follow after all velocity dofs. Pressure lives on element corner nodes.
struct DofMap {
  int dim = 2;
  int order = 1;
  int n_nodes = 0;
  std::vector<int> pressure_index;  // node -> pressure dof, -1 when none
  std::vector<int> pressure_node;   // pressure dof -> node
  std::vector<int> dirichlet_dofs;  // sorted velocity dofs
  std::vector<double> dirichlet_values;

  int n_velocity() const { return dim * n_nodes; }
  int n_pressure() const { return static_cast<int>(pressure_node.size()); }
  int n_total() const { return n_velocity() + n_pressure(); }
  int vdof(int node, int comp) const { return node * dim + comp; }
};

DofMap make_dofmap(const Mesh& mesh);

// Returns the prescribed velocity at a boundary node or nullopt to leave it
// free. Applied to every node with a boundary tag.
using DirichletFn = std::function<std::optional<std::array<double, 3>>(
    const std::array<double, 3>& xyz, BoundaryTag tag)>;
void set_dirichlet(DofMap& dofmap, const Mesh& mesh, const DirichletFn& fn);

// Overwrites Dirichlet entries of a velocity or monolithic vector with the
// prescribed values.
void apply_dirichlet_values(const DofMap& dofmap, Vector& x);

struct AssemblyState {
  Vector X;  // monolithic iterate: velocity coefficients, then pressure
  double nu = 1.0;
  double rho = 1.0;  // fixed density
  bool stabilized = false;
  bool convection = true;  // false: Stokes (no advective terms anywhere)
  std::optional<double> dt;
  const Vector* u_prev = nullptr;   // velocity part of the previous step
  const Vector* u_prev2 = nullptr;  // two steps back; absent on bootstrap
};

struct SaddleSystem {
  SaddleOperator op;
  Vector residual;
};

SparseMatrix assemble_viscous(const Mesh& mesh, const DofMap& dofmap);
SparseMatrix assemble_divergence(const Mesh& mesh, const DofMap& dofmap);
SparseMatrix assemble_convection(const Mesh& mesh, const DofMap& dofmap, const Vector& w);
SparseMatrix assemble_newton_term(const Mesh& mesh, const DofMap& dofmap, const Vector& w);
SparseMatrix assemble_mass(const Mesh& mesh, const DofMap& dofmap, Field field);
SparseMatrix assemble_pressure_laplacian(const Mesh& mesh, const DofMap& dofmap,
                                         BcStrategy bc);
// mass_coeff is the time-derivative coefficient multiplying M_p (absent for
// stationary problems). The Robin contribution is a boundary mass matrix
// weighted by (w . n) on inlet facets for bc2/bc3.
SparseMatrix assemble_pressure_convdiff(const Mesh& mesh, const DofMap& dofmap,
                                        const Vector& w, double nu,
                                        std::optional<double> mass_coeff, BcStrategy bc);
SparseMatrix assemble_bd_stabilization(const Mesh& mesh, const DofMap& dofmap, double nu);

// Jacobian blocks and nonlinear residual at state.X. Dirichlet rows carry a
// unit diagonal; the residual there equals current value minus prescribed.
SaddleSystem assemble_saddle(const Mesh& mesh, const DofMap& dofmap,
                             const AssemblyState& state, LinearizationMode mode);

Vector assemble_velocity_load(
    const Mesh& mesh, const DofMap& dofmap,
    const std::function<std::array<double, 3>(const std::array<double, 3>&)>& f);

double velocity_l2_error(
    const Mesh& mesh, const DofMap& dofmap, const Vector& u,
    const std::function<std::array<double, 3>(const std::array<double, 3>&)>& exact);

std::array<double, 3> inflow_profile_bfs(const std::array<double, 3>& p, double v_max,
                                         int dim);
double reynolds_bfs(double v_max, double nu);

}  // namespace solverkit

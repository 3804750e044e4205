#include "solverkit/problems.hpp"

#include <cmath>
#include <stdexcept>

namespace solverkit {

ProblemSetup make_cavity(int dim, double reynolds, int cells_per_side,
                         ElementKind kind, int order) {
  if (!(reynolds > 0.0)) throw std::invalid_argument("cavity: Reynolds must be positive");
  ProblemSetup p;
  p.mesh = dim == 3 ? build_unit_cube(cells_per_side, order)
                    : build_unit_square(cells_per_side, kind, order);
  p.dofmap = make_dofmap(p.mesh);
  p.name = dim == 3 ? "cavity3d" : "cavity2d";
  p.nu = 1.0 / reynolds;
  p.enclosed = true;
  p.stabilized = order == 1;
  int top_axis = dim == 3 ? 2 : 1;
  set_dirichlet(p.dofmap, p.mesh,
                [top_axis](const std::array<double, 3>& x, BoundaryTag) {
                  std::array<double, 3> v{0.0, 0.0, 0.0};
                  if (std::abs(x[top_axis] - 1.0) < 1e-12) v[0] = 1.0;  // lid incl. rim
                  return std::optional<std::array<double, 3>>(v);
                });
  return p;
}

ProblemSetup make_bfs(int dim, double v_max, double nu, int cells_per_unit,
                      ElementKind kind, int order) {
  if (!(nu > 0.0)) throw std::invalid_argument("bfs: viscosity must be positive");
  ProblemSetup p;
  p.mesh = build_bfs(dim, cells_per_unit, kind, order);
  p.dofmap = make_dofmap(p.mesh);
  p.name = dim == 3 ? "bfs3d" : "bfs2d";
  p.nu = nu;
  p.v_max = v_max;
  p.enclosed = false;
  p.stabilized = order == 1;
  set_dirichlet(p.dofmap, p.mesh,
                [v_max, dim](const std::array<double, 3>& x, BoundaryTag tag)
                    -> std::optional<std::array<double, 3>> {
                  if (tag == BoundaryTag::inflow) return inflow_profile_bfs(x, v_max, dim);
                  if (tag == BoundaryTag::wall) return std::array<double, 3>{0.0, 0.0, 0.0};
                  return std::nullopt;  // outflow stays natural
                });
  return p;
}

}  // namespace solverkit

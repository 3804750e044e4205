#include "solverkit/timestepping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace solverkit {

Bdf2Terms bdf2_terms(double dt, bool bootstrap) {
  if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
  if (bootstrap) return {1.0 / dt, -1.0 / dt, 0.0};
  return {1.5 / dt, -2.0 / dt, 0.5 / dt};
}

Vector bdf2_history(const std::function<Vector(const Vector&)>& apply_mass,
                    const Vector& x_n, const Vector* x_nm1, double dt) {
  Bdf2Terms terms = bdf2_terms(dt, x_nm1 == nullptr);
  Vector h = apply_mass(x_n);
  for (double& v : h) v *= terms.c_n;
  if (x_nm1) {
    Vector h2 = apply_mass(*x_nm1);
    axpy(terms.c_nm1, h2, h);
  }
  return h;
}

StepResult bdf2_advance(const ImplicitStepFactory& factory, const Vector& x_n,
                        const Vector* x_nm1, double dt, double t_next,
                        const NewtonConfig& cfg) {
  NewtonProblem problem = factory(dt, x_n, x_nm1, t_next);
  StepResult result;
  result.x = x_n;
  result.report = newton_solve(problem, result.x, cfg);
  return result;
}

double cfl_structured(double u_inf, double dt, double h) { return u_inf * dt / h; }

namespace {

double distance(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  double s = 0.0;
  for (int d = 0; d < 3; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
  return std::sqrt(s);
}

// Incircle diameter over the element's corner geometry.
double incircle_diameter(const Mesh& mesh, int e) {
  std::vector<int> corners = mesh.corner_local_indices();
  const std::vector<int>& conn = mesh.elements[e];
  if (mesh.kind == ElementKind::triangle) {
    const auto& a = mesh.nodes[conn[corners[0]]];
    const auto& b = mesh.nodes[conn[corners[1]]];
    const auto& c = mesh.nodes[conn[corners[2]]];
    double la = distance(b, c), lb = distance(a, c), lc = distance(a, b);
    double s = 0.5 * (la + lb + lc);
    double area = 0.5 * std::abs((b[0] - a[0]) * (c[1] - a[1]) -
                                 (c[0] - a[0]) * (b[1] - a[1]));
    return 2.0 * area / s;
  }
  // Tensor elements: shortest edge of the box. Corner order is tensorized,
  // so axis neighbors differ by strides 1, 2, 4.
  double shortest = std::numeric_limits<double>::max();
  int n_corners = static_cast<int>(corners.size());
  for (int stride = 1; stride < n_corners; stride *= 2)
    for (int i = 0; i < n_corners; ++i) {
      int j = i + stride;
      if (j >= n_corners || (i / stride) % 2 != 0) continue;
      shortest = std::min(shortest,
                          distance(mesh.nodes[conn[corners[i]]], mesh.nodes[conn[corners[j]]]));
    }
  return shortest;
}

}  // namespace

std::pair<double, double> cfl_unstructured(const Mesh& mesh, const DofMap& dofmap,
                                           const Vector& u, double dt) {
  double cfl_max = 0.0;
  double cfl_sum = 0.0;
  for (int e = 0; e < mesh.n_elements(); ++e) {
    double umax = 0.0;
    for (int node : mesh.elements[e])
      for (int c = 0; c < dofmap.dim; ++c)
        umax = std::max(umax, std::abs(u[dofmap.vdof(node, c)]));
    double cfl = umax * dt / incircle_diameter(mesh, e);
    cfl_max = std::max(cfl_max, cfl);
    cfl_sum += cfl;
  }
  double avg = mesh.n_elements() > 0 ? cfl_sum / mesh.n_elements() : 0.0;
  return {cfl_max, avg};
}

}  // namespace solverkit

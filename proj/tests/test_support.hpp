#pragma once

// Shared helpers for the unit and acceptance binaries: dense mirrors of the
// sparse kernels (via Eigen) and an independent P1 triangle quadrature used
// as an oracle for the assembly routines. The oracle deliberately uses a
// different quadrature rule and code path than the library.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "solverkit/factorization.hpp"
#include "solverkit/fe_assembly.hpp"
#include "solverkit/mesh.hpp"
#include "solverkit/sparse.hpp"

namespace testsup {

using solverkit::Mesh;
using solverkit::SparseMatrix;
using solverkit::Vector;

inline Eigen::MatrixXd to_dense(const SparseMatrix& m) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(m.rows(), m.cols());
  for (int i = 0; i < m.rows(); ++i) {
    for (int k = m.row_offsets()[i]; k < m.row_offsets()[i + 1]; ++k) {
      d(i, m.col_indices()[k]) = m.values()[k];
    }
  }
  return d;
}

inline Eigen::VectorXd to_eigen(const Vector& v) {
  Eigen::VectorXd e(static_cast<long>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) e[static_cast<long>(i)] = v[i];
  return e;
}

inline Vector from_eigen(const Eigen::VectorXd& e) {
  Vector v(static_cast<size_t>(e.size()));
  for (long i = 0; i < e.size(); ++i) v[static_cast<size_t>(i)] = e[i];
  return v;
}

inline Vector dense_solve(const Eigen::MatrixXd& a, const Vector& b) {
  return from_eigen(Eigen::FullPivLU<Eigen::MatrixXd>(a).solve(to_eigen(b)));
}

inline double dense_spectral_radius(const Eigen::MatrixXd& a) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(a, false);
  double r = 0.0;
  for (long i = 0; i < es.eigenvalues().size(); ++i) {
    r = std::max(r, std::abs(es.eigenvalues()[i]));
  }
  return r;
}

inline Vector random_vector(int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Vector v(static_cast<size_t>(n));
  for (auto& x : v) x = dist(rng);
  return v;
}

inline double max_abs_diff(const Vector& a, const Vector& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline double max_abs(const Vector& a) {
  double m = 0.0;
  for (double x : a) m = std::max(m, std::abs(x));
  return m;
}

// Materializes a linear operator column by column.
inline Eigen::MatrixXd dense_of_operator(const std::function<Vector(const Vector&)>& op,
                                         int n) {
  Eigen::MatrixXd d(n, n);
  for (int j = 0; j < n; ++j) {
    Vector e(static_cast<size_t>(n), 0.0);
    e[static_cast<size_t>(j)] = 1.0;
    Vector col = op(e);
    for (int i = 0; i < n; ++i) d(i, j) = col[static_cast<size_t>(i)];
  }
  return d;
}

// Scalar Laplacian over mesh nodes, taken as the x-component block of the
// vector viscous operator (which is component-block-diagonal). When
// `dirichlet_boundary` is set, tagged boundary rows are eliminated
// (zero row, unit diagonal) and flagged in the mask.
struct ScalarLaplacian {
  SparseMatrix K;
  std::vector<char> dirichlet_node;
};

inline ScalarLaplacian scalar_laplacian(const Mesh& mesh, bool dirichlet_boundary) {
  solverkit::DofMap dofmap = solverkit::make_dofmap(mesh);
  SparseMatrix a = solverkit::assemble_viscous(mesh, dofmap);
  std::vector<int> comp0(static_cast<size_t>(mesh.n_nodes()));
  for (int n = 0; n < mesh.n_nodes(); ++n) comp0[static_cast<size_t>(n)] = dofmap.vdof(n, 0);
  ScalarLaplacian out;
  out.K = solverkit::extract_submatrix(a, comp0, comp0);
  out.dirichlet_node.assign(static_cast<size_t>(mesh.n_nodes()), 0);
  if (dirichlet_boundary) {
    std::vector<int> rows;
    for (int n = 0; n < mesh.n_nodes(); ++n) {
      if (mesh.node_tags[static_cast<size_t>(n)] != solverkit::BoundaryTag::none) {
        rows.push_back(n);
        out.dirichlet_node[static_cast<size_t>(n)] = 1;
      }
    }
    solverkit::zero_rows_keep_diagonal(out.K, rows);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Independent P1 triangle quadrature oracle (7-point, degree 5).

struct TriQuadPoint {
  double xi, eta, weight;
};

inline const std::array<TriQuadPoint, 7>& tri_rule() {
  static const std::array<TriQuadPoint, 7> rule = {{
      {1.0 / 3.0, 1.0 / 3.0, 0.225},
      {0.47014206410511509, 0.47014206410511509, 0.13239415278850618},
      {0.05971587178976982, 0.47014206410511509, 0.13239415278850618},
      {0.47014206410511509, 0.05971587178976982, 0.13239415278850618},
      {0.10128650732345634, 0.10128650732345634, 0.12593918054482715},
      {0.79742698535308732, 0.10128650732345634, 0.12593918054482715},
      {0.10128650732345634, 0.79742698535308732, 0.12593918054482715},
  }};
  return rule;
}

struct TriGeom {
  std::array<int, 3> nodes;
  double area = 0.0;
  // Physical gradients of the three barycentric basis functions.
  std::array<std::array<double, 2>, 3> grad;
};

inline TriGeom tri_geometry(const Mesh& mesh, int e) {
  TriGeom g;
  for (int k = 0; k < 3; ++k) g.nodes[static_cast<size_t>(k)] = mesh.elements[static_cast<size_t>(e)][static_cast<size_t>(k)];
  const auto& p0 = mesh.nodes[static_cast<size_t>(g.nodes[0])];
  const auto& p1 = mesh.nodes[static_cast<size_t>(g.nodes[1])];
  const auto& p2 = mesh.nodes[static_cast<size_t>(g.nodes[2])];
  double j00 = p1[0] - p0[0], j01 = p2[0] - p0[0];
  double j10 = p1[1] - p0[1], j11 = p2[1] - p0[1];
  double det = j00 * j11 - j01 * j10;
  g.area = 0.5 * std::abs(det);
  // inv(J)^T rows applied to reference gradients (-1,-1), (1,0), (0,1).
  double i00 = j11 / det, i01 = -j10 / det;
  double i10 = -j01 / det, i11 = j00 / det;
  g.grad[0] = {-(i00 + i01), -(i10 + i11)};
  g.grad[1] = {i00, i10};
  g.grad[2] = {i01, i11};
  return g;
}

inline std::array<double, 3> tri_basis(double xi, double eta) {
  return {1.0 - xi - eta, xi, eta};
}

// Integrates f(values of the 3 basis functions, their gradients) over one
// triangle with the 7-point rule.
template <typename F>
double tri_integrate(const Mesh& mesh, int e, const F& f) {
  TriGeom g = tri_geometry(mesh, e);
  double sum = 0.0;
  for (const auto& q : tri_rule()) {
    sum += q.weight * f(g, tri_basis(q.xi, q.eta));
  }
  return g.area * sum;
}

// Oracles over a P1 triangle mesh. i/j are mesh node ids; local lookups
// return -1 when a node is not on the element.
inline int local_of(const TriGeom& g, int node) {
  for (int k = 0; k < 3; ++k) {
    if (g.nodes[static_cast<size_t>(k)] == node) return k;
  }
  return -1;
}

inline double oracle_scalar_laplace_entry(const Mesh& mesh, int i, int j) {
  double total = 0.0;
  for (int e = 0; e < mesh.n_elements(); ++e) {
    total += tri_integrate(mesh, e, [&](const TriGeom& g, const std::array<double, 3>&) {
      int li = local_of(g, i), lj = local_of(g, j);
      if (li < 0 || lj < 0) return 0.0;
      return g.grad[static_cast<size_t>(li)][0] * g.grad[static_cast<size_t>(lj)][0] +
             g.grad[static_cast<size_t>(li)][1] * g.grad[static_cast<size_t>(lj)][1];
    });
  }
  return total;
}

inline double oracle_scalar_mass_entry(const Mesh& mesh, int i, int j) {
  double total = 0.0;
  for (int e = 0; e < mesh.n_elements(); ++e) {
    total += tri_integrate(mesh, e, [&](const TriGeom& g, const std::array<double, 3>& phi) {
      int li = local_of(g, i), lj = local_of(g, j);
      if (li < 0 || lj < 0) return 0.0;
      return phi[static_cast<size_t>(li)] * phi[static_cast<size_t>(lj)];
    });
  }
  return total;
}

// -int psi_i d_c(phi_j): divergence block entry for pressure node i against
// velocity node j, component c.
inline double oracle_divergence_entry(const Mesh& mesh, int i, int j, int c) {
  double total = 0.0;
  for (int e = 0; e < mesh.n_elements(); ++e) {
    total += tri_integrate(mesh, e, [&](const TriGeom& g, const std::array<double, 3>& phi) {
      int li = local_of(g, i), lj = local_of(g, j);
      if (li < 0 || lj < 0) return 0.0;
      return -phi[static_cast<size_t>(li)] * g.grad[static_cast<size_t>(lj)][static_cast<size_t>(c)];
    });
  }
  return total;
}

// int ((w . grad phi_j) phi_i) with the P1 interpolant of the velocity
// coefficients w (node-major, dim = 2). Same-component coupling only.
inline double oracle_convection_entry(const Mesh& mesh, const Vector& w, int i, int j) {
  double total = 0.0;
  for (int e = 0; e < mesh.n_elements(); ++e) {
    total += tri_integrate(mesh, e, [&](const TriGeom& g, const std::array<double, 3>& phi) {
      int li = local_of(g, i), lj = local_of(g, j);
      if (li < 0 || lj < 0) return 0.0;
      double wx = 0.0, wy = 0.0;
      for (int k = 0; k < 3; ++k) {
        int n = g.nodes[static_cast<size_t>(k)];
        wx += w[static_cast<size_t>(2 * n)] * phi[static_cast<size_t>(k)];
        wy += w[static_cast<size_t>(2 * n + 1)] * phi[static_cast<size_t>(k)];
      }
      double conv = wx * g.grad[static_cast<size_t>(lj)][0] + wy * g.grad[static_cast<size_t>(lj)][1];
      return conv * phi[static_cast<size_t>(li)];
    });
  }
  return total;
}

// int (phi_j d_{jc} w_{ic}) phi_i: reaction block of the Newton term.
inline double oracle_newton_entry(const Mesh& mesh, const Vector& w, int i, int ic, int j,
                                  int jc) {
  double total = 0.0;
  for (int e = 0; e < mesh.n_elements(); ++e) {
    total += tri_integrate(mesh, e, [&](const TriGeom& g, const std::array<double, 3>& phi) {
      int li = local_of(g, i), lj = local_of(g, j);
      if (li < 0 || lj < 0) return 0.0;
      double dw = 0.0;  // d w_{ic} / d x_{jc}, constant on the element for P1
      for (int k = 0; k < 3; ++k) {
        int n = g.nodes[static_cast<size_t>(k)];
        dw += w[static_cast<size_t>(2 * n + ic)] * g.grad[static_cast<size_t>(k)][static_cast<size_t>(jc)];
      }
      return phi[static_cast<size_t>(lj)] * dw * phi[static_cast<size_t>(li)];
    });
  }
  return total;
}

// (1/nu) sum_T int (psi_i - mean_T psi_i)(psi_j - mean_T psi_j).
inline double oracle_bd_stab_entry(const Mesh& mesh, double nu, int i, int j) {
  double total = 0.0;
  for (int e = 0; e < mesh.n_elements(); ++e) {
    TriGeom g = tri_geometry(mesh, e);
    int li = local_of(g, i), lj = local_of(g, j);
    if (li < 0 || lj < 0) continue;
    double mean_i = 1.0 / 3.0, mean_j = 1.0 / 3.0;  // int_T psi / |T| for P1
    total += tri_integrate(mesh, e, [&](const TriGeom& gg, const std::array<double, 3>& phi) {
      int ai = local_of(gg, i), aj = local_of(gg, j);
      return (phi[static_cast<size_t>(ai)] - mean_i) * (phi[static_cast<size_t>(aj)] - mean_j);
    });
  }
  return total / nu;
}

// ---------------------------------------------------------------------------
// Manufactured Stokes problem on the unit square: divergence-free velocity
// from the stream function sin^2(pi x) sin^2(pi y), pressure sin(pi x)
// cos(pi y), homogeneous velocity Dirichlet data everywhere. Solved directly
// with the constant-pressure mode pinned at one dof, which leaves the
// velocity unchanged. Returns the velocity L2 error of a P2-P1 solve.
inline std::array<double, 3> manufactured_velocity(const std::array<double, 3>& x) {
  const double pi = 3.14159265358979323846;
  double sx = std::sin(pi * x[0]), sy = std::sin(pi * x[1]);
  return {pi * sx * sx * std::sin(2.0 * pi * x[1]),
          -pi * std::sin(2.0 * pi * x[0]) * sy * sy, 0.0};
}

inline std::array<double, 3> manufactured_forcing(const std::array<double, 3>& x) {
  const double pi = 3.14159265358979323846;
  double p3 = pi * pi * pi;
  double sx = std::sin(pi * x[0]), sy = std::sin(pi * x[1]);
  double f0 = -2.0 * p3 * std::sin(2.0 * pi * x[1]) *
                  (std::cos(2.0 * pi * x[0]) - 2.0 * sx * sx) +
              pi * std::cos(pi * x[0]) * std::cos(pi * x[1]);
  double f1 = 2.0 * p3 * std::sin(2.0 * pi * x[0]) *
                  (std::cos(2.0 * pi * x[1]) - 2.0 * sy * sy) -
              pi * sx * sy;
  return {f0, f1, 0.0};
}

inline double manufactured_stokes_velocity_error(int cells) {
  using namespace solverkit;
  Mesh mesh = build_unit_square(cells, ElementKind::triangle, 2);
  DofMap dofmap = make_dofmap(mesh);
  set_dirichlet(dofmap, mesh,
                [](const std::array<double, 3>&, BoundaryTag)
                    -> std::optional<std::array<double, 3>> {
                  return std::array<double, 3>{0.0, 0.0, 0.0};
                });
  AssemblyState st;
  st.X.assign(static_cast<size_t>(dofmap.n_total()), 0.0);
  st.nu = 1.0;
  st.stabilized = false;
  st.convection = false;
  SaddleSystem sys = assemble_saddle(mesh, dofmap, st, LinearizationMode::newton);

  Vector rhs = assemble_velocity_load(mesh, dofmap, manufactured_forcing);
  for (int d : dofmap.dirichlet_dofs) rhs[static_cast<size_t>(d)] = 0.0;
  rhs.resize(static_cast<size_t>(dofmap.n_total()), 0.0);

  // Pin the constant-pressure mode by a unit penalty at the first pressure
  // dof; the solution with that dof equal to zero also solves the original
  // singular system, so the velocity is exact.
  SparseMatrix k = sys.op.monolithic();
  std::vector<Triplet> trips;
  trips.reserve(static_cast<size_t>(k.nnz()) + 1);
  for (int i = 0; i < k.rows(); ++i) {
    for (int p = k.row_offsets()[i]; p < k.row_offsets()[i + 1]; ++p) {
      trips.push_back({i, k.col_indices()[p], k.values()[p], 0});
    }
  }
  trips.push_back({dofmap.n_velocity(), dofmap.n_velocity(), 1.0, 1});
  SparseMatrix pinned = SparseMatrix::from_triplets(k.rows(), k.cols(), std::move(trips));
  Factorization lu(pinned, "pinned saddle");
  Vector x = lu.solve(rhs);
  return velocity_l2_error(mesh, dofmap, x, manufactured_velocity);
}

inline std::string read_file(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) return {};
  std::string out;
  char buf[4096];
  size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof(buf), f)) > 0) out.append(buf, n);
  std::fclose(f);
  return out;
}

inline void write_file(const std::string& path, const std::string& content) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) return;
  std::fwrite(content.data(), 1, content.size(), f);
  std::fclose(f);
}

}  // namespace testsup

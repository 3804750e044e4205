#include "solverkit/fe_assembly.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <stdexcept>

#include "solverkit/exec_mode.hpp"

namespace solverkit {

namespace {

struct BasisTable {
  int n = 0;
  std::vector<std::array<double, 3>> pts;
  std::vector<double> wts;
  std::vector<std::vector<double>> N;                  // [qp][i]
  std::vector<std::vector<std::array<double, 3>>> dN;  // [qp][i][d]
};

// 1D Lagrange basis on [0,1] with nodes {0,1} (order 1) or {0,1/2,1} (order 2).
void lagrange1d(int order, double t, double* val, double* der) {
  if (order == 1) {
    val[0] = 1.0 - t;
    val[1] = t;
    der[0] = -1.0;
    der[1] = 1.0;
  } else {
    val[0] = 2.0 * t * t - 3.0 * t + 1.0;
    val[1] = 4.0 * t - 4.0 * t * t;
    val[2] = 2.0 * t * t - t;
    der[0] = 4.0 * t - 3.0;
    der[1] = 4.0 - 8.0 * t;
    der[2] = 4.0 * t - 1.0;
  }
}

std::vector<std::pair<double, double>> gauss01(int n) {
  if (n == 2) {
    const double d = 0.5 / std::sqrt(3.0);
    return {{0.5 - d, 0.5}, {0.5 + d, 0.5}};
  }
  if (n == 3) {
    const double d = 0.5 * std::sqrt(0.6);
    return {{0.5 - d, 5.0 / 18.0}, {0.5, 4.0 / 9.0}, {0.5 + d, 5.0 / 18.0}};
  }
  throw std::logic_error("unsupported gauss rule");
}

// Degree-5 rule on the reference triangle (0,0),(1,0),(0,1).
std::vector<std::pair<std::array<double, 2>, double>> triangle_rule() {
  const double b1 = 0.47014206410511508;
  const double a1 = 1.0 - 2.0 * b1;
  const double w1 = 0.13239415278850618;
  const double b2 = 0.10128650732345634;
  const double a2 = 1.0 - 2.0 * b2;
  const double w2 = 0.12593918054482716;
  std::vector<std::pair<std::array<double, 2>, double>> r;
  r.push_back({{1.0 / 3.0, 1.0 / 3.0}, 0.225});
  // Barycentric permutations of (a, b, b); the point is (lambda1, lambda2).
  r.push_back({{b1, b1}, w1});
  r.push_back({{a1, b1}, w1});
  r.push_back({{b1, a1}, w1});
  r.push_back({{b2, b2}, w2});
  r.push_back({{a2, b2}, w2});
  r.push_back({{b2, a2}, w2});
  for (auto& p : r) p.second *= 0.5;  // reference triangle area
  return r;
}

void eval_triangle(int order, double xi, double eta, std::vector<double>& N,
                   std::vector<std::array<double, 3>>& dN) {
  const double l0 = 1.0 - xi - eta, l1 = xi, l2 = eta;
  const std::array<double, 3> g0{-1.0, -1.0, 0.0}, g1{1.0, 0.0, 0.0}, g2{0.0, 1.0, 0.0};
  if (order == 1) {
    N = {l0, l1, l2};
    dN = {g0, g1, g2};
    return;
  }
  N.resize(6);
  dN.assign(6, {0.0, 0.0, 0.0});
  const std::array<double, 3> l{l0, l1, l2};
  const std::array<std::array<double, 3>, 3> g{g0, g1, g2};
  for (int v = 0; v < 3; ++v) {
    N[v] = l[v] * (2.0 * l[v] - 1.0);
    for (int d = 0; d < 2; ++d) dN[v][d] = (4.0 * l[v] - 1.0) * g[v][d];
  }
  const int pairs[3][2] = {{0, 1}, {1, 2}, {2, 0}};
  for (int m = 0; m < 3; ++m) {
    const int a = pairs[m][0], b = pairs[m][1];
    N[3 + m] = 4.0 * l[a] * l[b];
    for (int d = 0; d < 2; ++d) dN[3 + m][d] = 4.0 * (l[a] * g[b][d] + l[b] * g[a][d]);
  }
}

void eval_tensor(int dim, int order, const std::array<double, 3>& xi,
                 std::vector<double>& N, std::vector<std::array<double, 3>>& dN) {
  const int w = order + 1;
  double v[3][3], d[3][3];
  for (int ax = 0; ax < dim; ++ax) lagrange1d(order, xi[ax], v[ax], d[ax]);
  const int n = (dim == 2) ? w * w : w * w * w;
  N.resize(n);
  dN.assign(n, {0.0, 0.0, 0.0});
  for (int k = 0; k < (dim == 3 ? w : 1); ++k) {
    for (int j = 0; j < w; ++j) {
      for (int i = 0; i < w; ++i) {
        const int idx = (dim == 3) ? (k * w + j) * w + i : j * w + i;
        const double vz = (dim == 3) ? v[2][k] : 1.0;
        N[idx] = v[0][i] * v[1][j] * vz;
        dN[idx][0] = d[0][i] * v[1][j] * vz;
        dN[idx][1] = v[0][i] * d[1][j] * vz;
        if (dim == 3) dN[idx][2] = v[0][i] * v[1][j] * d[2][k];
      }
    }
  }
}

BasisTable make_table(ElementKind kind, int order, int basis_order) {
  BasisTable t;
  if (kind == ElementKind::triangle) {
    for (const auto& [p, w] : triangle_rule()) {
      t.pts.push_back({p[0], p[1], 0.0});
      t.wts.push_back(w);
    }
  } else {
    const int dim = (kind == ElementKind::hexahedron) ? 3 : 2;
    const auto g = gauss01(order + 1);
    if (dim == 2) {
      for (const auto& [y, wy] : g) {
        for (const auto& [x, wx] : g) {
          t.pts.push_back({x, y, 0.0});
          t.wts.push_back(wx * wy);
        }
      }
    } else {
      for (const auto& [z, wz] : g) {
        for (const auto& [y, wy] : g) {
          for (const auto& [x, wx] : g) {
            t.pts.push_back({x, y, z});
            t.wts.push_back(wx * wy * wz);
          }
        }
      }
    }
  }
  const int dim = (kind == ElementKind::hexahedron) ? 3 : 2;
  t.N.resize(t.pts.size());
  t.dN.resize(t.pts.size());
  for (std::size_t q = 0; q < t.pts.size(); ++q) {
    if (kind == ElementKind::triangle) {
      eval_triangle(basis_order, t.pts[q][0], t.pts[q][1], t.N[q], t.dN[q]);
    } else {
      eval_tensor(dim, basis_order, t.pts[q], t.N[q], t.dN[q]);
    }
  }
  t.n = static_cast<int>(t.N[0].size());
  return t;
}

struct TablePair {
  BasisTable velocity;  // element order basis at the element rule
  BasisTable pressure;  // order-1 corner basis at the same points
};

const TablePair& tables_for(ElementKind kind, int order) {
  static const auto* cache = [] {
    auto* m = new std::array<TablePair, 6>();
    auto idx = [](ElementKind k, int o) {
      return static_cast<int>(k) * 2 + (o - 1);
    };
    for (ElementKind k : {ElementKind::triangle, ElementKind::quadrilateral,
                          ElementKind::hexahedron}) {
      for (int o : {1, 2}) {
        TablePair tp;
        tp.velocity = make_table(k, o, o);
        tp.pressure = make_table(k, o, 1);
        if (k != ElementKind::triangle && o == 2) {
          // Corner basis must be sampled at the order-2 rule: rebuild the
          // pressure table with order-2 points but order-1 basis.
          BasisTable p;
          p.pts = tp.velocity.pts;
          p.wts = tp.velocity.wts;
          p.N.resize(p.pts.size());
          p.dN.resize(p.pts.size());
          const int dim = (k == ElementKind::hexahedron) ? 3 : 2;
          for (std::size_t q = 0; q < p.pts.size(); ++q) {
            eval_tensor(dim, 1, p.pts[q], p.N[q], p.dN[q]);
          }
          p.n = static_cast<int>(p.N[0].size());
          tp.pressure = p;
        }
        (*m)[idx(k, o)] = std::move(tp);
      }
    }
    return m;
  }();
  return (*cache)[static_cast<int>(kind) * 2 + (order - 1)];
}

struct Mapped {
  std::vector<double> jxw;
  std::vector<std::vector<std::array<double, 3>>> gv;  // velocity physical grads
  std::vector<std::vector<std::array<double, 3>>> gp;  // pressure physical grads
};

void invert_jacobian(int dim, const double J[3][3], double inv[3][3], double* det) {
  if (dim == 2) {
    *det = J[0][0] * J[1][1] - J[0][1] * J[1][0];
    const double id = 1.0 / *det;
    inv[0][0] = J[1][1] * id;
    inv[0][1] = -J[0][1] * id;
    inv[1][0] = -J[1][0] * id;
    inv[1][1] = J[0][0] * id;
  } else {
    const double a = J[0][0], b = J[0][1], c = J[0][2];
    const double d = J[1][0], e = J[1][1], f = J[1][2];
    const double g = J[2][0], h = J[2][1], i = J[2][2];
    const double A = e * i - f * h, B = -(d * i - f * g), C = d * h - e * g;
    *det = a * A + b * B + c * C;
    const double id = 1.0 / *det;
    inv[0][0] = A * id;
    inv[0][1] = -(b * i - c * h) * id;
    inv[0][2] = (b * f - c * e) * id;
    inv[1][0] = B * id;
    inv[1][1] = (a * i - c * g) * id;
    inv[1][2] = -(a * f - c * d) * id;
    inv[2][0] = C * id;
    inv[2][1] = -(a * h - b * g) * id;
    inv[2][2] = (a * e - b * d) * id;
  }
}

void map_element(const Mesh& mesh, int e, const TablePair& tp, Mapped& out) {
  const auto& vt = tp.velocity;
  const auto& pt = tp.pressure;
  const int dim = mesh.dim;
  const std::size_t nq = vt.pts.size();
  out.jxw.resize(nq);
  out.gv.assign(nq, std::vector<std::array<double, 3>>(vt.n, {0, 0, 0}));
  out.gp.assign(nq, std::vector<std::array<double, 3>>(pt.n, {0, 0, 0}));
  for (std::size_t q = 0; q < nq; ++q) {
    double J[3][3] = {{0}}, inv[3][3] = {{0}};
    for (int i = 0; i < vt.n; ++i) {
      const auto& x = mesh.nodes[mesh.elements[e][i]];
      for (int r = 0; r < dim; ++r) {
        for (int c = 0; c < dim; ++c) J[r][c] += x[r] * vt.dN[q][i][c];
      }
    }
    double det = 0.0;
    invert_jacobian(dim, J, inv, &det);
    out.jxw[q] = std::abs(det) * vt.wts[q];
    for (int i = 0; i < vt.n; ++i) {
      for (int d = 0; d < dim; ++d) {
        double s = 0.0;
        for (int k = 0; k < dim; ++k) s += vt.dN[q][i][k] * inv[k][d];
        out.gv[q][i][d] = s;
      }
    }
    for (int i = 0; i < pt.n; ++i) {
      for (int d = 0; d < dim; ++d) {
        double s = 0.0;
        for (int k = 0; k < dim; ++k) s += pt.dN[q][i][k] * inv[k][d];
        out.gp[q][i][d] = s;
      }
    }
  }
}

// Runs `kernel(e, mapped, triplet_slice)` over all elements; each element owns
// a fixed-size slice so parallel execution is bit-identical to serial.
template <class Kernel>
std::vector<Triplet> assemble_elements(const Mesh& mesh, int chunk, Kernel kernel) {
  const auto& tp = tables_for(mesh.kind, mesh.order);
  std::vector<Triplet> t(static_cast<std::size_t>(mesh.n_elements()) * chunk);
  const int ne = mesh.n_elements();
#pragma omp parallel if (!exec::serial())
  {
    Mapped mapped;
#pragma omp for schedule(static)
    for (int e = 0; e < ne; ++e) {
      map_element(mesh, e, tp, mapped);
      kernel(e, mapped, &t[static_cast<std::size_t>(e) * chunk]);
    }
  }
  return t;
}

int pressure_dof_of_corner(const Mesh& mesh, const DofMap& dofmap, int e, int corner_slot) {
  const auto corners = mesh.corner_local_indices();
  const int node = mesh.elements[e][corners[corner_slot]];
  const int p = dofmap.pressure_index[node];
  assert(p >= 0);
  return p;
}

// Velocity value at a quad point from coefficients.
std::array<double, 3> velocity_at(const Mesh& mesh, const DofMap& dofmap, const Vector& w,
                                  const BasisTable& vt, int e, int q) {
  std::array<double, 3> u{0, 0, 0};
  for (int i = 0; i < vt.n; ++i) {
    const int node = mesh.elements[e][i];
    for (int c = 0; c < mesh.dim; ++c) {
      u[c] += vt.N[q][i] * w[dofmap.vdof(node, c)];
    }
  }
  return u;
}

}  // namespace

DofMap make_dofmap(const Mesh& mesh) {
  DofMap d;
  d.dim = mesh.dim;
  d.order = mesh.order;
  d.n_nodes = mesh.n_nodes();
  d.pressure_index.assign(mesh.nodes.size(), -1);
  const auto corners = mesh.corner_local_indices();
  for (const auto& elem : mesh.elements) {
    for (int l : corners) d.pressure_index[elem[l]] = 0;
  }
  for (int n = 0; n < mesh.n_nodes(); ++n) {
    if (d.pressure_index[n] == 0) {
      d.pressure_index[n] = static_cast<int>(d.pressure_node.size());
      d.pressure_node.push_back(n);
    } else {
      d.pressure_index[n] = -1;
    }
  }
  return d;
}

void set_dirichlet(DofMap& dofmap, const Mesh& mesh, const DirichletFn& fn) {
  dofmap.dirichlet_dofs.clear();
  dofmap.dirichlet_values.clear();
  for (int n = 0; n < mesh.n_nodes(); ++n) {
    if (mesh.node_tags[n] == BoundaryTag::none) continue;
    const auto v = fn(mesh.nodes[n], mesh.node_tags[n]);
    if (!v) continue;
    for (int c = 0; c < mesh.dim; ++c) {
      dofmap.dirichlet_dofs.push_back(dofmap.vdof(n, c));
      dofmap.dirichlet_values.push_back((*v)[c]);
    }
  }
  // vdof is monotone in node for fixed component ordering; sort jointly.
  std::vector<std::size_t> perm(dofmap.dirichlet_dofs.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
    return dofmap.dirichlet_dofs[a] < dofmap.dirichlet_dofs[b];
  });
  std::vector<int> dofs(perm.size());
  std::vector<double> vals(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    dofs[i] = dofmap.dirichlet_dofs[perm[i]];
    vals[i] = dofmap.dirichlet_values[perm[i]];
  }
  dofmap.dirichlet_dofs = std::move(dofs);
  dofmap.dirichlet_values = std::move(vals);
}

void apply_dirichlet_values(const DofMap& dofmap, Vector& x) {
  for (std::size_t i = 0; i < dofmap.dirichlet_dofs.size(); ++i) {
    x[dofmap.dirichlet_dofs[i]] = dofmap.dirichlet_values[i];
  }
}

SparseMatrix assemble_viscous(const Mesh& mesh, const DofMap& dofmap) {
  const auto& tp = tables_for(mesh.kind, mesh.order);
  const int nv = tp.velocity.n;
  const int dim = mesh.dim;
  const int chunk = nv * nv * dim;
  auto t = assemble_elements(mesh, chunk, [&](int e, const Mapped& m, Triplet* out) {
    int k = 0;
    for (int i = 0; i < nv; ++i) {
      for (int j = 0; j < nv; ++j) {
        double s = 0.0;
        for (std::size_t q = 0; q < m.jxw.size(); ++q) {
          double g = 0.0;
          for (int d = 0; d < dim; ++d) g += m.gv[q][i][d] * m.gv[q][j][d];
          s += g * m.jxw[q];
        }
        for (int c = 0; c < dim; ++c) {
          out[k++] = {dofmap.vdof(mesh.elements[e][i], c),
                      dofmap.vdof(mesh.elements[e][j], c), s, e};
        }
      }
    }
  });
  return SparseMatrix::from_triplets(dofmap.n_velocity(), dofmap.n_velocity(),
                                     std::move(t));
}

SparseMatrix assemble_mass(const Mesh& mesh, const DofMap& dofmap, Field field) {
  const auto& tp = tables_for(mesh.kind, mesh.order);
  if (field == Field::velocity) {
    const int nv = tp.velocity.n;
    const int dim = mesh.dim;
    const int chunk = nv * nv * dim;
    auto t = assemble_elements(mesh, chunk, [&](int e, const Mapped& m, Triplet* out) {
      int k = 0;
      for (int i = 0; i < nv; ++i) {
        for (int j = 0; j < nv; ++j) {
          double s = 0.0;
          for (std::size_t q = 0; q < m.jxw.size(); ++q) {
            s += tp.velocity.N[q][i] * tp.velocity.N[q][j] * m.jxw[q];
          }
          for (int c = 0; c < dim; ++c) {
            out[k++] = {dofmap.vdof(mesh.elements[e][i], c),
                        dofmap.vdof(mesh.elements[e][j], c), s, e};
          }
        }
      }
    });
    return SparseMatrix::from_triplets(dofmap.n_velocity(), dofmap.n_velocity(),
                                       std::move(t));
  }
  const int np = tp.pressure.n;
  const int chunk = np * np;
  auto t = assemble_elements(mesh, chunk, [&](int e, const Mapped& m, Triplet* out) {
    int k = 0;
    for (int i = 0; i < np; ++i) {
      for (int j = 0; j < np; ++j) {
        double s = 0.0;
        for (std::size_t q = 0; q < m.jxw.size(); ++q) {
          s += tp.pressure.N[q][i] * tp.pressure.N[q][j] * m.jxw[q];
        }
        out[k++] = {pressure_dof_of_corner(mesh, dofmap, e, i),
                    pressure_dof_of_corner(mesh, dofmap, e, j), s, e};
      }
    }
  });
  return SparseMatrix::from_triplets(dofmap.n_pressure(), dofmap.n_pressure(),
                                     std::move(t));
}

SparseMatrix assemble_divergence(const Mesh& mesh, const DofMap& dofmap) {
  const auto& tp = tables_for(mesh.kind, mesh.order);
  const int nv = tp.velocity.n;
  const int np = tp.pressure.n;
  const int dim = mesh.dim;
  const int chunk = np * nv * dim;
  auto t = assemble_elements(mesh, chunk, [&](int e, const Mapped& m, Triplet* out) {
    int k = 0;
    for (int i = 0; i < np; ++i) {
      for (int j = 0; j < nv; ++j) {
        for (int d = 0; d < dim; ++d) {
          double s = 0.0;
          for (std::size_t q = 0; q < m.jxw.size(); ++q) {
            s -= tp.pressure.N[q][i] * m.gv[q][j][d] * m.jxw[q];
          }
          out[k++] = {pressure_dof_of_corner(mesh, dofmap, e, i),
                      dofmap.vdof(mesh.elements[e][j], d), s, e};
        }
      }
    }
  });
  return SparseMatrix::from_triplets(dofmap.n_pressure(), dofmap.n_velocity(),
                                     std::move(t));
}

SparseMatrix assemble_convection(const Mesh& mesh, const DofMap& dofmap, const Vector& w) {
  assert(static_cast<int>(w.size()) >= dofmap.n_velocity());
  const auto& tp = tables_for(mesh.kind, mesh.order);
  const int nv = tp.velocity.n;
  const int dim = mesh.dim;
  const int chunk = nv * nv * dim;
  auto t = assemble_elements(mesh, chunk, [&](int e, const Mapped& m, Triplet* out) {
    int k = 0;
    std::vector<std::array<double, 3>> wq(m.jxw.size());
    for (std::size_t q = 0; q < m.jxw.size(); ++q) {
      wq[q] = velocity_at(mesh, dofmap, w, tp.velocity, e, static_cast<int>(q));
    }
    for (int i = 0; i < nv; ++i) {
      for (int j = 0; j < nv; ++j) {
        double s = 0.0;
        for (std::size_t q = 0; q < m.jxw.size(); ++q) {
          double adv = 0.0;
          for (int d = 0; d < dim; ++d) adv += wq[q][d] * m.gv[q][j][d];
          s += adv * tp.velocity.N[q][i] * m.jxw[q];
        }
        for (int c = 0; c < dim; ++c) {
          out[k++] = {dofmap.vdof(mesh.elements[e][i], c),
                      dofmap.vdof(mesh.elements[e][j], c), s, e};
        }
      }
    }
  });
  return SparseMatrix::from_triplets(dofmap.n_velocity(), dofmap.n_velocity(),
                                     std::move(t));
}

SparseMatrix assemble_newton_term(const Mesh& mesh, const DofMap& dofmap, const Vector& w) {
  assert(static_cast<int>(w.size()) >= dofmap.n_velocity());
  const auto& tp = tables_for(mesh.kind, mesh.order);
  const int nv = tp.velocity.n;
  const int dim = mesh.dim;
  const int chunk = nv * nv * dim * dim;
  auto t = assemble_elements(mesh, chunk, [&](int e, const Mapped& m, Triplet* out) {
    // grad w at each quad point: gw[c][d] = d w_c / d x_d.
    std::vector<std::array<std::array<double, 3>, 3>> gw(m.jxw.size());
    for (std::size_t q = 0; q < m.jxw.size(); ++q) {
      for (int c = 0; c < dim; ++c) {
        for (int d = 0; d < dim; ++d) {
          double s = 0.0;
          for (int i = 0; i < nv; ++i) {
            s += m.gv[q][i][d] * w[dofmap.vdof(mesh.elements[e][i], c)];
          }
          gw[q][c][d] = s;
        }
      }
    }
    int k = 0;
    for (int i = 0; i < nv; ++i) {
      for (int j = 0; j < nv; ++j) {
        std::array<std::array<double, 3>, 3> acc{};
        for (int c = 0; c < dim; ++c) acc[c] = {0.0, 0.0, 0.0};
        for (std::size_t q = 0; q < m.jxw.size(); ++q) {
          const double nn = tp.velocity.N[q][i] * tp.velocity.N[q][j] * m.jxw[q];
          for (int c = 0; c < dim; ++c) {
            for (int d = 0; d < dim; ++d) acc[c][d] += nn * gw[q][c][d];
          }
        }
        for (int c = 0; c < dim; ++c) {
          for (int d = 0; d < dim; ++d) {
            out[k++] = {dofmap.vdof(mesh.elements[e][i], c),
                        dofmap.vdof(mesh.elements[e][j], d), acc[c][d], e};
          }
        }
      }
    }
  });
  return SparseMatrix::from_triplets(dofmap.n_velocity(), dofmap.n_velocity(),
                                     std::move(t));
}

SparseMatrix assemble_bd_stabilization(const Mesh& mesh, const DofMap& dofmap, double nu) {
  const auto& tp = tables_for(mesh.kind, mesh.order);
  const int np = tp.pressure.n;
  const int chunk = np * np;
  auto t = assemble_elements(mesh, chunk, [&](int e, const Mapped& m, Triplet* out) {
    std::vector<double> mvec(np, 0.0);
    double area = 0.0;
    std::vector<double> mass(static_cast<std::size_t>(np) * np, 0.0);
    for (std::size_t q = 0; q < m.jxw.size(); ++q) {
      area += m.jxw[q];
      for (int i = 0; i < np; ++i) {
        mvec[i] += tp.pressure.N[q][i] * m.jxw[q];
        for (int j = 0; j < np; ++j) {
          mass[i * np + j] += tp.pressure.N[q][i] * tp.pressure.N[q][j] * m.jxw[q];
        }
      }
    }
    int k = 0;
    for (int i = 0; i < np; ++i) {
      for (int j = 0; j < np; ++j) {
        const double v = (mass[i * np + j] - mvec[i] * mvec[j] / area) / nu;
        out[k++] = {pressure_dof_of_corner(mesh, dofmap, e, i),
                    pressure_dof_of_corner(mesh, dofmap, e, j), v, e};
      }
    }
  });
  return SparseMatrix::from_triplets(dofmap.n_pressure(), dofmap.n_pressure(),
                                     std::move(t));
}

namespace {

std::vector<int> outflow_pressure_rows(const Mesh& mesh, const DofMap& dofmap) {
  std::vector<int> rows;
  for (int p = 0; p < dofmap.n_pressure(); ++p) {
    if (mesh.node_tags[dofmap.pressure_node[p]] == BoundaryTag::outflow) {
      rows.push_back(p);
    }
  }
  return rows;
}

// Facet basis values at facet quadrature points, in facet node order
// (corners first). Returns {velocity basis, pressure basis, points, weights}.
struct FacetTables {
  std::vector<std::array<double, 2>> pts;
  std::vector<double> wts;
  std::vector<std::vector<double>> Nv;
  std::vector<std::vector<double>> Np;
};

FacetTables facet_tables(const Mesh& mesh) {
  FacetTables ft;
  const bool face3d = (mesh.dim == 3);
  const auto g = gauss01(3);
  if (!face3d) {
    for (const auto& [x, w] : g) {
      ft.pts.push_back({x, 0.0});
      ft.wts.push_back(w);
    }
  } else {
    for (const auto& [y, wy] : g) {
      for (const auto& [x, wx] : g) {
        ft.pts.push_back({x, y});
        ft.wts.push_back(wx * wy);
      }
    }
  }
  for (std::size_t q = 0; q < ft.pts.size(); ++q) {
    std::vector<double> Nv, Np;
    if (!face3d) {
      double v[3], d[3];
      lagrange1d(mesh.order, ft.pts[q][0], v, d);
      if (mesh.order == 1) {
        Nv = {v[0], v[1]};
      } else {
        Nv = {v[0], v[2], v[1]};  // corners first, then midside
      }
      double v1[2], d1[2];
      lagrange1d(1, ft.pts[q][0], v1, d1);
      Np = {v1[0], v1[1]};
    } else {
      std::vector<double> tensor;
      std::vector<std::array<double, 3>> dummy;
      eval_tensor(2, mesh.order, {ft.pts[q][0], ft.pts[q][1], 0.0}, tensor, dummy);
      if (mesh.order == 1) {
        Nv = tensor;
      } else {
        const int reorder[9] = {0, 2, 6, 8, 1, 3, 5, 7, 4};
        Nv.resize(9);
        for (int i = 0; i < 9; ++i) Nv[i] = tensor[reorder[i]];
      }
      std::vector<double> lin;
      eval_tensor(2, 1, {ft.pts[q][0], ft.pts[q][1], 0.0}, lin, dummy);
      Np = lin;
    }
    ft.Nv.push_back(std::move(Nv));
    ft.Np.push_back(std::move(Np));
  }
  return ft;
}

// Appends the (w . n)-weighted boundary mass of the inlet facets.
void append_robin(const Mesh& mesh, const DofMap& dofmap, const Vector& w,
                  std::vector<Triplet>& t) {
  const auto ft = facet_tables(mesh);
  const int dim = mesh.dim;
  for (std::size_t fi = 0; fi < mesh.facets.size(); ++fi) {
    const auto& facet = mesh.facets[fi];
    if (facet.tag != BoundaryTag::inflow) continue;
    const auto bary = mesh.element_barycenter(facet.element);
    const int nfn = static_cast<int>(facet.nodes.size());
    const int npn = facet.n_corners;
    for (std::size_t q = 0; q < ft.pts.size(); ++q) {
      // Facet geometry from the facet's own nodes (affine here).
      std::array<double, 3> xq{0, 0, 0};
      std::array<double, 3> ta{0, 0, 0}, tb{0, 0, 0};
      for (int i = 0; i < nfn; ++i) {
        const auto& xn = mesh.nodes[facet.nodes[i]];
        for (int d = 0; d < dim; ++d) xq[d] += ft.Nv[q][i] * xn[d];
      }
      if (dim == 2) {
        const auto& a = mesh.nodes[facet.nodes[0]];
        const auto& b = mesh.nodes[facet.nodes[1]];
        ta = {b[0] - a[0], b[1] - a[1], 0.0};
      } else {
        const auto& c0 = mesh.nodes[facet.nodes[0]];
        const auto& c1 = mesh.nodes[facet.nodes[1]];
        const auto& c2 = mesh.nodes[facet.nodes[2]];
        ta = {c1[0] - c0[0], c1[1] - c0[1], c1[2] - c0[2]};
        tb = {c2[0] - c0[0], c2[1] - c0[1], c2[2] - c0[2]};
      }
      std::array<double, 3> n{0, 0, 0};
      double ds = 0.0;
      if (dim == 2) {
        n = {ta[1], -ta[0], 0.0};
        ds = std::hypot(ta[0], ta[1]);
      } else {
        n = {ta[1] * tb[2] - ta[2] * tb[1], ta[2] * tb[0] - ta[0] * tb[2],
             ta[0] * tb[1] - ta[1] * tb[0]};
        ds = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
      }
      double nn = 0.0;
      for (int d = 0; d < dim; ++d) nn += n[d] * n[d];
      const double inv = 1.0 / std::sqrt(nn);
      double orient = 0.0;
      for (int d = 0; d < dim; ++d) orient += n[d] * (xq[d] - bary[d]);
      const double sign = (orient >= 0.0) ? 1.0 : -1.0;
      std::array<double, 3> wq{0, 0, 0};
      for (int i = 0; i < nfn; ++i) {
        for (int c = 0; c < dim; ++c) {
          wq[c] += ft.Nv[q][i] * w[dofmap.vdof(facet.nodes[i], c)];
        }
      }
      double wn = 0.0;
      for (int d = 0; d < dim; ++d) wn += wq[d] * n[d] * inv * sign;
      const double scale = wn * ds * ft.wts[q];
      for (int i = 0; i < npn; ++i) {
        const int pi = dofmap.pressure_index[facet.nodes[i]];
        for (int j = 0; j < npn; ++j) {
          const int pj = dofmap.pressure_index[facet.nodes[j]];
          t.push_back({pi, pj, scale * ft.Np[q][i] * ft.Np[q][j],
                       mesh.n_elements() + static_cast<int>(fi)});
        }
      }
    }
  }
}

std::vector<Triplet> pressure_laplacian_triplets(const Mesh& mesh, const DofMap& dofmap) {
  const auto& tp = tables_for(mesh.kind, mesh.order);
  const int np = tp.pressure.n;
  const int dim = mesh.dim;
  const int chunk = np * np;
  return assemble_elements(mesh, chunk, [&](int e, const Mapped& m, Triplet* out) {
    int k = 0;
    for (int i = 0; i < np; ++i) {
      for (int j = 0; j < np; ++j) {
        double s = 0.0;
        for (std::size_t q = 0; q < m.jxw.size(); ++q) {
          double g = 0.0;
          for (int d = 0; d < dim; ++d) g += m.gp[q][i][d] * m.gp[q][j][d];
          s += g * m.jxw[q];
        }
        out[k++] = {pressure_dof_of_corner(mesh, dofmap, e, i),
                    pressure_dof_of_corner(mesh, dofmap, e, j), s, e};
      }
    }
  });
}

}  // namespace

SparseMatrix assemble_pressure_laplacian(const Mesh& mesh, const DofMap& dofmap,
                                         BcStrategy bc) {
  (void)bc;  // all strategies use Dirichlet rows at the outlet
  auto t = pressure_laplacian_triplets(mesh, dofmap);
  auto m = SparseMatrix::from_triplets(dofmap.n_pressure(), dofmap.n_pressure(),
                                       std::move(t));
  zero_rows_keep_diagonal(m, outflow_pressure_rows(mesh, dofmap));
  return m;
}

SparseMatrix assemble_pressure_convdiff(const Mesh& mesh, const DofMap& dofmap,
                                        const Vector& w, double nu,
                                        std::optional<double> mass_coeff, BcStrategy bc) {
  if (mass_coeff && *mass_coeff <= 0.0) {
    throw std::invalid_argument("pressure convection-diffusion: time coefficient <= 0");
  }
  const auto& tp = tables_for(mesh.kind, mesh.order);
  const int np = tp.pressure.n;
  const int dim = mesh.dim;
  const double mc = mass_coeff.value_or(0.0);
  const int chunk = np * np;
  auto t = assemble_elements(mesh, chunk, [&](int e, const Mapped& m, Triplet* out) {
    std::vector<std::array<double, 3>> wq(m.jxw.size());
    for (std::size_t q = 0; q < m.jxw.size(); ++q) {
      wq[q] = velocity_at(mesh, dofmap, w, tp.velocity, e, static_cast<int>(q));
    }
    int k = 0;
    for (int i = 0; i < np; ++i) {
      for (int j = 0; j < np; ++j) {
        double s = 0.0;
        for (std::size_t q = 0; q < m.jxw.size(); ++q) {
          double diff = 0.0;
          for (int d = 0; d < dim; ++d) diff += m.gp[q][i][d] * m.gp[q][j][d];
          double adv = 0.0;
          for (int d = 0; d < dim; ++d) adv += wq[q][d] * m.gp[q][j][d];
          s += (nu * diff + adv * tp.pressure.N[q][i] +
                mc * tp.pressure.N[q][i] * tp.pressure.N[q][j]) *
               m.jxw[q];
        }
        out[k++] = {pressure_dof_of_corner(mesh, dofmap, e, i),
                    pressure_dof_of_corner(mesh, dofmap, e, j), s, e};
      }
    }
  });
  if (bc == BcStrategy::bc2 || bc == BcStrategy::bc3) {
    append_robin(mesh, dofmap, w, t);
  }
  auto m = SparseMatrix::from_triplets(dofmap.n_pressure(), dofmap.n_pressure(),
                                       std::move(t));
  if (bc == BcStrategy::bc1 || bc == BcStrategy::bc2) {
    zero_rows_keep_diagonal(m, outflow_pressure_rows(mesh, dofmap));
  }
  return m;
}

SaddleSystem assemble_saddle(const Mesh& mesh, const DofMap& dofmap,
                             const AssemblyState& state, LinearizationMode mode) {
  assert(static_cast<int>(state.X.size()) == dofmap.n_total());
  const Vector u(state.X.begin(), state.X.begin() + dofmap.n_velocity());
  const Vector p(state.X.begin() + dofmap.n_velocity(), state.X.end());

  double mass_coeff = 0.0;
  Vector history;
  SparseMatrix M;
  if (mode == LinearizationMode::transient_newton) {
    if (!state.dt || *state.dt <= 0.0) {
      throw std::invalid_argument("transient assembly requires dt > 0");
    }
    if (state.u_prev == nullptr) {
      throw std::invalid_argument("transient assembly requires the previous step");
    }
    M = assemble_mass(mesh, dofmap, Field::velocity);
    const double dt = *state.dt;
    if (state.u_prev2 != nullptr) {
      mass_coeff = 1.5 / dt;
      history = spmv(M, *state.u_prev);
      for (double& v : history) v *= -2.0 / dt;
      Vector h2 = spmv(M, *state.u_prev2);
      axpy(0.5 / dt, h2, history);
    } else {
      mass_coeff = 1.0 / dt;
      history = spmv(M, *state.u_prev);
      for (double& v : history) v *= -1.0 / dt;
    }
  }

  SparseMatrix A = assemble_viscous(mesh, dofmap);
  SparseMatrix N = state.convection
                       ? assemble_convection(mesh, dofmap, u)
                       : SparseMatrix::zero(dofmap.n_velocity(), dofmap.n_velocity());
  SparseMatrix B = assemble_divergence(mesh, dofmap);
  SparseMatrix Bt = transpose(B);

  SaddleSystem sys;
  sys.op.B = B;
  sys.op.Bt = Bt;
  sys.op.C = state.stabilized ? assemble_bd_stabilization(mesh, dofmap, state.nu)
                              : SparseMatrix::zero(dofmap.n_pressure(), dofmap.n_pressure());

  // Residual before elimination.
  Vector ru = spmv(A, u);
  for (double& v : ru) v *= state.nu;
  if (state.convection) axpy(1.0, spmv(N, u), ru);
  axpy(1.0, spmv(Bt, p), ru);
  if (mass_coeff != 0.0) {
    Vector mu = spmv(M, u);
    axpy(mass_coeff, mu, ru);
    axpy(1.0, history, ru);
  }
  Vector rp = spmv(B, u);
  if (sys.op.C.nnz() > 0) axpy(-1.0, spmv(sys.op.C, p), rp);

  // F block per mode.
  SparseMatrix F = add(state.nu, A, 1.0, N);
  if (state.convection && mode != LinearizationMode::picard) {
    F = add(1.0, F, 1.0, assemble_newton_term(mesh, dofmap, u));
  }
  if (mass_coeff != 0.0) F = add(1.0, F, mass_coeff, M);
  sys.op.F = std::move(F);

  // Dirichlet rows: unit diagonal in F, zero rows in Bt, residual equals
  // current minus prescribed there.
  zero_rows_keep_diagonal(sys.op.F, dofmap.dirichlet_dofs);
  zero_rows(sys.op.Bt, dofmap.dirichlet_dofs);
  for (std::size_t i = 0; i < dofmap.dirichlet_dofs.size(); ++i) {
    const int dof = dofmap.dirichlet_dofs[i];
    ru[dof] = state.X[dof] - dofmap.dirichlet_values[i];
  }

  sys.residual = SaddleOperator::stack(ru, rp);
  return sys;
}

Vector assemble_velocity_load(
    const Mesh& mesh, const DofMap& dofmap,
    const std::function<std::array<double, 3>(const std::array<double, 3>&)>& f) {
  const auto& tp = tables_for(mesh.kind, mesh.order);
  const int nv = tp.velocity.n;
  const int dim = mesh.dim;
  Vector load(static_cast<std::size_t>(dofmap.n_velocity()), 0.0);
  Mapped m;
  for (int e = 0; e < mesh.n_elements(); ++e) {
    map_element(mesh, e, tp, m);
    for (std::size_t q = 0; q < m.jxw.size(); ++q) {
      std::array<double, 3> xq{0, 0, 0};
      for (int i = 0; i < nv; ++i) {
        const auto& xn = mesh.nodes[mesh.elements[e][i]];
        for (int d = 0; d < dim; ++d) xq[d] += tp.velocity.N[q][i] * xn[d];
      }
      const auto fq = f(xq);
      for (int i = 0; i < nv; ++i) {
        for (int c = 0; c < dim; ++c) {
          load[dofmap.vdof(mesh.elements[e][i], c)] +=
              fq[c] * tp.velocity.N[q][i] * m.jxw[q];
        }
      }
    }
  }
  return load;
}

double velocity_l2_error(
    const Mesh& mesh, const DofMap& dofmap, const Vector& u,
    const std::function<std::array<double, 3>(const std::array<double, 3>&)>& exact) {
  const auto& tp = tables_for(mesh.kind, mesh.order);
  const int nv = tp.velocity.n;
  const int dim = mesh.dim;
  double err2 = 0.0;
  Mapped m;
  for (int e = 0; e < mesh.n_elements(); ++e) {
    map_element(mesh, e, tp, m);
    for (std::size_t q = 0; q < m.jxw.size(); ++q) {
      std::array<double, 3> xq{0, 0, 0};
      std::array<double, 3> uh{0, 0, 0};
      for (int i = 0; i < nv; ++i) {
        const auto& xn = mesh.nodes[mesh.elements[e][i]];
        for (int d = 0; d < dim; ++d) xq[d] += tp.velocity.N[q][i] * xn[d];
        for (int c = 0; c < dim; ++c) {
          uh[c] += tp.velocity.N[q][i] * u[dofmap.vdof(mesh.elements[e][i], c)];
        }
      }
      const auto ue = exact(xq);
      double d2 = 0.0;
      for (int c = 0; c < dim; ++c) d2 += (uh[c] - ue[c]) * (uh[c] - ue[c]);
      err2 += d2 * m.jxw[q];
    }
  }
  return std::sqrt(err2);
}

std::array<double, 3> inflow_profile_bfs(const std::array<double, 3>& p, double v_max,
                                         int dim) {
  if (dim == 2) {
    return {4.0 * v_max * p[1] * (1.0 - p[1]), 0.0, 0.0};
  }
  return {16.0 * v_max * p[1] * p[2] * (1.0 - p[1]) * (1.0 - p[2]), 0.0, 0.0};
}

double reynolds_bfs(double v_max, double nu) { return 2.0 * v_max / nu; }

}  // namespace solverkit

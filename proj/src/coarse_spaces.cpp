#include "solverkit/coarse_spaces.hpp"

#include <algorithm>
#include <cassert>
#include <map>
#include <stdexcept>

#include "solverkit/exec_mode.hpp"
#include "solverkit/factorization.hpp"

namespace solverkit {

namespace {

bool strict_subset(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() >= b.size()) return false;
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

// Shared by the reduced constructions: vertex functions cover the adjacent
// components in `extendable`; remaining components keep their own function.
InterfacePoU reduced_pou(const InterfaceClassification& cls,
                         const std::vector<char>& extendable) {
  const auto& comps = cls.components;
  std::vector<int> vertex_ids;
  for (std::size_t c = 0; c < comps.size(); ++c) {
    if (comps[c].type == ComponentType::vertex) vertex_ids.push_back(static_cast<int>(c));
  }

  // Adjacent vertex count per component.
  std::vector<std::vector<int>> adjacent(comps.size());
  for (std::size_t c = 0; c < comps.size(); ++c) {
    if (comps[c].type == ComponentType::vertex || !extendable[c]) continue;
    for (int v : vertex_ids) {
      if (strict_subset(comps[c].sharing, comps[v].sharing)) adjacent[c].push_back(v);
    }
  }

  InterfacePoU pou;
  for (int v : vertex_ids) {
    PouFunction f;
    f.kind = ComponentType::vertex;
    f.component = v;
    f.nodes = comps[v].nodes;
    f.values.assign(f.nodes.size(), 1.0);
    for (std::size_t c = 0; c < comps.size(); ++c) {
      if (adjacent[c].empty()) continue;
      if (std::find(adjacent[c].begin(), adjacent[c].end(), v) == adjacent[c].end()) {
        continue;
      }
      const double w = 1.0 / static_cast<double>(adjacent[c].size());
      f.nodes.insert(f.nodes.end(), comps[c].nodes.begin(), comps[c].nodes.end());
      f.values.insert(f.values.end(), comps[c].nodes.size(), w);
    }
    pou.functions.push_back(std::move(f));
  }
  // Orphan or non-extendable components, in canonical component order.
  for (std::size_t c = 0; c < comps.size(); ++c) {
    if (comps[c].type == ComponentType::vertex) continue;
    if (extendable[c] && !adjacent[c].empty()) continue;
    PouFunction f;
    f.kind = comps[c].type;
    f.component = static_cast<int>(c);
    f.nodes = comps[c].nodes;
    f.values.assign(f.nodes.size(), 1.0);
    pou.functions.push_back(std::move(f));
  }
  return pou;
}

}  // namespace

InterfacePoU pou_gdsw(const InterfaceClassification& cls) {
  InterfacePoU pou;
  for (std::size_t c = 0; c < cls.components.size(); ++c) {
    PouFunction f;
    f.kind = cls.components[c].type;
    f.component = static_cast<int>(c);
    f.nodes = cls.components[c].nodes;
    f.values.assign(f.nodes.size(), 1.0);
    pou.functions.push_back(std::move(f));
  }
  return pou;
}

InterfacePoU pou_rgdsw_option1(const InterfaceClassification& cls) {
  std::vector<char> extendable(cls.components.size(), 1);
  return reduced_pou(cls, extendable);
}

InterfacePoU pou_gdsw_star(const InterfaceClassification& cls, int dim) {
  std::vector<char> extendable(cls.components.size(), 1);
  if (dim == 3) {
    // Faces are kept as separate functions; vertex functions span edges only.
    for (std::size_t c = 0; c < cls.components.size(); ++c) {
      if (cls.components[c].type == ComponentType::face) extendable[c] = 0;
    }
  }
  return reduced_pou(cls, extendable);
}

CoarseColumns tensor_nullspace(const InterfacePoU& pou, Field field,
                               const DofMap& dofmap) {
  CoarseColumns out;
  for (std::size_t fi = 0; fi < pou.functions.size(); ++fi) {
    const auto& f = pou.functions[fi];
    if (field == Field::velocity) {
      for (int c = 0; c < dofmap.dim; ++c) {
        CoarseColumn col;
        col.field = field;
        col.kind = f.kind;
        col.component = f.component;
        col.direction = c;
        for (std::size_t i = 0; i < f.nodes.size(); ++i) {
          col.dofs.push_back(dofmap.vdof(f.nodes[i], c));
          col.values.push_back(f.values[i]);
        }
        out.cols.push_back(std::move(col));
      }
    } else {
      CoarseColumn col;
      col.field = field;
      col.kind = f.kind;
      col.component = f.component;
      for (std::size_t i = 0; i < f.nodes.size(); ++i) {
        const int p = dofmap.pressure_index[f.nodes[i]];
        if (p < 0) continue;  // midside nodes carry no pressure dof
        col.dofs.push_back(dofmap.n_velocity() + p);
        col.values.push_back(f.values[i]);
      }
      out.cols.push_back(std::move(col));
    }
  }
  return out;
}

CoarseColumns tensor_scalar(const InterfacePoU& pou) {
  CoarseColumns out;
  for (const auto& f : pou.functions) {
    CoarseColumn col;
    col.field = Field::velocity;
    col.kind = f.kind;
    col.component = f.component;
    col.dofs = f.nodes;
    col.values = f.values;
    out.cols.push_back(std::move(col));
  }
  return out;
}

CoarseBasis harmonic_extension(const SparseMatrix& K, const CoarseColumns& cols,
                               const std::vector<int>& interface_dofs,
                               const std::vector<std::vector<int>>& interior_sets,
                               int n_velocity_rows) {
  const int n = K.rows();
  const int m = static_cast<int>(cols.cols.size());

  std::vector<int> gamma_pos(static_cast<std::size_t>(n), -1);
  for (std::size_t i = 0; i < interface_dofs.size(); ++i) {
    gamma_pos[interface_dofs[i]] = static_cast<int>(i);
  }

  std::vector<Triplet> t;
  for (int j = 0; j < m; ++j) {
    const auto& col = cols.cols[j];
    for (std::size_t i = 0; i < col.dofs.size(); ++i) {
      assert(gamma_pos[col.dofs[i]] >= 0);
      t.push_back({col.dofs[i], j, col.values[i], 0});
    }
  }

  // Dense interface values per column, for the subdomain right sides.
  std::vector<Vector> gamma_vals(m, Vector(interface_dofs.size(), 0.0));
  for (int j = 0; j < m; ++j) {
    const auto& col = cols.cols[j];
    for (std::size_t i = 0; i < col.dofs.size(); ++i) {
      gamma_vals[j][gamma_pos[col.dofs[i]]] = col.values[i];
    }
  }

  const int ns = static_cast<int>(interior_sets.size());
  std::vector<std::vector<Triplet>> local(ns);
#pragma omp parallel for schedule(dynamic) if (!exec::serial())
  for (int s = 0; s < ns; ++s) {
    const auto& interior = interior_sets[s];
    if (interior.empty()) continue;
    SparseMatrix KII = extract_submatrix(K, interior, interior);
    SparseMatrix KIG = extract_submatrix(K, interior, interface_dofs);
    Factorization fact(KII, "interior block of subdomain " + std::to_string(s));
    std::vector<char> coupled(interface_dofs.size(), 0);
    for (int c : KIG.col_indices()) coupled[c] = 1;
    for (int j = 0; j < m; ++j) {
      const auto& col = cols.cols[j];
      bool touches = false;
      for (int dof : col.dofs) {
        if (coupled[gamma_pos[dof]]) {
          touches = true;
          break;
        }
      }
      if (!touches) continue;
      Vector rhs = spmv(KIG, gamma_vals[j]);
      for (double& v : rhs) v = -v;
      bool nonzero = false;
      for (double v : rhs) {
        if (v != 0.0) {
          nonzero = true;
          break;
        }
      }
      if (!nonzero) continue;
      Vector x = fact.solve(rhs);
      for (std::size_t i = 0; i < interior.size(); ++i) {
        if (x[i] != 0.0) local[s].push_back({interior[i], j, x[i], 0});
      }
    }
  }
  for (auto& buf : local) t.insert(t.end(), buf.begin(), buf.end());

  CoarseBasis basis;
  basis.phi = SparseMatrix::from_triplets(n, m, std::move(t));
  basis.columns = cols.cols;
  basis.n_velocity_rows = n_velocity_rows;
  return basis;
}

CoarseBasis decouple_fields(const CoarseBasis& basis) {
  CoarseBasis out = basis;
  if (basis.n_velocity_rows <= 0) return out;
  // Zero entries whose row field differs from the column field.
  SparseMatrix phit = transpose(out.phi);
  for (int j = 0; j < phit.rows(); ++j) {
    const Field f = out.columns[j].field;
    for (int k = phit.row_offsets()[j]; k < phit.row_offsets()[j + 1]; ++k) {
      const int row = phit.col_indices()[k];
      const bool vrow = row < basis.n_velocity_rows;
      if ((f == Field::velocity) != vrow) phit.values()[k] = 0.0;
    }
  }
  out.phi = transpose(phit);
  return out;
}

SparseMatrix assemble_coarse(const SparseMatrix& K, const CoarseBasis& basis,
                             bool decoupled) {
  const CoarseBasis* use = &basis;
  CoarseBasis tmp;
  if (decoupled) {
    tmp = decouple_fields(basis);
    use = &tmp;
  }
  SparseMatrix y = matmul(K, use->phi);
  return matmul(transpose(use->phi), y);
}

}  // namespace solverkit

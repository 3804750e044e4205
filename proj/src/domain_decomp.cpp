#include "solverkit/domain_decomp.hpp"

#include <algorithm>
#include <cassert>
#include <map>
#include <sstream>
#include <stdexcept>

namespace solverkit {

namespace {

// Symmetrized adjacency lists of the sparsity pattern, self-loops removed.
std::vector<std::vector<int>> graph_of(const SparseMatrix& m) {
  assert(m.rows() == m.cols());
  const int n = m.rows();
  std::vector<std::vector<int>> adj(n);
  for (int r = 0; r < n; ++r) {
    for (int k = m.row_offsets()[r]; k < m.row_offsets()[r + 1]; ++k) {
      const int c = m.col_indices()[k];
      if (c == r) continue;
      adj[r].push_back(c);
      adj[c].push_back(r);
    }
  }
  for (auto& list : adj) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return adj;
}

}  // namespace

OverlapDecomposition build_overlap(const SparseMatrix& matrix,
                                   const std::vector<std::vector<int>>& cores,
                                   int overlap) {
  if (overlap < 0) throw std::invalid_argument("overlap must be >= 0");
  const int n = matrix.rows();
  const auto adj = graph_of(matrix);

  OverlapDecomposition d;
  d.n_dofs = n;
  d.overlap_width = overlap;
  d.core_dofs = cores;
  for (auto& core : d.core_dofs) std::sort(core.begin(), core.end());

  d.overlap_dofs.resize(cores.size());
  std::vector<char> in_set(static_cast<std::size_t>(n), 0);
  for (std::size_t s = 0; s < cores.size(); ++s) {
    std::vector<int> current = d.core_dofs[s];
    for (int dof : current) in_set[dof] = 1;
    std::vector<int> frontier = current;
    for (int round = 0; round < overlap; ++round) {
      std::vector<int> next;
      for (int dof : frontier) {
        for (int nb : adj[dof]) {
          if (!in_set[nb]) {
            in_set[nb] = 1;
            next.push_back(nb);
          }
        }
      }
      current.insert(current.end(), next.begin(), next.end());
      frontier = std::move(next);
      if (frontier.empty()) break;
    }
    std::sort(current.begin(), current.end());
    for (int dof : current) in_set[dof] = 0;
    d.overlap_dofs[s] = std::move(current);
  }

  d.scaling = inverse_multiplicity_scaling(matrix, d.overlap_dofs, n);
  return d;
}

std::vector<std::vector<double>> inverse_multiplicity_scaling(
    const SparseMatrix& matrix, const std::vector<std::vector<int>>& overlap_dofs,
    int n_dofs) {
  const auto adj = graph_of(matrix);
  const std::size_t ns = overlap_dofs.size();

  // interior[s][i]: dof overlap_dofs[s][i] has all graph neighbors inside s.
  std::vector<std::vector<char>> interior(ns);
  std::vector<int> interior_count(static_cast<std::size_t>(n_dofs), 0);
  std::vector<int> multiplicity(static_cast<std::size_t>(n_dofs), 0);
  std::vector<char> member(static_cast<std::size_t>(n_dofs), 0);
  for (std::size_t s = 0; s < ns; ++s) {
    for (int dof : overlap_dofs[s]) member[dof] = 1;
    interior[s].resize(overlap_dofs[s].size());
    for (std::size_t i = 0; i < overlap_dofs[s].size(); ++i) {
      const int dof = overlap_dofs[s][i];
      bool inside = true;
      for (int nb : adj[dof]) {
        if (!member[nb]) {
          inside = false;
          break;
        }
      }
      interior[s][i] = inside ? 1 : 0;
      if (inside) ++interior_count[dof];
      ++multiplicity[dof];
    }
    for (int dof : overlap_dofs[s]) member[dof] = 0;
  }

  std::vector<std::vector<double>> scaling(ns);
  for (std::size_t s = 0; s < ns; ++s) {
    scaling[s].resize(overlap_dofs[s].size());
    for (std::size_t i = 0; i < overlap_dofs[s].size(); ++i) {
      const int dof = overlap_dofs[s][i];
      if (interior_count[dof] > 0) {
        scaling[s][i] = interior[s][i] ? 1.0 / interior_count[dof] : 0.0;
      } else {
        scaling[s][i] = 1.0 / multiplicity[dof];
      }
    }
  }
  return scaling;
}

InterfaceClassification classify_interface(
    const std::vector<std::vector<int>>& node_subdomains,
    const std::vector<char>& dirichlet_node) {
  assert(dirichlet_node.size() == node_subdomains.size());
  std::map<std::vector<int>, std::vector<int>> groups;
  for (std::size_t n = 0; n < node_subdomains.size(); ++n) {
    if (dirichlet_node[n]) continue;
    if (node_subdomains[n].size() < 2) continue;
    groups[node_subdomains[n]].push_back(static_cast<int>(n));
  }

  InterfaceClassification out;
  for (auto& [sharing, nodes] : groups) {
    InterfaceComponent comp;
    comp.sharing = sharing;
    std::sort(nodes.begin(), nodes.end());
    comp.nodes = nodes;
    if (sharing.size() == 2) {
      comp.type = ComponentType::face;
    } else {
      comp.type = nodes.size() == 1 ? ComponentType::vertex : ComponentType::edge;
    }
    out.components.push_back(std::move(comp));
    out.interface_nodes.insert(out.interface_nodes.end(), nodes.begin(), nodes.end());
  }
  std::sort(out.interface_nodes.begin(), out.interface_nodes.end());
  std::sort(out.components.begin(), out.components.end(),
            [](const InterfaceComponent& a, const InterfaceComponent& b) {
              if (a.type != b.type) return static_cast<int>(a.type) < static_cast<int>(b.type);
              if (a.sharing != b.sharing) return a.sharing < b.sharing;
              return a.nodes.front() < b.nodes.front();
            });
  return out;
}

std::string describe_components(const InterfaceClassification& cls) {
  std::ostringstream out;
  for (const InterfaceComponent& c : cls.components) {
    switch (c.type) {
      case ComponentType::vertex: out << "vertex"; break;
      case ComponentType::edge: out << "edge"; break;
      case ComponentType::face: out << "face"; break;
    }
    out << " nodes";
    for (int n : c.nodes) out << ' ' << n;
    out << " sharing";
    for (int s : c.sharing) out << ' ' << s;
    out << '\n';
  }
  return out.str();
}

}  // namespace solverkit

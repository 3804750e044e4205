#pragma once

#include <string>
#include <vector>

#include "solverkit/sparse.hpp"

namespace solverkit {

// Overlapping dof sets built algebraically from a matrix graph. overlap_dofs
// are sorted supersets of the core dof sets; scaling holds the diagonal of
// the scaled prolongation aligned with overlap_dofs, chosen so that the sum
// of scaled restrictions is exactly the identity.
struct OverlapDecomposition {
  int n_dofs = 0;
  int overlap_width = 0;
  std::vector<std::vector<int>> core_dofs;
  std::vector<std::vector<int>> overlap_dofs;
  std::vector<std::vector<double>> scaling;

  int n_subdomains() const { return static_cast<int>(core_dofs.size()); }
};

// Extends each core set by `overlap` rounds of graph neighbors in the
// symmetrized sparsity pattern of `matrix`, then fills the scaling.
OverlapDecomposition build_overlap(const SparseMatrix& matrix,
                                   const std::vector<std::vector<int>>& cores,
                                   int overlap);

// Scaling rule: a dof on the internal boundary of an overlap region gets
// weight zero there; elsewhere the weight is the inverse of the number of
// regions whose interior contains the dof. Dofs interior to no region fall
// back to plain inverse multiplicity.
std::vector<std::vector<double>> inverse_multiplicity_scaling(
    const SparseMatrix& matrix, const std::vector<std::vector<int>>& overlap_dofs,
    int n_dofs);

enum class ComponentType { vertex, edge, face };

struct InterfaceComponent {
  ComponentType type = ComponentType::face;
  std::vector<int> nodes;    // sorted
  std::vector<int> sharing;  // sorted subdomain ids
};

struct InterfaceClassification {
  std::vector<int> interface_nodes;  // sorted union of component nodes
  std::vector<InterfaceComponent> components;
};

// Groups interface nodes (shared by >= 2 subdomains, Dirichlet excluded) by
// their sharing set: two subdomains -> face; more than two -> vertex for a
// single node, edge otherwise. Components are ordered by (type, sharing set,
// lowest node).
InterfaceClassification classify_interface(
    const std::vector<std::vector<int>>& node_subdomains,
    const std::vector<char>& dirichlet_node);

// Plain-text component listing (type, nodes, sharing set) for debugging.
std::string describe_components(const InterfaceClassification& cls);

}  // namespace solverkit

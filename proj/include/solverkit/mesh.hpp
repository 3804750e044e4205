#pragma once

#include <array>
#include <string>
#include <vector>

namespace solverkit {

enum class ElementKind { triangle, quadrilateral, hexahedron };
enum class BoundaryTag { none, inflow, outflow, wall };
enum class StructuredGeometry { unit_square, unit_cube, backward_facing_step };

struct BoundaryFacet {
  std::vector<int> nodes;  // corner nodes first, then mid-facet nodes
  int n_corners = 0;
  BoundaryTag tag = BoundaryTag::wall;
  int element = -1;  // adjacent element, used for outward orientation
};

// Structured mesh over one or more axis-aligned unit boxes. Node numbering is
// lexicographic over the fine lattice (x fastest). Quads/hexes use tensor
// local node ordering; triangles split each cell along the lower-left to
// upper-right diagonal with corners first, then midsides (01, 12, 20).
struct Mesh {
  int dim = 2;
  int order = 1;
  ElementKind kind = ElementKind::triangle;
  StructuredGeometry geometry = StructuredGeometry::unit_square;
  int cells_per_unit = 1;

  std::vector<std::array<double, 3>> nodes;
  std::vector<std::vector<int>> elements;
  std::vector<BoundaryTag> node_tags;
  std::vector<BoundaryFacet> facets;

  int n_nodes() const { return static_cast<int>(nodes.size()); }
  int n_elements() const { return static_cast<int>(elements.size()); }
  int nodes_per_element() const;
  // Local indices of the element corner nodes, in tensor corner order
  // (triangles: 0,1,2).
  std::vector<int> corner_local_indices() const;
  std::array<double, 3> element_barycenter(int e) const;
};

Mesh build_unit_square(int cells_per_side, ElementKind kind, int order);
Mesh build_unit_cube(int cells_per_side, int order);
// Backward-facing step: inlet unit box at x in [0,1] (cross-section y in
// [0,1], and z in [0,1] in 3D), expansion channel x in [1,5] with
// cross-section doubled in y. Nine unit boxes total.
Mesh build_bfs(int dim, int cells_per_unit, ElementKind kind, int order);

struct Partition {
  int n_subdomains = 0;
  std::vector<int> element_subdomain;
  double nominal_diameter = 1.0;      // H
  std::array<int, 3> counts{1, 1, 1};  // per axis, within each unit box
};

// Splits each structured unit box into counts[d] boxes per axis; counts must
// divide the cells per axis. Elements are assigned by barycenter.
Partition partition_structured(const Mesh& mesh, std::array<int, 3> counts);

// Sorted subdomain lists per node (subdomains of elements containing it).
std::vector<std::vector<int>> node_subdomain_membership(const Mesh& mesh,
                                                        const Partition& part);

// Plain-text node/element listing for debugging.
std::string describe_mesh(const Mesh& mesh);

}  // namespace solverkit

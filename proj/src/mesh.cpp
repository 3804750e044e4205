#include "solverkit/mesh.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace solverkit {

namespace {

constexpr double kGeomTol = 1e-9;

struct LatticeKey {
  long long x = 0, y = 0, z = 0;
  bool operator<(const LatticeKey& o) const {
    if (z != o.z) return z < o.z;
    if (y != o.y) return y < o.y;
    return x < o.x;
  }
};

std::vector<std::array<int, 3>> unit_boxes(StructuredGeometry g, int dim) {
  switch (g) {
    case StructuredGeometry::unit_square:
    case StructuredGeometry::unit_cube:
      return {{0, 0, 0}};
    case StructuredGeometry::backward_facing_step: {
      std::vector<std::array<int, 3>> units{{0, 0, 0}};
      for (int j = 0; j < 2; ++j) {
        for (int i = 1; i < 5; ++i) units.push_back({i, j, 0});
      }
      std::sort(units.begin(), units.end());
      (void)dim;
      return units;
    }
  }
  return {};
}

// Full local node list of a face, corners first. Faces are indexed per kind.
std::vector<int> local_face_nodes(ElementKind kind, int order, int face) {
  const int o = order;
  const int w = o + 1;
  auto quad_idx = [w](int i, int j) { return j * w + i; };
  auto hex_idx = [w](int i, int j, int k) { return (k * w + j) * w + i; };
  if (kind == ElementKind::triangle) {
    if (order == 1) {
      static const int edges[3][2] = {{0, 1}, {1, 2}, {2, 0}};
      return {edges[face][0], edges[face][1]};
    }
    static const int edges2[3][3] = {{0, 1, 3}, {1, 2, 4}, {2, 0, 5}};
    return {edges2[face][0], edges2[face][1], edges2[face][2]};
  }
  if (kind == ElementKind::quadrilateral) {
    std::vector<int> out;
    // Edge order: y=0, x=max, y=max, x=0.
    switch (face) {
      case 0:
        for (int i = 0; i <= o; ++i) out.push_back(quad_idx(i, 0));
        break;
      case 1:
        for (int j = 0; j <= o; ++j) out.push_back(quad_idx(o, j));
        break;
      case 2:
        for (int i = 0; i <= o; ++i) out.push_back(quad_idx(i, o));
        break;
      default:
        for (int j = 0; j <= o; ++j) out.push_back(quad_idx(0, j));
        break;
    }
    if (order == 2) std::swap(out[1], out[2]);  // corners first
    return out;
  }
  // Hexahedron faces: x=0, x=max, y=0, y=max, z=0, z=max.
  std::vector<int> all;
  for (int b = 0; b <= o; ++b) {
    for (int a = 0; a <= o; ++a) {
      switch (face) {
        case 0: all.push_back(hex_idx(0, a, b)); break;
        case 1: all.push_back(hex_idx(o, a, b)); break;
        case 2: all.push_back(hex_idx(a, 0, b)); break;
        case 3: all.push_back(hex_idx(a, o, b)); break;
        case 4: all.push_back(hex_idx(a, b, 0)); break;
        default: all.push_back(hex_idx(a, b, o)); break;
      }
    }
  }
  if (order == 1) return all;
  // Tensor 3x3 face list: corners at 0, 2, 6, 8.
  return {all[0], all[2], all[6], all[8], all[1], all[3], all[5], all[7], all[4]};
}

int n_faces(ElementKind kind) {
  switch (kind) {
    case ElementKind::triangle: return 3;
    case ElementKind::quadrilateral: return 4;
    case ElementKind::hexahedron: return 6;
  }
  return 0;
}

int face_corner_count(ElementKind kind) {
  return kind == ElementKind::hexahedron ? 4 : 2;
}

int tag_priority(BoundaryTag t) {
  switch (t) {
    case BoundaryTag::inflow: return 3;
    case BoundaryTag::wall: return 2;
    case BoundaryTag::outflow: return 1;
    case BoundaryTag::none: return 0;
  }
  return 0;
}

void finalize_boundary(Mesh& mesh) {
  // Faces appearing in exactly one element are boundary facets.
  std::map<std::vector<int>, std::pair<int, int>> face_use;  // corners -> (count, elem*nf+face)
  const int nf = n_faces(mesh.kind);
  const int ncorner = face_corner_count(mesh.kind);
  for (int e = 0; e < mesh.n_elements(); ++e) {
    for (int f = 0; f < nf; ++f) {
      const auto locals = local_face_nodes(mesh.kind, mesh.order, f);
      std::vector<int> corners(ncorner);
      for (int c = 0; c < ncorner; ++c) corners[c] = mesh.elements[e][locals[c]];
      std::sort(corners.begin(), corners.end());
      auto [it, fresh] = face_use.try_emplace(corners, std::pair<int, int>{0, e * nf + f});
      it->second.first += 1;
      (void)fresh;
    }
  }
  std::vector<std::pair<int, int>> boundary;  // (element, face)
  for (const auto& [key, val] : face_use) {
    if (val.first == 1) boundary.push_back({val.second / nf, val.second % nf});
  }
  std::sort(boundary.begin(), boundary.end());

  double xmax = 0.0;
  for (const auto& p : mesh.nodes) xmax = std::max(xmax, p[0]);

  mesh.facets.clear();
  for (auto [e, f] : boundary) {
    BoundaryFacet facet;
    facet.element = e;
    facet.n_corners = ncorner;
    for (int l : local_face_nodes(mesh.kind, mesh.order, f)) {
      facet.nodes.push_back(mesh.elements[e][l]);
    }
    if (mesh.geometry == StructuredGeometry::backward_facing_step) {
      double cx = 0.0;
      for (int c = 0; c < ncorner; ++c) cx += mesh.nodes[facet.nodes[c]][0];
      cx /= ncorner;
      if (cx < kGeomTol) {
        facet.tag = BoundaryTag::inflow;
      } else if (cx > xmax - kGeomTol) {
        facet.tag = BoundaryTag::outflow;
      } else {
        facet.tag = BoundaryTag::wall;
      }
    } else {
      facet.tag = BoundaryTag::wall;
    }
    mesh.facets.push_back(std::move(facet));
  }

  mesh.node_tags.assign(mesh.nodes.size(), BoundaryTag::none);
  for (const auto& facet : mesh.facets) {
    for (int n : facet.nodes) {
      if (tag_priority(facet.tag) > tag_priority(mesh.node_tags[n])) {
        mesh.node_tags[n] = facet.tag;
      }
    }
  }
}

Mesh build_structured(StructuredGeometry geometry, int dim, int cells, ElementKind kind,
                      int order) {
  if (cells < 1) throw std::invalid_argument("cells must be >= 1");
  if (order != 1 && order != 2) throw std::invalid_argument("order must be 1 or 2");
  if (dim == 2 && kind == ElementKind::hexahedron) {
    throw std::invalid_argument("hexahedra require dim 3");
  }
  if (dim == 3 && kind != ElementKind::hexahedron) {
    throw std::invalid_argument("dim 3 uses hexahedra");
  }

  Mesh mesh;
  mesh.dim = dim;
  mesh.order = order;
  mesh.kind = kind;
  mesh.geometry = geometry;
  mesh.cells_per_unit = cells;

  const auto units = unit_boxes(geometry, dim);
  const int fine = cells * order;  // lattice points per unit per axis

  // Collect the lattice points of all unit boxes, dedupe, and number them
  // lexicographically (z, then y, then x fastest).
  std::map<LatticeKey, int> ids;
  for (const auto& u : units) {
    const int fz = (dim == 3) ? fine : 0;
    for (int k = 0; k <= fz; ++k) {
      for (int j = 0; j <= fine; ++j) {
        for (int i = 0; i <= fine; ++i) {
          LatticeKey key{static_cast<long long>(u[0]) * fine + i,
                         static_cast<long long>(u[1]) * fine + j,
                         static_cast<long long>(u[2]) * fine + k};
          ids.emplace(key, 0);
        }
      }
    }
  }
  int next = 0;
  for (auto& [key, id] : ids) id = next++;
  mesh.nodes.resize(ids.size());
  const double h = 1.0 / fine;
  for (const auto& [key, id] : ids) {
    mesh.nodes[id] = {key.x * h, key.y * h, key.z * h};
  }

  auto node_at = [&ids](long long gx, long long gy, long long gz) {
    auto it = ids.find(LatticeKey{gx, gy, gz});
    assert(it != ids.end());
    return it->second;
  };

  for (const auto& u : units) {
    const long long bx = static_cast<long long>(u[0]) * fine;
    const long long by = static_cast<long long>(u[1]) * fine;
    const long long bz = static_cast<long long>(u[2]) * fine;
    const int cz = (dim == 3) ? cells : 1;
    for (int ck = 0; ck < cz; ++ck) {
      for (int cj = 0; cj < cells; ++cj) {
        for (int ci = 0; ci < cells; ++ci) {
          const long long ox = bx + static_cast<long long>(order) * ci;
          const long long oy = by + static_cast<long long>(order) * cj;
          const long long oz = bz + static_cast<long long>(order) * ck;
          if (kind == ElementKind::quadrilateral) {
            std::vector<int> conn;
            for (int j = 0; j <= order; ++j) {
              for (int i = 0; i <= order; ++i) conn.push_back(node_at(ox + i, oy + j, 0));
            }
            mesh.elements.push_back(std::move(conn));
          } else if (kind == ElementKind::hexahedron) {
            std::vector<int> conn;
            for (int k = 0; k <= order; ++k) {
              for (int j = 0; j <= order; ++j) {
                for (int i = 0; i <= order; ++i) {
                  conn.push_back(node_at(ox + i, oy + j, oz + k));
                }
              }
            }
            mesh.elements.push_back(std::move(conn));
          } else {
            // Cell corners in lattice units, diagonal from (0,0) to (1,1).
            const long long o = order;
            const std::array<std::array<long long, 2>, 4> corner{
                {{ox, oy}, {ox + o, oy}, {ox + o, oy + o}, {ox, oy + o}}};
            for (int t = 0; t < 2; ++t) {
              const std::array<int, 3> tri =
                  (t == 0) ? std::array<int, 3>{0, 1, 2} : std::array<int, 3>{0, 2, 3};
              std::vector<int> conn;
              for (int v : tri) conn.push_back(node_at(corner[v][0], corner[v][1], 0));
              if (order == 2) {
                for (int s = 0; s < 3; ++s) {
                  const int a = tri[s];
                  const int b = tri[(s + 1) % 3];
                  conn.push_back(node_at((corner[a][0] + corner[b][0]) / 2,
                                         (corner[a][1] + corner[b][1]) / 2, 0));
                }
              }
              mesh.elements.push_back(std::move(conn));
            }
          }
        }
      }
    }
  }

  finalize_boundary(mesh);
  return mesh;
}

}  // namespace

int Mesh::nodes_per_element() const {
  switch (kind) {
    case ElementKind::triangle: return order == 1 ? 3 : 6;
    case ElementKind::quadrilateral: return (order + 1) * (order + 1);
    case ElementKind::hexahedron: return (order + 1) * (order + 1) * (order + 1);
  }
  return 0;
}

std::vector<int> Mesh::corner_local_indices() const {
  if (kind == ElementKind::triangle) return {0, 1, 2};
  if (kind == ElementKind::quadrilateral) {
    return order == 1 ? std::vector<int>{0, 1, 2, 3} : std::vector<int>{0, 2, 6, 8};
  }
  return order == 1 ? std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7}
                    : std::vector<int>{0, 2, 6, 8, 18, 20, 24, 26};
}

std::array<double, 3> Mesh::element_barycenter(int e) const {
  std::array<double, 3> b{0.0, 0.0, 0.0};
  const auto corners = corner_local_indices();
  for (int l : corners) {
    for (int d = 0; d < 3; ++d) b[d] += nodes[elements[e][l]][d];
  }
  for (int d = 0; d < 3; ++d) b[d] /= static_cast<double>(corners.size());
  return b;
}

Mesh build_unit_square(int cells_per_side, ElementKind kind, int order) {
  if (kind == ElementKind::hexahedron) {
    throw std::invalid_argument("unit square is 2D");
  }
  return build_structured(StructuredGeometry::unit_square, 2, cells_per_side, kind, order);
}

Mesh build_unit_cube(int cells_per_side, int order) {
  return build_structured(StructuredGeometry::unit_cube, 3, cells_per_side,
                          ElementKind::hexahedron, order);
}

Mesh build_bfs(int dim, int cells_per_unit, ElementKind kind, int order) {
  if (dim != 2 && dim != 3) throw std::invalid_argument("dim must be 2 or 3");
  return build_structured(StructuredGeometry::backward_facing_step, dim, cells_per_unit,
                          kind, order);
}

Partition partition_structured(const Mesh& mesh, std::array<int, 3> counts) {
  const int active = mesh.dim;
  for (int d = 0; d < 3; ++d) {
    if (d >= active && counts[d] != 1) {
      throw std::invalid_argument("counts beyond the mesh dimension must be 1");
    }
    if (counts[d] < 1) throw std::invalid_argument("counts must be >= 1");
    if (d < active && mesh.cells_per_unit % counts[d] != 0) {
      throw std::invalid_argument("counts must divide the cells per axis");
    }
  }
  const auto units = unit_boxes(mesh.geometry, mesh.dim);
  const int boxes = counts[0] * counts[1] * counts[2];

  Partition part;
  part.counts = counts;
  part.n_subdomains = static_cast<int>(units.size()) * boxes;
  part.element_subdomain.resize(mesh.n_elements());
  int min_count = counts[0];
  for (int d = 1; d < active; ++d) min_count = std::min(min_count, counts[d]);
  part.nominal_diameter = 1.0 / min_count;

  auto unit_index = [&units](const std::array<int, 3>& u) {
    auto it = std::lower_bound(units.begin(), units.end(), u);
    if (it == units.end() || *it != u) {
      throw std::logic_error("element barycenter outside the structured units");
    }
    return static_cast<int>(it - units.begin());
  };

  for (int e = 0; e < mesh.n_elements(); ++e) {
    const auto b = mesh.element_barycenter(e);
    std::array<int, 3> u{0, 0, 0};
    std::array<int, 3> box{0, 0, 0};
    for (int d = 0; d < active; ++d) {
      u[d] = static_cast<int>(std::floor(b[d]));
      const double local = b[d] - u[d];
      box[d] = std::min(counts[d] - 1,
                        static_cast<int>(std::floor(local * counts[d])));
    }
    const int local_id = (box[2] * counts[1] + box[1]) * counts[0] + box[0];
    part.element_subdomain[e] = unit_index(u) * boxes + local_id;
  }
  return part;
}

std::string describe_mesh(const Mesh& mesh) {
  std::ostringstream out;
  out << "nodes " << mesh.n_nodes() << "\n";
  for (int i = 0; i < mesh.n_nodes(); ++i) {
    const auto& p = mesh.nodes[i];
    out << i << ' ' << p[0] << ' ' << p[1] << ' ' << p[2];
    switch (mesh.node_tags[i]) {
      case BoundaryTag::inflow: out << " inflow"; break;
      case BoundaryTag::outflow: out << " outflow"; break;
      case BoundaryTag::wall: out << " wall"; break;
      case BoundaryTag::none: break;
    }
    out << '\n';
  }
  out << "elements " << mesh.n_elements() << "\n";
  for (int e = 0; e < mesh.n_elements(); ++e) {
    out << e;
    for (int n : mesh.elements[e]) out << ' ' << n;
    out << '\n';
  }
  return out.str();
}

std::vector<std::vector<int>> node_subdomain_membership(const Mesh& mesh,
                                                        const Partition& part) {
  std::vector<std::vector<int>> member(mesh.nodes.size());
  for (int e = 0; e < mesh.n_elements(); ++e) {
    const int s = part.element_subdomain[e];
    for (int n : mesh.elements[e]) {
      auto& list = member[n];
      if (std::find(list.begin(), list.end(), s) == list.end()) list.push_back(s);
    }
  }
  for (auto& list : member) std::sort(list.begin(), list.end());
  return member;
}

}  // namespace solverkit

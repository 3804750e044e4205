#include <doctest.h>

#include <cmath>
#include <set>

#include "solverkit/mesh.hpp"

using namespace solverkit;

TEST_CASE("unit square node and element counts") {
  Mesh m1 = build_unit_square(1, ElementKind::triangle, 1);
  CHECK(m1.n_nodes() == 4);
  CHECK(m1.n_elements() == 2);

  Mesh m2 = build_unit_square(2, ElementKind::quadrilateral, 1);
  CHECK(m2.n_nodes() == 9);
  CHECK(m2.n_elements() == 4);

  // 2x2 crisscross grid of P2 triangles: 5x5 lattice of corner+midside nodes.
  Mesh m3 = build_unit_square(2, ElementKind::triangle, 2);
  CHECK(m3.n_nodes() == 25);
  CHECK(m3.n_elements() == 8);
  CHECK(m3.nodes_per_element() == 6);
}

TEST_CASE("unit cube node and element counts") {
  Mesh c1 = build_unit_cube(1, 1);
  CHECK(c1.n_nodes() == 8);
  CHECK(c1.n_elements() == 1);

  Mesh c2 = build_unit_cube(2, 1);
  CHECK(c2.n_nodes() == 27);
  CHECK(c2.n_elements() == 8);

  Mesh c3 = build_unit_cube(1, 2);
  CHECK(c3.n_nodes() == 27);
  CHECK(c3.n_elements() == 1);
  CHECK(c3.nodes_per_element() == 27);
}

TEST_CASE("backward facing step composes nine unit boxes") {
  Mesh b3 = build_bfs(3, 1, ElementKind::hexahedron, 1);
  CHECK(b3.n_elements() == 9);
  CHECK(b3.n_nodes() == 34);  // 4 inlet-face nodes + 5x3x2 channel lattice

  Mesh b2 = build_bfs(2, 2, ElementKind::quadrilateral, 1);
  CHECK(b2.n_elements() == 4 * 9);  // 4 cells per unit square, 9 unit squares
  CHECK(b2.n_nodes() == 51);
}

TEST_CASE("backward facing step inflow tag at the inlet face") {
  Mesh b3 = build_bfs(3, 2, ElementKind::hexahedron, 1);
  int found = -1;
  for (int n = 0; n < b3.n_nodes(); ++n) {
    const auto& p = b3.nodes[size_t(n)];
    if (std::abs(p[0]) < 1e-12 && std::abs(p[1] - 0.5) < 1e-12 &&
        std::abs(p[2] - 0.5) < 1e-12) {
      found = n;
      break;
    }
  }
  REQUIRE(found >= 0);
  CHECK(b3.node_tags[size_t(found)] == BoundaryTag::inflow);
}

TEST_CASE("boundary tags cover exactly the geometric boundary of the step") {
  Mesh b = build_bfs(2, 2, ElementKind::quadrilateral, 1);
  auto on_boundary = [](double x, double y) {
    const double tol = 1e-12;
    if (std::abs(x) < tol) return true;                        // inlet face
    if (std::abs(x - 5.0) < tol) return true;                  // outlet face
    if (std::abs(y) < tol) return true;                        // bottom wall
    if (std::abs(y - 1.0) < tol && x <= 1.0 + tol) return true;  // inlet top
    if (std::abs(x - 1.0) < tol && y >= 1.0 - tol) return true;  // step wall
    if (std::abs(y - 2.0) < tol && x >= 1.0 - tol) return true;  // channel top
    return false;
  };
  for (int n = 0; n < b.n_nodes(); ++n) {
    const auto& p = b.nodes[size_t(n)];
    bool boundary = on_boundary(p[0], p[1]);
    bool tagged = b.node_tags[size_t(n)] != BoundaryTag::none;
    CHECK(boundary == tagged);
    if (std::abs(p[0]) < 1e-12) CHECK(b.node_tags[size_t(n)] == BoundaryTag::inflow);
    if (std::abs(p[0] - 5.0) < 1e-12 && p[1] > 1e-12 && p[1] < 2.0 - 1e-12) {
      CHECK(b.node_tags[size_t(n)] == BoundaryTag::outflow);
    }
    if (boundary && p[0] > 1e-12 && p[0] < 5.0 - 1e-12 && std::abs(p[1] - 1.0) > 1e-12) {
      CHECK(b.node_tags[size_t(n)] == BoundaryTag::wall);
    }
  }
}

TEST_CASE("structured partition of the unit cube") {
  Mesh c = build_unit_cube(2, 1);
  Partition p = partition_structured(c, {2, 2, 2});
  CHECK(p.n_subdomains == 8);
  std::vector<int> counts(8, 0);
  for (int s : p.element_subdomain) counts[size_t(s)]++;
  for (int cnt : counts) CHECK(cnt == 1);
  CHECK(p.nominal_diameter == doctest::Approx(0.5));
}

TEST_CASE("structured partition of a triangulated square") {
  Mesh m = build_unit_square(4, ElementKind::triangle, 1);
  Partition p = partition_structured(m, {2, 2, 1});
  CHECK(p.n_subdomains == 4);
  std::vector<int> counts(4, 0);
  for (int s : p.element_subdomain) counts[size_t(s)]++;
  for (int cnt : counts) CHECK(cnt == 8);  // 4 cells of 2 triangles each
}

TEST_CASE("one subdomain per step subcube") {
  Mesh b = build_bfs(3, 1, ElementKind::hexahedron, 1);
  Partition p = partition_structured(b, {1, 1, 1});
  CHECK(p.n_subdomains == 9);
}

TEST_CASE("counts that do not divide the cells are rejected") {
  Mesh m = build_unit_square(4, ElementKind::quadrilateral, 1);
  CHECK_THROWS_AS(partition_structured(m, {3, 3, 1}), std::invalid_argument);
}

TEST_CASE("repartitioning is bit identical") {
  Mesh m = build_unit_square(8, ElementKind::triangle, 1);
  Partition a = partition_structured(m, {4, 4, 1});
  Partition b = partition_structured(m, {4, 4, 1});
  CHECK(a.element_subdomain == b.element_subdomain);
  CHECK(a.n_subdomains == b.n_subdomains);
}

TEST_CASE("node subdomain membership at the cross point") {
  Mesh m = build_unit_square(4, ElementKind::quadrilateral, 1);
  Partition p = partition_structured(m, {2, 2, 1});
  auto memb = node_subdomain_membership(m, p);
  int center = -1, corner = -1;
  for (int n = 0; n < m.n_nodes(); ++n) {
    const auto& pt = m.nodes[size_t(n)];
    if (std::abs(pt[0] - 0.5) < 1e-12 && std::abs(pt[1] - 0.5) < 1e-12) center = n;
    if (std::abs(pt[0]) < 1e-12 && std::abs(pt[1]) < 1e-12) corner = n;
  }
  REQUIRE(center >= 0);
  REQUIRE(corner >= 0);
  CHECK(memb[size_t(center)] == std::vector<int>{0, 1, 2, 3});
  CHECK(memb[size_t(corner)] == std::vector<int>{0});
}

TEST_CASE("mesh description lists nodes and tags") {
  Mesh b = build_bfs(2, 1, ElementKind::quadrilateral, 1);
  std::string text = describe_mesh(b);
  CHECK(text.find("inflow") != std::string::npos);
  CHECK(text.find("outflow") != std::string::npos);
}

#include <doctest.h>

#include <cmath>

#include "solverkit/fe_assembly.hpp"
#include "solverkit/mesh.hpp"
#include "solverkit/problems.hpp"
#include "test_support.hpp"

using namespace solverkit;

namespace {

Mesh reference_triangle_mesh() {
  Mesh m;
  m.dim = 2;
  m.order = 1;
  m.kind = ElementKind::triangle;
  m.nodes = {{0.0, 0.0, 0.0}, {1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}};
  m.elements = {{0, 1, 2}};
  m.node_tags.assign(3, BoundaryTag::none);
  return m;
}

Vector constant_velocity(const DofMap& dm, double vx, double vy) {
  Vector u(size_t(dm.n_velocity()), 0.0);
  for (int n = 0; n < dm.n_nodes; ++n) {
    u[size_t(dm.vdof(n, 0))] = vx;
    u[size_t(dm.vdof(n, 1))] = vy;
  }
  return u;
}

double max_asymmetry(const SparseMatrix& m) {
  double worst = 0.0;
  for (int i = 0; i < m.rows(); ++i) {
    for (int k = m.row_offsets()[i]; k < m.row_offsets()[i + 1]; ++k) {
      int j = m.col_indices()[k];
      worst = std::max(worst, std::abs(m.values()[size_t(k)] - m.at(j, i)));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("viscous operator annihilates constant velocity fields") {
  Mesh mesh = build_unit_square(3, ElementKind::triangle, 1);
  DofMap dm = make_dofmap(mesh);
  SparseMatrix a = assemble_viscous(mesh, dm);
  Vector u = constant_velocity(dm, 2.0, -3.0);
  CHECK(testsup::max_abs(spmv(a, u)) <= 1e-12);
}

TEST_CASE("viscous diagonal entry on the reference triangle") {
  Mesh mesh = reference_triangle_mesh();
  DofMap dm = make_dofmap(mesh);
  SparseMatrix a = assemble_viscous(mesh, dm);
  // grad of the basis at (0,0) is (-1,-1); |grad|^2 * area = 2 * 1/2 = 1.
  CHECK(a.at(dm.vdof(0, 0), dm.vdof(0, 0)) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(a.at(dm.vdof(0, 1), dm.vdof(0, 1)) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("assembled operators are symmetric") {
  Mesh mesh = build_unit_square(4, ElementKind::triangle, 1);
  DofMap dm = make_dofmap(mesh);
  CHECK(max_asymmetry(assemble_viscous(mesh, dm)) < 1e-13);
  CHECK(max_asymmetry(assemble_mass(mesh, dm, Field::velocity)) < 1e-13);
  CHECK(max_asymmetry(assemble_mass(mesh, dm, Field::pressure)) < 1e-13);
  CHECK(max_asymmetry(assemble_bd_stabilization(mesh, dm, 0.7)) < 1e-13);
}

TEST_CASE("divergence of constant and linear solenoidal interpolants vanishes") {
  for (auto kind : {ElementKind::triangle, ElementKind::quadrilateral}) {
    for (int order : {1, 2}) {
      Mesh mesh = build_unit_square(2, kind, order);
      DofMap dm = make_dofmap(mesh);
      SparseMatrix b = assemble_divergence(mesh, dm);
      Vector c = constant_velocity(dm, 1.5, -0.5);
      CHECK(testsup::max_abs(spmv(b, c)) <= 1e-13);

      // u = (x, -y) is divergence free and exactly representable.
      Vector u(size_t(dm.n_velocity()), 0.0);
      for (int n = 0; n < dm.n_nodes; ++n) {
        u[size_t(dm.vdof(n, 0))] = mesh.nodes[size_t(n)][0];
        u[size_t(dm.vdof(n, 1))] = -mesh.nodes[size_t(n)][1];
      }
      CHECK(testsup::max_abs(spmv(b, u)) <= 1e-13);
    }
  }
}

TEST_CASE("divergence row sums match the basis-integral oracle") {
  Mesh mesh = build_unit_square(3, ElementKind::triangle, 1);
  DofMap dm = make_dofmap(mesh);
  SparseMatrix b = assemble_divergence(mesh, dm);
  Vector u(size_t(dm.n_velocity()), 0.0);
  for (int n = 0; n < dm.n_nodes; ++n) {
    u[size_t(dm.vdof(n, 0))] = mesh.nodes[size_t(n)][0];  // u = (x, 0), div = 1
  }
  Vector bu = spmv(b, u);
  for (int ip = 0; ip < dm.n_pressure(); ++ip) {
    int node = dm.pressure_node[size_t(ip)];
    // -int psi_i: a third of the area of each adjacent triangle.
    double expected = 0.0;
    for (int e = 0; e < mesh.n_elements(); ++e) {
      testsup::TriGeom g = testsup::tri_geometry(mesh, e);
      if (testsup::local_of(g, node) >= 0) expected -= g.area / 3.0;
    }
    CHECK(bu[size_t(ip)] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("assembled entries match the independent quadrature oracle") {
  Mesh mesh = build_unit_square(3, ElementKind::triangle, 1);
  DofMap dm = make_dofmap(mesh);
  Vector w = testsup::random_vector(dm.n_velocity(), 2024);

  SparseMatrix a = assemble_viscous(mesh, dm);
  SparseMatrix mu = assemble_mass(mesh, dm, Field::velocity);
  SparseMatrix mp = assemble_mass(mesh, dm, Field::pressure);
  SparseMatrix b = assemble_divergence(mesh, dm);
  SparseMatrix n_w = assemble_convection(mesh, dm, w);
  SparseMatrix w_w = assemble_newton_term(mesh, dm, w);
  SparseMatrix c = assemble_bd_stabilization(mesh, dm, 0.7);

  for (int i = 0; i < mesh.n_nodes(); ++i) {
    for (int j = 0; j < mesh.n_nodes(); ++j) {
      double lap = testsup::oracle_scalar_laplace_entry(mesh, i, j);
      double mass = testsup::oracle_scalar_mass_entry(mesh, i, j);
      double conv = testsup::oracle_convection_entry(mesh, w, i, j);
      for (int cmp = 0; cmp < 2; ++cmp) {
        CHECK(a.at(dm.vdof(i, cmp), dm.vdof(j, cmp)) == doctest::Approx(lap).epsilon(1e-12));
        CHECK(mu.at(dm.vdof(i, cmp), dm.vdof(j, cmp)) ==
              doctest::Approx(mass).epsilon(1e-12));
        CHECK(n_w.at(dm.vdof(i, cmp), dm.vdof(j, cmp)) ==
              doctest::Approx(conv).epsilon(1e-12));
        // No cross-component coupling in A, Mu, N.
        CHECK(a.at(dm.vdof(i, cmp), dm.vdof(j, 1 - cmp)) == 0.0);
        CHECK(mu.at(dm.vdof(i, cmp), dm.vdof(j, 1 - cmp)) == 0.0);
        CHECK(n_w.at(dm.vdof(i, cmp), dm.vdof(j, 1 - cmp)) == 0.0);
      }
      for (int ic = 0; ic < 2; ++ic) {
        for (int jc = 0; jc < 2; ++jc) {
          double nt = testsup::oracle_newton_entry(mesh, w, i, ic, j, jc);
          CHECK(w_w.at(dm.vdof(i, ic), dm.vdof(j, jc)) == doctest::Approx(nt).epsilon(1e-12));
        }
      }
      int ip = dm.pressure_index[size_t(i)], jp = dm.pressure_index[size_t(j)];
      if (ip >= 0) {
        for (int jc = 0; jc < 2; ++jc) {
          double div = testsup::oracle_divergence_entry(mesh, i, j, jc);
          CHECK(b.at(ip, dm.vdof(j, jc)) == doctest::Approx(div).epsilon(1e-12));
        }
      }
      if (ip >= 0 && jp >= 0) {
        double bd = testsup::oracle_bd_stab_entry(mesh, 0.7, i, j);
        CHECK(c.at(ip, jp) == doctest::Approx(bd).epsilon(1e-12));
        CHECK(mp.at(ip, jp) == doctest::Approx(mass).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("convection vanishes for zero wind and constant arguments") {
  Mesh mesh = build_unit_square(3, ElementKind::quadrilateral, 1);
  DofMap dm = make_dofmap(mesh);
  SparseMatrix n0 = assemble_convection(mesh, dm, Vector(size_t(dm.n_velocity()), 0.0));
  CHECK(testsup::max_abs(n0.values()) == 0.0);

  Vector w = testsup::random_vector(dm.n_velocity(), 5);
  SparseMatrix n_w = assemble_convection(mesh, dm, w);
  CHECK(testsup::max_abs(spmv(n_w, constant_velocity(dm, 1.0, 2.0))) <= 1e-12);

  SparseMatrix w_const = assemble_newton_term(mesh, dm, constant_velocity(dm, 3.0, -1.0));
  CHECK(testsup::max_abs(w_const.values()) <= 1e-14);
}

TEST_CASE("mass matrices integrate the domain measure") {
  Mesh sq = build_unit_square(3, ElementKind::quadrilateral, 1);
  DofMap dm = make_dofmap(sq);
  SparseMatrix mp = assemble_mass(sq, dm, Field::pressure);
  Vector ones_p(size_t(dm.n_pressure()), 1.0);
  CHECK(dot(ones_p, spmv(mp, ones_p)) == doctest::Approx(1.0).epsilon(1e-13));

  SparseMatrix m_u = assemble_mass(sq, dm, Field::velocity);
  Vector ones_u(size_t(dm.n_velocity()), 1.0);
  CHECK(dot(ones_u, spmv(m_u, ones_u)) == doctest::Approx(2.0).epsilon(1e-13));

  Mesh step = build_bfs(2, 2, ElementKind::triangle, 1);
  DofMap dstep = make_dofmap(step);
  SparseMatrix mps = assemble_mass(step, dstep, Field::pressure);
  Vector ones_s(size_t(dstep.n_pressure()), 1.0);
  CHECK(dot(ones_s, spmv(mps, ones_s)) == doctest::Approx(9.0).epsilon(1e-13));
}

TEST_CASE("pressure Laplacian kernel and Dirichlet rows") {
  // Enclosed geometry: no outflow nodes anywhere, so every strategy is pure
  // Neumann and constants are in the kernel.
  Mesh cav = build_unit_square(3, ElementKind::triangle, 1);
  DofMap dmc = make_dofmap(cav);
  SparseMatrix ap = assemble_pressure_laplacian(cav, dmc, BcStrategy::bc2);
  Vector ones(size_t(dmc.n_pressure()), 1.0);
  CHECK(testsup::max_abs(spmv(ap, ones)) <= 1e-13);

  // With an outflow boundary the Dirichlet rows carry exactly the diagonal.
  Mesh step = build_bfs(2, 1, ElementKind::quadrilateral, 1);
  DofMap dms = make_dofmap(step);
  for (BcStrategy bc : {BcStrategy::bc1, BcStrategy::bc2, BcStrategy::bc3}) {
    SparseMatrix aps = assemble_pressure_laplacian(step, dms, bc);
    Vector ones_s(size_t(dms.n_pressure()), 1.0);
    Vector row_sums = spmv(aps, ones_s);
    for (int ip = 0; ip < dms.n_pressure(); ++ip) {
      int node = dms.pressure_node[size_t(ip)];
      bool outflow = step.node_tags[size_t(node)] == BoundaryTag::outflow;
      CHECK(row_sums[size_t(ip)] == doctest::Approx(outflow ? 1.0 : 0.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("pressure convection-diffusion composes its terms") {
  Mesh cav = build_unit_square(3, ElementKind::triangle, 1);
  DofMap dm = make_dofmap(cav);
  double nu = 0.3;
  Vector w0(size_t(dm.n_velocity()), 0.0);

  SparseMatrix ap = assemble_pressure_laplacian(cav, dm, BcStrategy::bc2);
  SparseMatrix fp = assemble_pressure_convdiff(cav, dm, w0, nu, std::nullopt,
                                               BcStrategy::bc2);
  SparseMatrix diff = add(1.0, fp, -nu, ap);
  CHECK(testsup::max_abs(diff.values()) <= 1e-14);

  // dt = 0.5: mass coefficient 3/(2 dt) = 3.
  SparseMatrix mp = assemble_mass(cav, dm, Field::pressure);
  SparseMatrix fp_t = assemble_pressure_convdiff(cav, dm, w0, nu, 3.0, BcStrategy::bc2);
  SparseMatrix expect = add(3.0, mp, nu, ap);
  SparseMatrix diff_t = add(1.0, fp_t, -1.0, expect);
  CHECK(testsup::max_abs(diff_t.values()) <= 1e-13);
}

TEST_CASE("Robin term equals the scaled inlet edge mass matrix") {
  Mesh step = build_bfs(2, 1, ElementKind::quadrilateral, 1);
  DofMap dm = make_dofmap(step);
  Vector w(size_t(dm.n_velocity()), 0.0);
  for (int n = 0; n < dm.n_nodes; ++n) w[size_t(dm.vdof(n, 0))] = 1.0;  // w.n = -1 at inlet

  // bc1 has no Robin term, bc2 adds it on the inlet; everything else in the
  // two operators is identical, so the difference isolates the edge mass.
  SparseMatrix fp1 = assemble_pressure_convdiff(step, dm, w, 0.1, std::nullopt,
                                                BcStrategy::bc1);
  SparseMatrix fp2 = assemble_pressure_convdiff(step, dm, w, 0.1, std::nullopt,
                                                BcStrategy::bc2);
  SparseMatrix robin = add(1.0, fp2, -1.0, fp1);

  int p00 = -1, p01 = -1;
  for (int n = 0; n < step.n_nodes(); ++n) {
    const auto& p = step.nodes[size_t(n)];
    if (std::abs(p[0]) < 1e-12 && std::abs(p[1]) < 1e-12) p00 = dm.pressure_index[size_t(n)];
    if (std::abs(p[0]) < 1e-12 && std::abs(p[1] - 1.0) < 1e-12)
      p01 = dm.pressure_index[size_t(n)];
  }
  REQUIRE(p00 >= 0);
  REQUIRE(p01 >= 0);
  CHECK(robin.at(p00, p00) == doctest::Approx(-1.0 / 3.0).epsilon(1e-13));
  CHECK(robin.at(p01, p01) == doctest::Approx(-1.0 / 3.0).epsilon(1e-13));
  CHECK(robin.at(p00, p01) == doctest::Approx(-1.0 / 6.0).epsilon(1e-13));
  CHECK(robin.at(p01, p00) == doctest::Approx(-1.0 / 6.0).epsilon(1e-13));
  double off_support = 0.0;
  for (int i = 0; i < robin.rows(); ++i) {
    for (int k = robin.row_offsets()[i]; k < robin.row_offsets()[i + 1]; ++k) {
      int j = robin.col_indices()[size_t(k)];
      bool on_edge = (i == p00 || i == p01) && (j == p00 || j == p01);
      if (!on_edge) off_support = std::max(off_support, std::abs(robin.values()[size_t(k)]));
    }
  }
  CHECK(off_support <= 1e-14);
}

TEST_CASE("equal-order stabilization annihilates constants and is PSD") {
  Mesh mesh = build_unit_square(4, ElementKind::triangle, 1);
  DofMap dm = make_dofmap(mesh);
  SparseMatrix c = assemble_bd_stabilization(mesh, dm, 2.0);
  Vector ones(size_t(dm.n_pressure()), 1.0);
  CHECK(testsup::max_abs(spmv(c, ones)) <= 1e-13);

  Eigen::MatrixXd cd = testsup::to_dense(c);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (cd + cd.transpose()));
  CHECK(es.eigenvalues().minCoeff() >= -1e-12);
}

TEST_CASE("stabilization element matrix on the reference triangle") {
  Mesh mesh = reference_triangle_mesh();
  DofMap dm = make_dofmap(mesh);
  SparseMatrix c = assemble_bd_stabilization(mesh, dm, 1.0);
  // (1/nu) int (psi_i - 1/3)(psi_j - 1/3): diagonal 1/36, off-diagonal -1/72.
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double expect = (i == j) ? 1.0 / 36.0 : -1.0 / 72.0;
      CHECK(c.at(i, j) == doctest::Approx(expect).epsilon(1e-13));
    }
  }
}

TEST_CASE("picard and newton linearizations coincide at zero velocity") {
  ProblemSetup prob = make_cavity(2, 100.0, 4, ElementKind::triangle, 1);
  AssemblyState st;
  st.X.assign(size_t(prob.dofmap.n_total()), 0.0);
  st.nu = prob.nu;
  st.stabilized = prob.stabilized;
  SaddleSystem picard = assemble_saddle(prob.mesh, prob.dofmap, st, LinearizationMode::picard);
  SaddleSystem newton = assemble_saddle(prob.mesh, prob.dofmap, st, LinearizationMode::newton);
  REQUIRE(picard.op.F.nnz() == newton.op.F.nnz());
  CHECK(testsup::max_abs_diff(picard.op.F.values(), newton.op.F.values()) == 0.0);
}

TEST_CASE("Jacobian matches central finite differences of the residual") {
  ProblemSetup prob = make_cavity(2, 100.0, 4, ElementKind::triangle, 2);
  const int n = prob.dofmap.n_total();
  Vector x0 = testsup::random_vector(n, 99);
  for (double& v : x0) v *= 0.5;
  apply_dirichlet_values(prob.dofmap, x0);

  auto residual_at = [&](const Vector& x) {
    AssemblyState st;
    st.X = x;
    st.nu = prob.nu;
    st.stabilized = prob.stabilized;
    return assemble_saddle(prob.mesh, prob.dofmap, st, LinearizationMode::newton);
  };

  SaddleSystem sys = assemble_saddle(
      prob.mesh, prob.dofmap,
      [&] {
        AssemblyState st;
        st.X = x0;
        st.nu = prob.nu;
        st.stabilized = prob.stabilized;
        return st;
      }(),
      LinearizationMode::newton);

  Vector delta = testsup::random_vector(n, 7);
  double dn = norm2(delta);
  for (double& v : delta) v /= dn;
  Vector jd = sys.op.apply(delta);

  for (double eps : {1e-3, 1e-4}) {
    Vector xp = x0, xm = x0;
    axpy(eps, delta, xp);
    axpy(-eps, delta, xm);
    Vector rp = residual_at(xp).residual;
    Vector rm = residual_at(xm).residual;
    Vector fd(size_t(n));
    for (int i = 0; i < n; ++i) {
      fd[size_t(i)] = (rp[size_t(i)] - rm[size_t(i)]) / (2.0 * eps) - jd[size_t(i)];
    }
    CHECK(norm2(fd) <= 1.0 * eps * eps + 1e-7);
  }
}

TEST_CASE("Dirichlet rows of the residual vanish at prescribed values") {
  ProblemSetup prob = make_cavity(2, 50.0, 3, ElementKind::quadrilateral, 1);
  Vector x(size_t(prob.dofmap.n_total()), 0.0);
  apply_dirichlet_values(prob.dofmap, x);
  Vector once = x;
  apply_dirichlet_values(prob.dofmap, once);
  CHECK(testsup::max_abs_diff(x, once) == 0.0);

  AssemblyState st;
  st.X = x;
  st.nu = prob.nu;
  st.stabilized = prob.stabilized;
  SaddleSystem sys = assemble_saddle(prob.mesh, prob.dofmap, st, LinearizationMode::newton);
  for (int d : prob.dofmap.dirichlet_dofs) {
    CHECK(sys.residual[size_t(d)] == 0.0);
  }
}

TEST_CASE("manufactured Stokes solution is reproduced to discretization error") {
  double e4 = testsup::manufactured_stokes_velocity_error(4);
  double e8 = testsup::manufactured_stokes_velocity_error(8);
  CHECK(e8 < 0.02);
  CHECK(e8 < e4 / 4.0);
}

TEST_CASE("inflow profile values") {
  auto center = inflow_profile_bfs({0.0, 0.5, 0.5}, 1.0, 3);
  CHECK(center[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(center[1] == 0.0);
  CHECK(center[2] == 0.0);

  auto rim = inflow_profile_bfs({0.0, 0.0, 0.3}, 1.0, 3);
  CHECK(rim[0] == 0.0);

  auto quarter = inflow_profile_bfs({0.0, 0.25, 0.5}, 1.0, 3);
  CHECK(quarter[0] == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("step Reynolds number arithmetic") {
  CHECK(reynolds_bfs(1.0, 0.01) == doctest::Approx(200.0).epsilon(1e-15));
  CHECK(reynolds_bfs(1.0, 0.000625) == doctest::Approx(3200.0).epsilon(1e-15));
  CHECK(reynolds_bfs(0.0, 0.5) == 0.0);
}

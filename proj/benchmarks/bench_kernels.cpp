// Compares the serial reference path against the OpenMP path for the two
// parallel kernels (FE assembly, Schwarz application) and reports the
// max-abs difference between their results.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>

#include "solverkit/exec_mode.hpp"
#include "solverkit/fe_assembly.hpp"
#include "solverkit/problems.hpp"
#include "solverkit/schwarz.hpp"

using namespace solverkit;

namespace {

double time_best_of(int reps, const std::function<void()>& fn) {
  double best = 1e300;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (s < best) best = s;
  }
  return best;
}

double max_abs_diff(const Vector& a, const Vector& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

void print_row(const char* kernel, double serial_s, double parallel_s, double diff) {
  std::printf("%-18s %12.3f %12.3f %10.2fx %14.3e\n", kernel, serial_s * 1e3,
              parallel_s * 1e3, serial_s / parallel_s, diff);
}

}  // namespace

int main() {
  const ProblemSetup prob = make_cavity(2, 100.0, 64, ElementKind::quadrilateral, 1);
  const Mesh& mesh = prob.mesh;
  const DofMap& dofmap = prob.dofmap;

  AssemblyState st;
  st.X.assign(dofmap.n_total(), 0.0);
  apply_dirichlet_values(dofmap, st.X);
  st.nu = prob.nu;
  st.stabilized = prob.stabilized;

  std::printf("threads: %d\n", exec::threads());
  std::printf("%-18s %12s %12s %10s %14s\n", "kernel", "serial ms", "parallel ms",
              "speedup", "max |diff|");

  // FE assembly of the full saddle system.
  SaddleSystem sys_serial, sys_parallel;
  exec::set_serial(true);
  const double t_asm_serial = time_best_of(3, [&] {
    sys_serial = assemble_saddle(mesh, dofmap, st, LinearizationMode::newton);
  });
  exec::set_serial(false);
  const double t_asm_parallel = time_best_of(3, [&] {
    sys_parallel = assemble_saddle(mesh, dofmap, st, LinearizationMode::newton);
  });
  print_row("assembly", t_asm_serial, t_asm_parallel,
            max_abs_diff(sys_serial.op.monolithic().values(),
                         sys_parallel.op.monolithic().values()));

  // Two-level monolithic Schwarz setup + application.
  const SparseMatrix k = sys_parallel.op.monolithic();
  const Partition part = partition_structured(mesh, {4, 4, 1});
  const SchwarzSpace space = make_monolithic_space(mesh, part, dofmap, prob.enclosed);
  SchwarzConfig cfg;

  Vector r(k.rows());
  for (size_t i = 0; i < r.size(); ++i) r[i] = std::sin(0.37 * double(i + 1));

  exec::set_serial(true);
  SchwarzPreconditioner p_serial;
  const double t_setup_serial =
      time_best_of(2, [&] { p_serial = setup_schwarz(k, space, cfg); });
  Vector z_serial;
  const double t_apply_serial = time_best_of(5, [&] { z_serial = p_serial.apply(r); });

  exec::set_serial(false);
  SchwarzPreconditioner p_parallel;
  const double t_setup_parallel =
      time_best_of(2, [&] { p_parallel = setup_schwarz(k, space, cfg); });
  Vector z_parallel;
  const double t_apply_parallel = time_best_of(5, [&] { z_parallel = p_parallel.apply(r); });

  print_row("schwarz setup", t_setup_serial, t_setup_parallel, 0.0);
  print_row("schwarz apply", t_apply_serial, t_apply_parallel,
            max_abs_diff(z_serial, z_parallel));
  return 0;
}

#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "solverkit/block_precond.hpp"
#include "solverkit/nonlinear.hpp"
#include "solverkit/schwarz.hpp"

namespace solverkit {

// Which preconditioner family drives the Krylov solve.
enum class PrecondType {
  monolithic,
  pcd,
  lsc,
  bfbt,
  lsc_ap,
  lsc_stab_ap,
  simple,
  simplec,
  diagonal,
};

// How the velocity block and Schur approximations are inverted inside
// block preconditioners: overlapping Schwarz or a direct factorization.
enum class InnerInverse { schwarz, exact };

struct RunConfig {
  int schema_version = 1;
  std::string name = "run";

  // Problem selection.
  std::string problem = "cavity";  // cavity | bfs
  int dim = 2;
  std::string discretization = "p2p1";  // p1p1 | p2p1 | q1q1 | q2q1
  int cells_per_subdomain = 8;          // H/h along each axis
  int subdomains_per_unit = 2;          // per axis inside each unit box
  bool stationary = true;
  bool stokes = false;  // drop all advective terms (affine residual)
  double nu = 1.0;
  double reynolds = 0.0;  // > 0: cavity nu = 1/Re, bfs nu = 2 v_max / Re
  double v_max = 1.0;     // bfs inflow peak
  double dt = 0.05;
  double t_end = 0.25;
  int threads = 0;  // 0: library default
  long seed = 0;    // echoed into reports

  PrecondType precond = PrecondType::monolithic;
  InnerInverse inner = InnerInverse::schwarz;
  SchwarzConfig schwarz;  // levels, overlap, coarse kinds, reuse policy
  int rebuild_first_k = -1;  // -1: default (stationary 3, transient 1)

  PcdConfig pcd;
  bool pcd_bc_explicit = false;          // JSON pinned pcd.bc
  bool pcd_mp_inverse_explicit = false;  // JSON pinned pcd.mp_inverse
  bool pressure_projection_explicit = false;
  LscConfig lsc;
  SimpleConfig simple;

  NewtonConfig newton;
};

// Parses and validates a JSON config document; throws std::invalid_argument
// with a field path on malformed input.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config_file(const std::string& path);

// Per-Newton-step record, flattened across time steps for transient runs.
struct StepRecord {
  int time_step = 0;  // 0 for stationary
  double time = 0.0;
  int newton_step = 0;
  double residual_norm = 0.0;
  double eta = 0.0;
  int gmres_iterations = 0;
  double gmres_relative_residual = 0.0;
  int backtracks = 0;
  double update_norm = 0.0;
};

struct TimeStepRecord {
  int index = 0;
  double time = 0.0;
  double cfl_max = 0.0;
  double cfl_avg = 0.0;
  int newton_steps = 0;
  int gmres_total = 0;
  double mean_gmres = 0.0;
  bool converged = false;
};

struct RunReport {
  bool converged = false;
  std::string failure;  // empty when converged

  int n_velocity = 0;
  int n_pressure = 0;
  int n_subdomains = 0;
  std::pair<int, int> coarse_dims{0, 0};  // velocity, pressure columns

  long total_gmres = 0;
  int total_newton = 0;
  double avg_gmres = 0.0;  // total_gmres / total_newton

  double setup_seconds = 0.0;  // preconditioner construction
  double solve_seconds = 0.0;  // accumulated Krylov time
  double total_seconds = 0.0;
  bool timings_suppressed = false;  // serial mode zeroes wall clocks

  std::vector<StepRecord> steps;
  std::vector<TimeStepRecord> time_steps;  // empty for stationary runs

  std::vector<double> solution;  // final state vector

  std::string report_json;  // deterministic serialization of the above
  std::string report_csv;
};

RunReport run(const RunConfig& cfg);

// Parameter sweep around a base config. Axes:
//   subdomains  : subdomains_per_unit per value
//   reynolds_nu : Reynolds number adjusted through the viscosity
//   reynolds_v  : Reynolds number adjusted through the inflow peak (bfs)
//   cfl         : dt chosen so the structured CFL estimate hits the value
struct SweepRow {
  double value = 0.0;
  RunReport report;
};

struct SweepResult {
  std::string axis;
  std::vector<SweepRow> rows;
  std::string summary_csv;
};

SweepResult sweep(const RunConfig& base, const std::string& axis,
                  const std::vector<double>& values);

// Writes <name>.report.json and <name>.csv under out_dir; creates the
// directory if needed. Returns the JSON path.
std::string write_report_files(const RunReport& report, const std::string& out_dir,
                               const std::string& name);
std::string write_sweep_files(const SweepResult& sweep_result, const std::string& out_dir,
                              const std::string& name);

}  // namespace solverkit

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "solverkit/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Incompressible flow solver kit: preconditioned Newton-Krylov runs"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  std::string axis;
  std::vector<double> values;

  CLI::App* run_cmd = app.add_subcommand("run", "Run one configuration");
  run_cmd->add_option("config", config_path, "JSON configuration file")->required();
  run_cmd->add_option("--out-dir", out_dir, "Directory for the report files");

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "Run a parameter sweep");
  sweep_cmd->add_option("config", config_path, "JSON configuration file")->required();
  sweep_cmd->add_option("--axis", axis, "subdomains | reynolds_nu | reynolds_v | cfl")
      ->required();
  sweep_cmd->add_option("--values", values, "Comma-separated axis values")
      ->delimiter(',');
  sweep_cmd->add_option("--out-dir", out_dir, "Directory for the report files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const solverkit::RunConfig cfg = solverkit::load_config_file(config_path);
    if (run_cmd->parsed()) {
      const solverkit::RunReport rep = solverkit::run(cfg);
      const std::string path = solverkit::write_report_files(rep, out_dir, cfg.name);
      std::printf("run %s: %s, %d newton steps, %ld gmres iterations (avg %.2f)\n",
                  cfg.name.c_str(), rep.converged ? "converged" : "NOT CONVERGED",
                  rep.total_newton, rep.total_gmres, rep.avg_gmres);
      if (!rep.converged) std::printf("failure: %s\n", rep.failure.c_str());
      std::printf("report: %s\n", path.c_str());
      return rep.converged ? 0 : 2;
    }
    const solverkit::SweepResult sw = solverkit::sweep(cfg, axis, values);
    const std::string path = solverkit::write_sweep_files(sw, out_dir, cfg.name);
    bool all_ok = true;
    for (const auto& row : sw.rows) {
      std::printf("sweep %s=%g: %s, avg gmres %.2f\n", axis.c_str(), row.value,
                  row.report.converged ? "converged" : "NOT CONVERGED", row.report.avg_gmres);
      all_ok = all_ok && row.report.converged;
    }
    std::printf("summary: %s\n", path.c_str());
    return all_ok ? 0 : 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

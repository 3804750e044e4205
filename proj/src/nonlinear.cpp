#include "solverkit/nonlinear.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace solverkit {
namespace {

void validate(const NewtonConfig& cfg) {
  const ForcingConfig& f = cfg.forcing;
  auto in_unit = [](double v) { return v >= 0.0 && v < 1.0; };
  if (!in_unit(f.eta0) || !in_unit(f.eta_min) || !in_unit(f.eta_max))
    throw std::invalid_argument("forcing terms must lie in [0, 1)");
  if (!(f.alpha > 1.0 && f.alpha <= 2.0))
    throw std::invalid_argument("forcing exponent must lie in (1, 2]");
  if (!(f.gamma >= 0.0 && f.gamma <= 1.0))
    throw std::invalid_argument("forcing factor must lie in [0, 1]");
  if (cfg.max_steps < 1) throw std::invalid_argument("max_steps must be positive");
}

}  // namespace

double forcing_choice2(double r_norm, double r_prev_norm, double eta_prev,
                       const ForcingConfig& cfg) {
  if (r_prev_norm == 0.0) return cfg.eta_min;
  double raw = cfg.gamma * std::pow(r_norm / r_prev_norm, cfg.alpha);
  double lower = std::max(cfg.gamma * std::pow(eta_prev, cfg.alpha), cfg.eta_min);
  return std::min(std::max(raw, lower), cfg.eta_max);
}

NewtonReport newton_solve(const NewtonProblem& problem, Vector& x, const NewtonConfig& cfg) {
  validate(cfg);
  NewtonReport report;
  double r0 = 0.0;
  double prev_norm = 0.0;
  double eta_prev = cfg.forcing.eta0;

  for (int k = 0; k < cfg.max_steps + 1; ++k) {
    NewtonSystem sys = problem.assemble(x, k);
    double rnorm = norm2(sys.residual);
    if (k == 0) {
      r0 = rnorm;
      report.initial_residual_norm = r0;
      if (r0 == 0.0) {
        report.converged = true;
        return report;
      }
    }
    report.final_residual_norm = rnorm;
    if (rnorm <= cfg.residual_tol * r0) {
      report.converged = true;
      return report;
    }
    if (k == cfg.max_steps) break;  // assembled only to evaluate convergence

    double eta = cfg.fixed_forcing
                     ? *cfg.fixed_forcing
                     : (k == 0 ? cfg.forcing.eta0
                               : forcing_choice2(rnorm, prev_norm, eta_prev, cfg.forcing));

    GmresConfig gcfg;
    gcfg.rel_tol = eta;
    gcfg.max_iter = cfg.gmres_max_iter;
    gcfg.restart = cfg.gmres_restart;
    Vector b = sys.residual;
    for (double& v : b) v = -v;
    Vector zero(problem.n, 0.0);
    auto t_solve = std::chrono::steady_clock::now();
    auto [dx, stats] = gmres(sys.jacobian, sys.preconditioner, b, zero, gcfg);
    double gmres_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_solve).count();

    double t = cfg.line_search.initial;
    int backtracks = 0;
    bool accepted = false;
    Vector trial(x.size());
    while (backtracks <= cfg.line_search.max_backtracks) {
      trial = x;
      axpy(t, dx, trial);
      double trial_norm = norm2(problem.residual_only(trial));
      if (trial_norm <= (1.0 - cfg.line_search.sufficient_decrease * t) * rnorm) {
        accepted = true;
        break;
      }
      t *= cfg.line_search.contraction;
      ++backtracks;
    }

    NewtonStepStats st;
    st.step = k;
    st.residual_norm = rnorm;
    st.eta = eta;
    st.gmres_iterations = stats.iterations;
    st.gmres_relative_residual = stats.final_relative_residual;
    st.backtracks = backtracks;
    st.step_length = t;
    st.gmres_seconds = gmres_seconds;

    if (!accepted) {
      report.step_stats.push_back(st);
      report.failure = "line search failed to find sufficient decrease at step " +
                       std::to_string(k);
      return report;
    }

    x = trial;
    st.update_norm = t * norm2(dx);
    report.step_stats.push_back(st);
    report.steps = k + 1;
    prev_norm = rnorm;
    eta_prev = eta;

    if (st.update_norm <= cfg.update_tol) {
      report.final_residual_norm = norm2(problem.residual_only(x));
      report.converged = true;
      return report;
    }
  }

  report.failure = "no convergence within " + std::to_string(cfg.max_steps) +
                   " Newton steps";
  return report;
}

}  // namespace solverkit

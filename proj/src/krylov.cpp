#include "solverkit/krylov.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cassert>
#include <cmath>
#include <complex>
#include <random>

namespace solverkit {

namespace {

struct CycleResult {
  Vector x;
  int iterations = 0;
  bool converged = false;
  bool breakdown = false;
};

// One non-restarted GMRES cycle. scale0 normalizes reported residuals.
CycleResult gmres_cycle(const LinOp& A, const LinOp& M, const Vector& b,
                        const Vector& x0, double rel_tol, int max_iter, double scale0,
                        std::vector<double>* history) {
  const std::size_t n = b.size();
  CycleResult res;
  res.x = x0;

  Vector r = A(x0);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
  const double beta = norm2(r);
  if (beta == 0.0 || beta / scale0 <= rel_tol) {
    res.converged = true;
    return res;
  }

  std::vector<Vector> V;
  V.push_back(scaled(r, 1.0 / beta));
  std::vector<std::vector<double>> H;  // H[k] holds column k, k+2 entries
  std::vector<double> cs, sn;
  std::vector<double> g{beta};

  const double breakdown_tol = 1e-14 * beta;
  int k = 0;
  for (; k < max_iter; ++k) {
    Vector z = M ? M(V[k]) : V[k];
    Vector w = A(z);
    const double wnorm_before = norm2(w);
    std::vector<double> h(static_cast<std::size_t>(k) + 2, 0.0);
    for (int i = 0; i <= k; ++i) {
      const double hik = dot(V[i], w);
      h[i] = hik;
      axpy(-hik, V[i], w);
    }
    double wnorm = norm2(w);
    if (wnorm < wnorm_before / std::sqrt(2.0)) {
      for (int i = 0; i <= k; ++i) {
        const double corr = dot(V[i], w);
        h[i] += corr;
        axpy(-corr, V[i], w);
      }
      wnorm = norm2(w);
    }
    h[k + 1] = wnorm;

    const bool lucky = wnorm <= breakdown_tol;
    if (!lucky) V.push_back(scaled(w, 1.0 / wnorm));

    // Apply accumulated rotations, then a new one.
    for (int i = 0; i < k; ++i) {
      const double t = cs[i] * h[i] + sn[i] * h[i + 1];
      h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1];
      h[i] = t;
    }
    const double denom = std::hypot(h[k], h[k + 1]);
    const double c = (denom == 0.0) ? 1.0 : h[k] / denom;
    const double s = (denom == 0.0) ? 0.0 : h[k + 1] / denom;
    cs.push_back(c);
    sn.push_back(s);
    h[k] = denom;
    h[k + 1] = 0.0;
    H.push_back(h);
    g.push_back(-s * g[k]);
    g[k] = c * g[k];

    const double est = std::abs(g[k + 1]);
    if (history) history->push_back(est / scale0);

    if (lucky || est / scale0 <= rel_tol) {
      res.converged = true;
      res.breakdown = lucky;
      ++k;
      break;
    }
  }

  res.iterations = k;
  if (k == 0) return res;

  // Back substitution on the triangularized system.
  std::vector<double> y(static_cast<std::size_t>(k), 0.0);
  for (int i = k - 1; i >= 0; --i) {
    double s = g[i];
    for (int j = i + 1; j < k; ++j) s -= H[j][i] * y[j];
    y[i] = s / H[i][i];
  }
  Vector update(n, 0.0);
  for (int j = 0; j < k; ++j) axpy(y[j], V[j], update);
  if (M) update = M(update);
  for (std::size_t i = 0; i < n; ++i) res.x[i] += update[i];
  return res;
}

}  // namespace

std::pair<Vector, SolveStats> gmres(const LinOp& A, const LinOp& M, const Vector& b,
                                    const Vector& x0, const GmresConfig& cfg) {
  assert(b.size() == x0.size());
  SolveStats stats;

  Vector r0 = A(x0);
  for (std::size_t i = 0; i < b.size(); ++i) r0[i] = b[i] - r0[i];
  const double scale0 = norm2(r0);
  if (scale0 == 0.0) {
    stats.converged = true;
    return {x0, stats};
  }

  Vector x = x0;
  const int cycle_len = (cfg.restart > 0) ? cfg.restart : cfg.max_iter;
  while (stats.iterations < cfg.max_iter) {
    const int budget = std::min(cycle_len, cfg.max_iter - stats.iterations);
    auto cyc = gmres_cycle(A, M, b, x, cfg.rel_tol, budget, scale0, &stats.history);
    x = cyc.x;
    stats.iterations += cyc.iterations;
    stats.breakdown_exact = cyc.breakdown;
    if (cyc.converged) {
      stats.converged = true;
      break;
    }
    if (cyc.iterations == 0) break;
  }

  Vector rf = A(x);
  for (std::size_t i = 0; i < b.size(); ++i) rf[i] = b[i] - rf[i];
  stats.final_relative_residual = norm2(rf) / scale0;
  return {x, stats};
}

SpectralRadiusEstimate estimate_spectral_radius(const LinOp& op, int n, double rel_tol,
                                                int max_matvecs) {
  SpectralRadiusEstimate out;
  if (n <= 0) return out;

  std::mt19937 rng(12345u);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Vector v(static_cast<std::size_t>(n));
  for (double& x : v) x = dist(rng);
  const double nrm = norm2(v);
  for (double& x : v) x /= nrm;

  std::vector<Vector> V{v};
  const int m_max = std::min(n, max_matvecs);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m_max + 1, m_max);

  for (int k = 0; k < m_max; ++k) {
    Vector w = op(V[k]);
    ++out.matvecs;
    const double before = norm2(w);
    for (int i = 0; i <= k; ++i) {
      const double h = dot(V[i], w);
      H(i, k) += h;
      axpy(-h, V[i], w);
    }
    double wn = norm2(w);
    if (wn < before / std::sqrt(2.0)) {
      for (int i = 0; i <= k; ++i) {
        const double c = dot(V[i], w);
        H(i, k) += c;
        axpy(-c, V[i], w);
      }
      wn = norm2(w);
    }
    H(k + 1, k) = wn;

    const int m = k + 1;
    Eigen::EigenSolver<Eigen::MatrixXd> es(H.topLeftCorner(m, m));
    int best = 0;
    double best_mag = 0.0;
    for (int i = 0; i < m; ++i) {
      const double mag = std::abs(es.eigenvalues()(i));
      if (mag > best_mag) {
        best_mag = mag;
        best = i;
      }
    }
    out.value = best_mag;
    if (best_mag > 0.0) {
      Eigen::VectorXcd y = es.eigenvectors().col(best);
      y /= y.norm();
      const double resid = wn * std::abs(y(m - 1));
      if (resid <= rel_tol * best_mag) {
        out.converged = true;
        return out;
      }
    }
    if (wn <= 1e-14) {
      // Invariant subspace: the Ritz values are exact.
      out.converged = true;
      return out;
    }
    V.push_back(scaled(w, 1.0 / wn));
  }
  return out;
}

}  // namespace solverkit

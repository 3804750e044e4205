#include "solverkit/block_precond.hpp"

#include <cmath>
#include <stdexcept>

#include "solverkit/factorization.hpp"
#include "solverkit/krylov.hpp"

namespace solverkit {

InverseOp::InverseOp(std::string name, std::function<Vector(const Vector&)> fn)
    : name_(std::move(name)), fn_(std::move(fn)) {}

Vector InverseOp::apply(const Vector& x) const {
  calls_->fetch_add(1, std::memory_order_relaxed);
  return fn_(x);
}

long InverseOp::calls() const { return calls_->load(std::memory_order_relaxed); }

void InverseOp::reset_calls() const { calls_->store(0, std::memory_order_relaxed); }

InverseOp make_factorized_inverse(std::string name, const SparseMatrix& m) {
  Factorization fact(m, name);
  return InverseOp(std::move(name),
                   [fact](const Vector& x) { return fact.solve(x); });
}

InverseOp make_schwarz_inverse(std::string name, SchwarzPreconditioner p) {
  return InverseOp(std::move(name),
                   [p](const Vector& x) { return p.apply(x); });
}

InverseOp make_diagonal_scaling_inverse(std::string name, Vector entrywise_inverse) {
  return InverseOp(std::move(name), [d = std::move(entrywise_inverse)](const Vector& x) {
    return hadamard(d, x);
  });
}

ScalingKind effective_scaling(const LscConfig& cfg) {
  return cfg.variant == LscVariant::bfbt ? ScalingKind::identity : cfg.scaling;
}

Vector scaling_vector(const SparseMatrix& m, ScalingKind kind) {
  switch (kind) {
    case ScalingKind::diagonal:
      return diag_inverse(m);
    case ScalingKind::absrowsum:
      return absrowsum_inverse(m);
    case ScalingKind::identity:
      return Vector(m.rows(), 1.0);
  }
  return {};
}

SparseMatrix form_poisson_proxy(const SaddleOperator& op, const Vector& h, double gamma) {
  SparseMatrix bhbt = matmul(scale_columns(op.B, h), op.Bt);
  if (gamma != 0.0 && op.C.nnz() > 0) return add(1.0, bhbt, gamma, op.C);
  return bhbt;
}

SparseMatrix form_simple_schur(const SaddleOperator& op, const Vector& h_f) {
  SparseMatrix bhbt = matmul(scale_columns(op.B, h_f), op.Bt);
  return add(-1.0, op.C, -1.0, bhbt);
}

LscScalars compute_lsc_scalars(const SaddleOperator& op, const Vector& h_mu) {
  LscScalars out;
  auto hf = [&](const Vector& x) { return spmv(op.F, hadamard(h_mu, x)); };
  SpectralRadiusEstimate rho_hf = estimate_spectral_radius(hf, op.n_u());
  out.gamma = rho_hf.value / 3.0;

  Vector f_diag_inv = diag_inverse(op.F);
  SparseMatrix s0 = form_poisson_proxy(op, f_diag_inv, 0.0);  // B diag(F)^{-1} B^T
  SparseMatrix s_diag = add(-1.0, s0, -1.0, op.C);
  Vector d = diagonal_of(s_diag);
  out.d_inverse.resize(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] == 0.0)
      throw SingularMatrixError("diagonal Schur estimate has a zero at row " +
                                std::to_string(i));
    out.d_inverse[i] = 1.0 / d[i];
  }

  auto s0dinv = [&](const Vector& x) {
    Vector y = spmv(s0, hadamard(out.d_inverse, x));
    for (double& v : y) v = -v;
    return y;
  };
  SpectralRadiusEstimate rho_sd = estimate_spectral_radius(s0dinv, op.n_p());
  if (rho_sd.value == 0.0)
    throw SingularMatrixError("spectral radius estimate for the stabilization factor is zero");
  out.alpha = -1.0 / rho_sd.value;
  out.estimator_converged = rho_hf.converged && rho_sd.converged;
  return out;
}

struct BlockPreconditioner::Impl {
  SaddleOperator op;
  InverseOp f_inv;
  std::function<Vector(const Vector&)> schur_inv;
  BlockStructure structure = BlockStructure::triangular;
  std::vector<InverseOp> tracked;
  std::optional<LscScalars> scalars;
  // SIMPLE-specific pieces; simple==false leaves them unused.
  bool simple = false;
  double alpha = 1.0;
  Vector h_f;
};

Vector BlockPreconditioner::apply(const Vector& r) const {
  const Impl& d = *impl_;
  Vector fu = d.op.velocity_part(r);
  Vector fp = d.op.pressure_part(r);

  if (d.simple) {
    Vector ustar = d.f_inv.apply(fu);
    Vector bu = spmv(d.op.B, ustar);
    for (std::size_t i = 0; i < fp.size(); ++i) fp[i] -= bu[i];
    Vector p = d.schur_inv(fp);
    for (double& v : p) v *= d.alpha;
    Vector btp = spmv(d.op.Bt, p);
    Vector u = ustar;
    for (std::size_t i = 0; i < u.size(); ++i) u[i] -= d.h_f[i] * btp[i] / d.alpha;
    return SaddleOperator::stack(u, p);
  }

  switch (d.structure) {
    case BlockStructure::triangular: {
      Vector p = d.schur_inv(fp);
      Vector btp = spmv(d.op.Bt, p);
      for (std::size_t i = 0; i < fu.size(); ++i) fu[i] -= btp[i];
      Vector u = d.f_inv.apply(fu);
      return SaddleOperator::stack(u, p);
    }
    case BlockStructure::ldu: {
      Vector v = d.f_inv.apply(fu);
      Vector bv = spmv(d.op.B, v);
      for (std::size_t i = 0; i < fp.size(); ++i) fp[i] -= bv[i];
      Vector p = d.schur_inv(fp);
      Vector corr = d.f_inv.apply(spmv(d.op.Bt, p));
      Vector u = v;
      for (std::size_t i = 0; i < u.size(); ++i) u[i] -= corr[i];
      return SaddleOperator::stack(u, p);
    }
    case BlockStructure::diagonal: {
      Vector u = d.f_inv.apply(fu);
      Vector p = d.schur_inv(fp);
      return SaddleOperator::stack(u, p);
    }
  }
  return r;
}

std::vector<std::pair<std::string, long>> BlockPreconditioner::call_counts() const {
  std::vector<std::pair<std::string, long>> out;
  if (!impl_) return out;
  for (const InverseOp& op : impl_->tracked) out.emplace_back(op.name(), op.calls());
  return out;
}

void BlockPreconditioner::reset_counts() const {
  if (!impl_) return;
  for (const InverseOp& op : impl_->tracked) op.reset_calls();
}

const std::optional<LscScalars>& BlockPreconditioner::lsc_scalars() const {
  static const std::optional<LscScalars> none;
  return impl_ ? impl_->scalars : none;
}

BlockPreconditioner make_pcd(const SaddleOperator& op, InverseOp f_inv, InverseOp ap_inv,
                             InverseOp mp_inv, const SparseMatrix& fp,
                             const PcdConfig& cfg) {
  if (!f_inv.valid() || !ap_inv.valid() || !mp_inv.valid())
    throw std::invalid_argument("pcd: missing inverse operator");
  auto impl = std::make_shared<BlockPreconditioner::Impl>();
  impl->op = op;
  impl->f_inv = f_inv;
  impl->structure = cfg.structure == BlockStructure::ldu ? BlockStructure::ldu
                                                         : BlockStructure::triangular;
  SparseMatrix fp_copy = fp;
  bool flip = cfg.flip;
  impl->schur_inv = [ap_inv, mp_inv, fp_copy, flip](const Vector& f) {
    Vector t = flip ? mp_inv.apply(f) : ap_inv.apply(f);
    t = spmv(fp_copy, t);
    t = flip ? ap_inv.apply(t) : mp_inv.apply(t);
    for (double& v : t) v = -v;
    return t;
  };
  impl->tracked = {f_inv, ap_inv, mp_inv};
  return BlockPreconditioner(std::move(impl));
}

BlockPreconditioner make_lsc(const SaddleOperator& op, InverseOp f_inv,
                             InverseOp poisson_inv, InverseOp mu_inv,
                             const LscConfig& cfg, std::optional<LscScalars> scalars) {
  if (!f_inv.valid() || !poisson_inv.valid() || !mu_inv.valid())
    throw std::invalid_argument("lsc: missing inverse operator");
  if (cfg.variant == LscVariant::lsc_stab_ap && !scalars)
    throw std::invalid_argument("lsc: stabilized variant requires the computed scalars");
  auto impl = std::make_shared<BlockPreconditioner::Impl>();
  impl->op = op;
  impl->f_inv = f_inv;
  impl->structure = BlockStructure::triangular;
  impl->scalars = scalars;
  SparseMatrix F = op.F;
  SparseMatrix B = op.B;
  SparseMatrix Bt = op.Bt;
  impl->schur_inv = [poisson_inv, mu_inv, F, B, Bt, scalars](const Vector& f) {
    Vector a = poisson_inv.apply(f);
    Vector b = mu_inv.apply(spmv(Bt, a));
    Vector c = mu_inv.apply(spmv(F, b));
    Vector out = poisson_inv.apply(spmv(B, c));
    for (double& v : out) v = -v;
    if (scalars) {
      for (std::size_t i = 0; i < out.size(); ++i)
        out[i] -= scalars->alpha * scalars->d_inverse[i] * f[i];
    }
    return out;
  };
  impl->tracked = {f_inv, poisson_inv, mu_inv};
  return BlockPreconditioner(std::move(impl));
}

BlockPreconditioner make_simple(const SaddleOperator& op, InverseOp f_inv,
                                InverseOp schur_inv, const SimpleConfig& cfg,
                                Vector h_f) {
  if (!f_inv.valid() || !schur_inv.valid())
    throw std::invalid_argument("simple: missing inverse operator");
  if (!(cfg.alpha > 0.0 && cfg.alpha <= 1.0))
    throw std::invalid_argument("simple: alpha must lie in (0, 1]");
  if (static_cast<int>(h_f.size()) != op.n_u())
    throw std::invalid_argument("simple: H_F size does not match the velocity block");
  auto impl = std::make_shared<BlockPreconditioner::Impl>();
  impl->op = op;
  impl->f_inv = f_inv;
  impl->simple = true;
  impl->alpha = cfg.alpha;
  impl->h_f = std::move(h_f);
  impl->schur_inv = [schur_inv](const Vector& f) { return schur_inv.apply(f); };
  impl->tracked = {f_inv, schur_inv};
  return BlockPreconditioner(std::move(impl));
}

BlockPreconditioner make_diagonal_reference(const SaddleOperator& op, InverseOp f_inv,
                                            InverseOp mp_inv, double nu) {
  if (!f_inv.valid() || !mp_inv.valid())
    throw std::invalid_argument("diagonal reference: missing inverse operator");
  auto impl = std::make_shared<BlockPreconditioner::Impl>();
  impl->op = op;
  impl->f_inv = f_inv;
  impl->structure = BlockStructure::diagonal;
  impl->schur_inv = [mp_inv, nu](const Vector& f) {
    Vector p = mp_inv.apply(f);
    for (double& v : p) v *= -nu;
    return p;
  };
  impl->tracked = {f_inv, mp_inv};
  return BlockPreconditioner(std::move(impl));
}

}  // namespace solverkit

#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "solverkit/fe_assembly.hpp"
#include "solverkit/saddle.hpp"
#include "solverkit/schwarz.hpp"
#include "solverkit/sparse.hpp"

namespace solverkit {

// Counting wrapper around an approximate inverse. The counter makes the set
// of inverse approximations each strategy touches observable.
class InverseOp {
 public:
  InverseOp() = default;
  InverseOp(std::string name, std::function<Vector(const Vector&)> fn);

  Vector apply(const Vector& x) const;  // increments calls()
  const std::string& name() const { return name_; }
  long calls() const;
  void reset_calls() const;
  bool valid() const { return static_cast<bool>(fn_); }

 private:
  std::string name_;
  std::function<Vector(const Vector&)> fn_;
  std::shared_ptr<std::atomic<long>> calls_ = std::make_shared<std::atomic<long>>(0);
};

InverseOp make_factorized_inverse(std::string name, const SparseMatrix& m);
InverseOp make_schwarz_inverse(std::string name, SchwarzPreconditioner p);
// Entrywise multiplication by a precomputed inverse diagonal.
InverseOp make_diagonal_scaling_inverse(std::string name, Vector entrywise_inverse);

enum class BlockStructure { triangular, ldu, diagonal };
enum class MassInverseKind { schwarz, diagonal, absrowsum };
enum class ScalingKind { diagonal, absrowsum, identity };

struct PcdConfig {
  BcStrategy bc = BcStrategy::bc2;
  bool flip = true;  // S^{-1} = -Ap^{-1} Fp Mp^{-1}; false: -Mp^{-1} Fp Ap^{-1}
  MassInverseKind mp_inverse = MassInverseKind::absrowsum;
  BlockStructure structure = BlockStructure::triangular;
};

enum class LscVariant { lsc, bfbt, lsc_ap, lsc_stab_ap };

struct LscConfig {
  LscVariant variant = LscVariant::lsc;
  ScalingKind scaling = ScalingKind::absrowsum;
};

// bfbt is the identity-scaled special case.
ScalingKind effective_scaling(const LscConfig& cfg);

enum class SimpleVariant { simple, simplec };

struct SimpleConfig {
  SimpleVariant variant = SimpleVariant::simplec;
  double alpha = 0.9;  // must lie in (0, 1]
};

// Entrywise inverse scaling vector standing in for m^{-1}: inverse diagonal,
// inverse absolute row sums, or all ones.
Vector scaling_vector(const SparseMatrix& m, ScalingKind kind);

// B diag(h) B^T, plus gamma C when gamma != 0. Used for the least-squares
// commutator Poisson proxy and (with h from F) the diagonal Schur estimate.
SparseMatrix form_poisson_proxy(const SaddleOperator& op, const Vector& h, double gamma);

// S = -C - B diag(h_f) B^T.
SparseMatrix form_simple_schur(const SaddleOperator& op, const Vector& h_f);

// Constants of the stabilized least-squares commutator:
//   gamma = rho(H_mu F) / 3 with the configured diagonal approximation
//   standing in for M_u^{-1},
//   D = diag(-B diag(F)^{-1} B^T - C),
//   alpha = -1 / rho((-B diag(F)^{-1} B^T) D^{-1}).
struct LscScalars {
  double gamma = 0.0;
  double alpha = 0.0;
  Vector d_inverse;
  bool estimator_converged = true;
};

LscScalars compute_lsc_scalars(const SaddleOperator& op, const Vector& h_mu);

class BlockPreconditioner {
 public:
  struct Impl;

  BlockPreconditioner() = default;

  Vector apply(const Vector& r) const;
  bool valid() const { return impl_ != nullptr; }

  std::vector<std::pair<std::string, long>> call_counts() const;
  void reset_counts() const;
  const std::optional<LscScalars>& lsc_scalars() const;

 private:
  explicit BlockPreconditioner(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<const Impl> impl_;

  friend BlockPreconditioner make_pcd(const SaddleOperator&, InverseOp, InverseOp,
                                      InverseOp, const SparseMatrix&, const PcdConfig&);
  friend BlockPreconditioner make_lsc(const SaddleOperator&, InverseOp, InverseOp,
                                      InverseOp, const LscConfig&,
                                      std::optional<LscScalars>);
  friend BlockPreconditioner make_simple(const SaddleOperator&, InverseOp, InverseOp,
                                         const SimpleConfig&, Vector);
  friend BlockPreconditioner make_diagonal_reference(const SaddleOperator&, InverseOp,
                                                     InverseOp, double nu);
};

// Triangular (or LDU) application with S^{-1} = -Ap^{-1} Fp Mp^{-1} (flipped)
// or -Mp^{-1} Fp Ap^{-1}.
BlockPreconditioner make_pcd(const SaddleOperator& op, InverseOp f_inv, InverseOp ap_inv,
                             InverseOp mp_inv, const SparseMatrix& fp,
                             const PcdConfig& cfg);

// Triangular application with
//   S^{-1} = -P (B H F H B^T) P - alpha D^{-1},
// where P is poisson_inv ((B H B^T [+ gamma C])^{-1}, or Ap^{-1} for the _ap
// variants), H is applied through mu_inv, and the alpha D^{-1} term is
// present only when scalars are given (stabilized variant).
BlockPreconditioner make_lsc(const SaddleOperator& op, InverseOp f_inv,
                             InverseOp poisson_inv, InverseOp mu_inv,
                             const LscConfig& cfg,
                             std::optional<LscScalars> scalars = std::nullopt);

// Three-step application: u* = F^{-1} f_u; p = alpha S^{-1} (f_p - B u*);
// u = u* - (1/alpha) H_F B^T p.
BlockPreconditioner make_simple(const SaddleOperator& op, InverseOp f_inv,
                                InverseOp schur_inv, const SimpleConfig& cfg,
                                Vector h_f);

// Block-diagonal reference: u = F^{-1} f_u, p = -nu Mp^{-1} f_p.
BlockPreconditioner make_diagonal_reference(const SaddleOperator& op, InverseOp f_inv,
                                            InverseOp mp_inv, double nu);

}  // namespace solverkit

#pragma once

#include <limits>
#include <memory>
#include <optional>

#include "solverkit/coarse_spaces.hpp"
#include "solverkit/domain_decomp.hpp"
#include "solverkit/factorization.hpp"
#include "solverkit/fe_assembly.hpp"
#include "solverkit/mesh.hpp"
#include "solverkit/sparse.hpp"

namespace solverkit {

enum class CoarseKind { none, gdsw, gdsw_star, rgdsw };

struct ReusePolicy {
  bool symbolic = true;        // numeric-only refactorization on same pattern
  bool coarse_basis = false;   // keep the basis, recompute the coarse matrix
  bool coarse_matrix = false;  // keep the coarse matrix and its factorization
  // Rebuild only within the first k outer (Newton) steps; later steps reuse
  // the previous preconditioner unchanged.
  int rebuild_first_k = std::numeric_limits<int>::max();
};

struct SchwarzConfig {
  int levels = 2;
  CoarseKind velocity_coarse = CoarseKind::rgdsw;  // also the scalar kind
  CoarseKind pressure_coarse = CoarseKind::rgdsw;
  int overlap = 1;
  bool decoupled_phi = false;
  bool pressure_projection = false;  // subdomain-level pressure projection
  ReusePolicy reuse;
};

// Field layout of the dofs the preconditioner acts on. Scalar and velocity
// spaces take their coarse kind from velocity_coarse, pressure spaces from
// pressure_coarse; monolithic spaces combine both.
enum class SpaceKind { scalar, velocity, pressure, monolithic };

// Dof layout and interface structure the preconditioner is built over.
struct SchwarzSpace {
  int n_dofs = 0;
  int dim = 0;
  SpaceKind kind = SpaceKind::scalar;
  int n_velocity_rows = 0;  // 0 unless monolithic
  bool enclosed = false;    // constant pressure lies in the operator kernel

  bool monolithic() const { return kind == SpaceKind::monolithic; }
  std::vector<std::vector<int>> cores;  // dof partition
  InterfaceClassification classification;
  // Node components mapped to dofs happen through these:
  std::vector<std::vector<int>> node_to_dofs;  // per mesh node (may be empty)
  std::vector<int> interface_dofs;             // sorted
  std::vector<std::vector<int>> interior_sets;
  Vector pressure_weights;  // monolithic: integral of each pressure basis fn
  const DofMap* dofmap = nullptr;
};

// space builders; dirichlet exclusions follow the field: velocity spaces
// exclude velocity Dirichlet nodes from the interface, the pressure space
// takes an explicit predicate (outflow rows for the pressure Laplacian,
// nothing for a mass matrix).
SchwarzSpace make_scalar_space(const Mesh& mesh, const Partition& part,
                               const std::vector<char>& dirichlet_node);
SchwarzSpace make_monolithic_space(const Mesh& mesh, const Partition& part,
                                   const DofMap& dofmap, bool enclosed);
SchwarzSpace make_velocity_space(const Mesh& mesh, const Partition& part,
                                 const DofMap& dofmap);
SchwarzSpace make_pressure_space(const Mesh& mesh, const Partition& part,
                                 const DofMap& dofmap,
                                 const std::vector<char>& dirichlet_node);

class SchwarzPreconditioner {
 public:
  struct Data;  // opaque; owned via shared_ptr so reuse copies are cheap

  SchwarzPreconditioner() = default;

  Vector apply(const Vector& r) const;
  bool valid() const { return data_ != nullptr; }

  const OverlapDecomposition& decomposition() const;
  const CoarseBasis* coarse_basis() const;       // null for one level
  const SparseMatrix* coarse_matrix() const;     // null for one level
  std::pair<int, int> coarse_dims() const;       // (velocity, pressure) columns
  // Normalized per-subdomain pressure projection vectors (empty when off).
  const std::vector<Vector>& pressure_projection_vectors() const;

  friend SchwarzPreconditioner setup_schwarz(const SparseMatrix& K,
                                             const SchwarzSpace& space,
                                             const SchwarzConfig& cfg,
                                             SchwarzPreconditioner* previous,
                                             int rebuild_index);

 private:
  std::shared_ptr<Data> data_;
};

// Builds (or reuses parts of) the additive two-level preconditioner
//   sum_i R~_i^T P_i K_i^{-1} R_i + Phi K0^{-1} Phi^T.
// `previous` enables the reuse policy; its factorizations may be updated in
// place and absorbed, so treat it as consumed. rebuild_index is the outer
// step counter compared against reuse.rebuild_first_k.
SchwarzPreconditioner setup_schwarz(const SparseMatrix& K, const SchwarzSpace& space,
                                    const SchwarzConfig& cfg,
                                    SchwarzPreconditioner* previous = nullptr,
                                    int rebuild_index = 0);

}  // namespace solverkit

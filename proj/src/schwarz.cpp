#include "solverkit/schwarz.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "solverkit/exec_mode.hpp"

namespace solverkit {
namespace {

std::vector<std::vector<int>> owned_nodes_per_subdomain(
    const std::vector<std::vector<int>>& node_subs, int n_subdomains) {
  std::vector<std::vector<int>> owned(n_subdomains);
  for (int n = 0; n < static_cast<int>(node_subs.size()); ++n) {
    if (!node_subs[n].empty()) owned[node_subs[n].front()].push_back(n);
  }
  return owned;
}

// Nodes whose velocity components are all prescribed; only these leave the
// coarse interface.
std::vector<char> velocity_dirichlet_nodes(const Mesh& mesh, const DofMap& dofmap) {
  std::vector<int> count(mesh.n_nodes(), 0);
  for (int dof : dofmap.dirichlet_dofs) count[dof / dofmap.dim] += 1;
  std::vector<char> mask(mesh.n_nodes(), 0);
  for (int n = 0; n < mesh.n_nodes(); ++n) mask[n] = count[n] == dofmap.dim ? 1 : 0;
  return mask;
}

void fill_interface_and_interiors(SchwarzSpace& space,
                                  const std::vector<std::vector<int>>& owned) {
  std::vector<char> on_interface(space.n_dofs, 0);
  for (int node : space.classification.interface_nodes)
    for (int dof : space.node_to_dofs[node]) {
      space.interface_dofs.push_back(dof);
      on_interface[dof] = 1;
    }
  std::sort(space.interface_dofs.begin(), space.interface_dofs.end());

  space.cores.resize(owned.size());
  space.interior_sets.resize(owned.size());
  for (std::size_t s = 0; s < owned.size(); ++s) {
    for (int node : owned[s])
      for (int dof : space.node_to_dofs[node]) {
        space.cores[s].push_back(dof);
        if (!on_interface[dof]) space.interior_sets[s].push_back(dof);
      }
    std::sort(space.cores[s].begin(), space.cores[s].end());
    std::sort(space.interior_sets[s].begin(), space.interior_sets[s].end());
  }
}

}  // namespace

SchwarzSpace make_scalar_space(const Mesh& mesh, const Partition& part,
                               const std::vector<char>& dirichlet_node) {
  SchwarzSpace space;
  space.n_dofs = mesh.n_nodes();
  space.dim = mesh.dim;
  space.kind = SpaceKind::scalar;
  auto node_subs = node_subdomain_membership(mesh, part);
  space.classification = classify_interface(node_subs, dirichlet_node);
  space.node_to_dofs.resize(mesh.n_nodes());
  for (int n = 0; n < mesh.n_nodes(); ++n) space.node_to_dofs[n] = {n};
  fill_interface_and_interiors(space, owned_nodes_per_subdomain(node_subs, part.n_subdomains));
  return space;
}

SchwarzSpace make_velocity_space(const Mesh& mesh, const Partition& part,
                                 const DofMap& dofmap) {
  SchwarzSpace space;
  space.n_dofs = dofmap.n_velocity();
  space.dim = mesh.dim;
  space.kind = SpaceKind::velocity;
  space.dofmap = &dofmap;
  auto node_subs = node_subdomain_membership(mesh, part);
  space.classification = classify_interface(node_subs, velocity_dirichlet_nodes(mesh, dofmap));
  space.node_to_dofs.resize(mesh.n_nodes());
  for (int n = 0; n < mesh.n_nodes(); ++n)
    for (int c = 0; c < dofmap.dim; ++c) space.node_to_dofs[n].push_back(dofmap.vdof(n, c));
  fill_interface_and_interiors(space, owned_nodes_per_subdomain(node_subs, part.n_subdomains));
  return space;
}

SchwarzSpace make_pressure_space(const Mesh& mesh, const Partition& part,
                                 const DofMap& dofmap,
                                 const std::vector<char>& dirichlet_node) {
  SchwarzSpace space;
  space.n_dofs = dofmap.n_pressure();
  space.dim = mesh.dim;
  space.kind = SpaceKind::pressure;
  space.dofmap = &dofmap;
  auto node_subs = node_subdomain_membership(mesh, part);
  // Nodes without a pressure dof are masked out alongside the Dirichlet rows.
  std::vector<char> excluded(mesh.n_nodes(), 0);
  for (int n = 0; n < mesh.n_nodes(); ++n) {
    bool dir = n < static_cast<int>(dirichlet_node.size()) && dirichlet_node[n];
    excluded[n] = (dir || dofmap.pressure_index[n] < 0) ? 1 : 0;
  }
  space.classification = classify_interface(node_subs, excluded);
  space.node_to_dofs.resize(mesh.n_nodes());
  for (int n = 0; n < mesh.n_nodes(); ++n)
    if (dofmap.pressure_index[n] >= 0) space.node_to_dofs[n] = {dofmap.pressure_index[n]};
  fill_interface_and_interiors(space, owned_nodes_per_subdomain(node_subs, part.n_subdomains));
  return space;
}

SchwarzSpace make_monolithic_space(const Mesh& mesh, const Partition& part,
                                   const DofMap& dofmap, bool enclosed) {
  SchwarzSpace space;
  space.n_dofs = dofmap.n_total();
  space.dim = mesh.dim;
  space.kind = SpaceKind::monolithic;
  space.n_velocity_rows = dofmap.n_velocity();
  space.enclosed = enclosed;
  space.dofmap = &dofmap;
  auto node_subs = node_subdomain_membership(mesh, part);
  space.classification = classify_interface(node_subs, velocity_dirichlet_nodes(mesh, dofmap));
  space.node_to_dofs.resize(mesh.n_nodes());
  for (int n = 0; n < mesh.n_nodes(); ++n) {
    for (int c = 0; c < dofmap.dim; ++c) space.node_to_dofs[n].push_back(dofmap.vdof(n, c));
    if (dofmap.pressure_index[n] >= 0)
      space.node_to_dofs[n].push_back(dofmap.n_velocity() + dofmap.pressure_index[n]);
  }
  fill_interface_and_interiors(space, owned_nodes_per_subdomain(node_subs, part.n_subdomains));
  // Integral of each pressure basis function: row sums of the pressure mass.
  SparseMatrix mp = assemble_mass(mesh, dofmap, Field::pressure);
  Vector ones(mp.cols(), 1.0);
  space.pressure_weights = spmv(mp, ones);
  return space;
}

struct SchwarzPreconditioner::Data {
  SchwarzConfig cfg;
  int n_dofs = 0;
  SpaceKind kind = SpaceKind::scalar;
  OverlapDecomposition decomp;
  std::vector<Factorization> local_facts;
  std::vector<Vector> proj_vecs;  // normalized, aligned with overlap_dofs

  bool two_level = false;
  CoarseBasis basis;  // stored post-decoupling when decoupled_phi is set
  SparseMatrix phit;
  SparseMatrix K0;
  std::optional<Factorization> coarse_fact;
  bool coarse_regularized = false;
  Vector coarse_null;  // normalized pressure-column indicator
  std::pair<int, int> coarse_field_dims{0, 0};
};

namespace {

InterfacePoU make_pou(CoarseKind kind, const InterfaceClassification& cls, int dim) {
  switch (kind) {
    case CoarseKind::gdsw:
      return pou_gdsw(cls);
    case CoarseKind::gdsw_star:
      return pou_gdsw_star(cls, dim);
    case CoarseKind::rgdsw:
      return pou_rgdsw_option1(cls);
    case CoarseKind::none:
      return {};
  }
  return {};
}

// Pressure columns indexed in the pressure space itself (no velocity offset).
CoarseColumns tensor_pressure_local(const InterfacePoU& pou, const DofMap& dofmap) {
  CoarseColumns out;
  for (const PouFunction& f : pou.functions) {
    CoarseColumn col;
    col.field = Field::pressure;
    col.kind = f.kind;
    col.component = f.component;
    for (std::size_t k = 0; k < f.nodes.size(); ++k) {
      int pdof = dofmap.pressure_index[f.nodes[k]];
      if (pdof < 0) continue;
      col.dofs.push_back(pdof);
      col.values.push_back(f.values[k]);
    }
    out.cols.push_back(std::move(col));
  }
  return out;
}

CoarseColumns build_columns(const SchwarzSpace& space, const SchwarzConfig& cfg) {
  CoarseColumns out;
  switch (space.kind) {
    case SpaceKind::scalar:
      out = tensor_scalar(make_pou(cfg.velocity_coarse, space.classification, space.dim));
      break;
    case SpaceKind::velocity:
      out = tensor_nullspace(make_pou(cfg.velocity_coarse, space.classification, space.dim),
                             Field::velocity, *space.dofmap);
      break;
    case SpaceKind::pressure:
      out = tensor_pressure_local(make_pou(cfg.pressure_coarse, space.classification, space.dim),
                                  *space.dofmap);
      break;
    case SpaceKind::monolithic: {
      out = tensor_nullspace(make_pou(cfg.velocity_coarse, space.classification, space.dim),
                             Field::velocity, *space.dofmap);
      CoarseColumns pc =
          tensor_nullspace(make_pou(cfg.pressure_coarse, space.classification, space.dim),
                           Field::pressure, *space.dofmap);
      for (auto& c : pc.cols) out.cols.push_back(std::move(c));
      break;
    }
  }
  return out;
}

// Direction of the exactly singular coarse mode for enclosed flows: the sum
// of the pressure columns interpolates the global constant pressure.
Vector pressure_column_indicator(const std::vector<CoarseColumn>& columns) {
  Vector c(columns.size(), 0.0);
  for (std::size_t j = 0; j < columns.size(); ++j)
    if (columns[j].field == Field::pressure) c[j] = 1.0;
  double nrm = norm2(c);
  if (nrm > 0.0)
    for (double& v : c) v /= nrm;
  return c;
}

SparseMatrix regularize_rank_one(const SparseMatrix& K0, const Vector& c) {
  double shift = 0.0;
  Vector d = diagonal_of(K0);
  for (double v : d) shift = std::max(shift, std::abs(v));
  if (shift == 0.0) shift = 1.0;
  std::vector<Triplet> trips;
  trips.reserve(K0.nnz() + 64);
  for (int i = 0; i < K0.rows(); ++i)
    for (int k = K0.row_offsets()[i]; k < K0.row_offsets()[i + 1]; ++k)
      trips.push_back({i, K0.col_indices()[k], K0.values()[k], 0});
  for (int i = 0; i < K0.rows(); ++i) {
    if (c[i] == 0.0) continue;
    for (int j = 0; j < K0.cols(); ++j)
      if (c[j] != 0.0) trips.push_back({i, j, shift * c[i] * c[j], 1});
  }
  return SparseMatrix::from_triplets(K0.rows(), K0.cols(), std::move(trips));
}

void build_coarse_level(SchwarzPreconditioner::Data& data, const SparseMatrix& K,
                        const SchwarzSpace& space, const SchwarzConfig& cfg,
                        const SchwarzPreconditioner::Data* prev) {
  bool reuse_matrix = cfg.reuse.coarse_matrix && prev && prev->two_level;
  bool reuse_basis = cfg.reuse.coarse_basis && prev && prev->two_level;

  if (reuse_matrix) {
    data.two_level = true;
    data.basis = prev->basis;
    data.phit = prev->phit;
    data.K0 = prev->K0;
    data.coarse_fact = prev->coarse_fact;
    data.coarse_regularized = prev->coarse_regularized;
    data.coarse_null = prev->coarse_null;
    data.coarse_field_dims = prev->coarse_field_dims;
    return;
  }

  if (reuse_basis) {
    data.basis = prev->basis;
  } else {
    CoarseColumns cols = build_columns(space, cfg);
    if (cols.cols.empty()) return;  // no interface: stay one-level
    data.basis = harmonic_extension(K, cols, space.interface_dofs, space.interior_sets,
                                    space.n_velocity_rows);
    if (cfg.decoupled_phi && space.kind == SpaceKind::monolithic)
      data.basis = decouple_fields(data.basis);
  }
  if (data.basis.columns.empty()) return;

  data.two_level = true;
  data.phit = transpose(data.basis.phi);
  data.K0 = assemble_coarse(K, data.basis, false);
  if (space.enclosed && space.kind == SpaceKind::monolithic) {
    data.coarse_null = pressure_column_indicator(data.basis.columns);
    if (norm2(data.coarse_null) > 0.0) {
      data.coarse_regularized = true;
      data.K0 = regularize_rank_one(data.K0, data.coarse_null);
    }
  }
  data.coarse_fact.emplace(data.K0, "coarse matrix");
  for (const CoarseColumn& col : data.basis.columns)
    (col.field == Field::velocity ? data.coarse_field_dims.first
                                  : data.coarse_field_dims.second) += 1;
}

}  // namespace

SchwarzPreconditioner setup_schwarz(const SparseMatrix& K, const SchwarzSpace& space,
                                    const SchwarzConfig& cfg,
                                    SchwarzPreconditioner* previous, int rebuild_index) {
  const SchwarzPreconditioner::Data* prev =
      (previous && previous->data_) ? previous->data_.get() : nullptr;
  if (prev && rebuild_index >= cfg.reuse.rebuild_first_k) {
    SchwarzPreconditioner kept;
    kept.data_ = previous->data_;
    return kept;
  }

  if (K.rows() != K.cols() || K.rows() != space.n_dofs)
    throw std::runtime_error("schwarz setup: operator does not match the space");

  auto data = std::make_shared<SchwarzPreconditioner::Data>();
  data->cfg = cfg;
  data->n_dofs = space.n_dofs;
  data->kind = space.kind;

  bool structural_reuse = prev && prev->n_dofs == space.n_dofs &&
                          prev->cfg.overlap == cfg.overlap &&
                          prev->decomp.n_subdomains() == static_cast<int>(space.cores.size());
  if (structural_reuse)
    data->decomp = prev->decomp;
  else
    data->decomp = build_overlap(K, space.cores, cfg.overlap);

  int ns = data->decomp.n_subdomains();
  data->local_facts.reserve(ns);
  std::vector<SparseMatrix> locals(ns);
#pragma omp parallel for schedule(dynamic) if (!exec::serial())
  for (int s = 0; s < ns; ++s)
    locals[s] = extract_submatrix(K, data->decomp.overlap_dofs[s], data->decomp.overlap_dofs[s]);
  // A single-subdomain enclosed monolithic block is the full operator and
  // carries the constant-pressure kernel; shift it out with the same exact
  // rank-one regularizer the coarse level uses.
  if (ns == 1 && space.enclosed && space.kind == SpaceKind::monolithic) {
    const auto& ov = data->decomp.overlap_dofs[0];
    Vector c(ov.size(), 0.0);
    int np = 0;
    for (std::size_t k = 0; k < ov.size(); ++k) {
      if (ov[k] >= space.n_velocity_rows) {
        c[k] = 1.0;
        ++np;
      }
    }
    if (np > 0) {
      for (double& x : c) x /= std::sqrt(double(np));
      locals[0] = regularize_rank_one(locals[0], c);
    }
  }
  for (int s = 0; s < ns; ++s) {
    if (structural_reuse && cfg.reuse.symbolic) {
      Factorization fact = prev->local_facts[s];
      fact.refactorize(locals[s]);
      data->local_facts.push_back(std::move(fact));
    } else {
      data->local_facts.emplace_back(locals[s], "subdomain " + std::to_string(s) + " block");
    }
  }

  if (cfg.pressure_projection && space.kind == SpaceKind::monolithic) {
    data->proj_vecs.resize(ns);
    for (int s = 0; s < ns; ++s) {
      const auto& ov = data->decomp.overlap_dofs[s];
      Vector v(ov.size(), 0.0);
      for (std::size_t k = 0; k < ov.size(); ++k)
        if (ov[k] >= space.n_velocity_rows)
          v[k] = space.pressure_weights[ov[k] - space.n_velocity_rows];
      double nrm = norm2(v);
      if (nrm > 0.0) {
        for (double& x : v) x /= nrm;
        data->proj_vecs[s] = std::move(v);
      }  // zero weight in this region: leave the slot empty, apply skips it
    }
  }

  if (cfg.levels >= 2) build_coarse_level(*data, K, space, cfg, prev);

  SchwarzPreconditioner p;
  p.data_ = std::move(data);
  return p;
}

Vector SchwarzPreconditioner::apply(const Vector& r) const {
  const Data& d = *data_;
  int ns = d.decomp.n_subdomains();
  std::vector<Vector> locals(ns);
#pragma omp parallel for schedule(dynamic) if (!exec::serial())
  for (int s = 0; s < ns; ++s) {
    Vector rs = gather(r, d.decomp.overlap_dofs[s]);
    Vector ys = d.local_facts[s].solve(rs);
    if (!d.proj_vecs.empty() && !d.proj_vecs[s].empty()) {
      double c = dot(d.proj_vecs[s], ys);
      axpy(-c, d.proj_vecs[s], ys);
    }
    for (std::size_t k = 0; k < ys.size(); ++k) ys[k] *= d.decomp.scaling[s][k];
    locals[s] = std::move(ys);
  }
  // Fixed reduction order keeps the result independent of the schedule.
  Vector z(d.n_dofs, 0.0);
  for (int s = 0; s < ns; ++s) scatter_add(locals[s], d.decomp.overlap_dofs[s], z);

  if (d.two_level) {
    Vector rc = spmv(d.phit, r);
    Vector yc = d.coarse_fact->solve(rc);
    if (d.coarse_regularized) {
      double c = dot(d.coarse_null, yc);
      axpy(-c, d.coarse_null, yc);
    }
    Vector zc = spmv(d.basis.phi, yc);
    axpy(1.0, zc, z);
  }
  return z;
}

const OverlapDecomposition& SchwarzPreconditioner::decomposition() const {
  return data_->decomp;
}

const CoarseBasis* SchwarzPreconditioner::coarse_basis() const {
  return (data_ && data_->two_level) ? &data_->basis : nullptr;
}

const SparseMatrix* SchwarzPreconditioner::coarse_matrix() const {
  return (data_ && data_->two_level) ? &data_->K0 : nullptr;
}

std::pair<int, int> SchwarzPreconditioner::coarse_dims() const {
  return data_ ? data_->coarse_field_dims : std::pair<int, int>{0, 0};
}

const std::vector<Vector>& SchwarzPreconditioner::pressure_projection_vectors() const {
  static const std::vector<Vector> empty;
  return data_ ? data_->proj_vecs : empty;
}

}  // namespace solverkit

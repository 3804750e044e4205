#include "solverkit/runner.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "solverkit/exec_mode.hpp"
#include "solverkit/problems.hpp"
#include "solverkit/timestepping.hpp"

namespace solverkit {

namespace {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

[[noreturn]] void fail_field(const std::string& path, const std::string& what) {
  throw std::invalid_argument("config field '" + path + "': " + what);
}

void check_keys(const json& j, const std::string& path,
                std::initializer_list<const char*> allowed) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed) {
      if (it.key() == k) {
        ok = true;
        break;
      }
    }
    if (!ok) fail_field(path.empty() ? it.key() : path + "." + it.key(), "unknown key");
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail_field(key, e.what());
  }
}

PrecondType parse_precond_type(const std::string& s) {
  if (s == "monolithic") return PrecondType::monolithic;
  if (s == "pcd") return PrecondType::pcd;
  if (s == "lsc") return PrecondType::lsc;
  if (s == "bfbt") return PrecondType::bfbt;
  if (s == "lsc_ap") return PrecondType::lsc_ap;
  if (s == "lsc_stab_ap") return PrecondType::lsc_stab_ap;
  if (s == "simple") return PrecondType::simple;
  if (s == "simplec") return PrecondType::simplec;
  if (s == "diagonal") return PrecondType::diagonal;
  fail_field("preconditioner.type", "unknown value '" + s + "'");
}

const char* precond_name(PrecondType t) {
  switch (t) {
    case PrecondType::monolithic: return "monolithic";
    case PrecondType::pcd: return "pcd";
    case PrecondType::lsc: return "lsc";
    case PrecondType::bfbt: return "bfbt";
    case PrecondType::lsc_ap: return "lsc_ap";
    case PrecondType::lsc_stab_ap: return "lsc_stab_ap";
    case PrecondType::simple: return "simple";
    case PrecondType::simplec: return "simplec";
    case PrecondType::diagonal: return "diagonal";
  }
  return "?";
}

CoarseKind parse_coarse_kind(const std::string& s, const char* field) {
  if (s == "none") return CoarseKind::none;
  if (s == "gdsw") return CoarseKind::gdsw;
  if (s == "gdsw_star") return CoarseKind::gdsw_star;
  if (s == "rgdsw") return CoarseKind::rgdsw;
  fail_field(field, "unknown value '" + s + "'");
}

const char* coarse_name(CoarseKind k) {
  switch (k) {
    case CoarseKind::none: return "none";
    case CoarseKind::gdsw: return "gdsw";
    case CoarseKind::gdsw_star: return "gdsw_star";
    case CoarseKind::rgdsw: return "rgdsw";
  }
  return "?";
}

BcStrategy parse_bc(const std::string& s) {
  if (s == "bc1") return BcStrategy::bc1;
  if (s == "bc2") return BcStrategy::bc2;
  if (s == "bc3") return BcStrategy::bc3;
  fail_field("preconditioner.pcd.bc", "unknown value '" + s + "'");
}

const char* bc_name(BcStrategy bc) {
  switch (bc) {
    case BcStrategy::bc1: return "bc1";
    case BcStrategy::bc2: return "bc2";
    case BcStrategy::bc3: return "bc3";
  }
  return "?";
}

MassInverseKind parse_mass_inverse(const std::string& s) {
  if (s == "schwarz") return MassInverseKind::schwarz;
  if (s == "diagonal") return MassInverseKind::diagonal;
  if (s == "absrowsum") return MassInverseKind::absrowsum;
  fail_field("preconditioner.pcd.mp_inverse", "unknown value '" + s + "'");
}

const char* mass_inverse_name(MassInverseKind k) {
  switch (k) {
    case MassInverseKind::schwarz: return "schwarz";
    case MassInverseKind::diagonal: return "diagonal";
    case MassInverseKind::absrowsum: return "absrowsum";
  }
  return "?";
}

ScalingKind parse_scaling(const std::string& s) {
  if (s == "diagonal") return ScalingKind::diagonal;
  if (s == "absrowsum") return ScalingKind::absrowsum;
  if (s == "identity") return ScalingKind::identity;
  fail_field("preconditioner.scaling", "unknown value '" + s + "'");
}

const char* scaling_name(ScalingKind k) {
  switch (k) {
    case ScalingKind::diagonal: return "diagonal";
    case ScalingKind::absrowsum: return "absrowsum";
    case ScalingKind::identity: return "identity";
  }
  return "?";
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

struct Discretization {
  ElementKind kind = ElementKind::triangle;
  int order = 1;
};

Discretization parse_discretization(const std::string& s, int dim) {
  Discretization d;
  if (s == "p1p1") {
    d.kind = ElementKind::triangle;
    d.order = 1;
  } else if (s == "p2p1") {
    d.kind = ElementKind::triangle;
    d.order = 2;
  } else if (s == "q1q1") {
    d.kind = ElementKind::quadrilateral;
    d.order = 1;
  } else if (s == "q2q1") {
    d.kind = ElementKind::quadrilateral;
    d.order = 2;
  } else {
    fail_field("discretization", "unknown value '" + s + "'");
  }
  if (dim == 3) {
    if (d.kind == ElementKind::triangle) {
      fail_field("discretization", "simplicial pairs are 2D only");
    }
    d.kind = ElementKind::hexahedron;
  }
  return d;
}

bool is_lsc_family(PrecondType t) {
  return t == PrecondType::lsc || t == PrecondType::bfbt || t == PrecondType::lsc_ap ||
         t == PrecondType::lsc_stab_ap;
}

LscVariant lsc_variant_of(PrecondType t) {
  switch (t) {
    case PrecondType::bfbt: return LscVariant::bfbt;
    case PrecondType::lsc_ap: return LscVariant::lsc_ap;
    case PrecondType::lsc_stab_ap: return LscVariant::lsc_stab_ap;
    default: return LscVariant::lsc;
  }
}

// Everything the per-step preconditioner construction caches between Newton
// steps and time steps: constant operators are built once, F-dependent
// pieces are rebuilt while the step index is below rebuild_first_k.
struct RunScratch {
  double setup_seconds = 0.0;

  std::optional<SchwarzSpace> mono_space;
  std::optional<SchwarzSpace> velocity_space;
  std::optional<SchwarzSpace> pressure_space_outflow;  // outflow rows excluded
  std::optional<SchwarzSpace> pressure_space_plain;

  SchwarzPreconditioner mono;
  SchwarzPreconditioner f_schwarz;
  SchwarzPreconditioner schur_schwarz;  // SIMPLE Schur complement

  std::optional<SparseMatrix> mu;
  std::optional<SparseMatrix> mp;
  std::optional<SparseMatrix> ap;
  InverseOp ap_inv;
  InverseOp mp_inv;       // per the configured mass inverse kind
  InverseOp mp_ref_inv;   // absrowsum scaling for the diagonal reference
  InverseOp mu_inv;       // LSC velocity-mass scaling
  Vector h_mu;            // the scaling vector behind mu_inv
  InverseOp poisson_inv;  // constant B H B^T factorization (stable LSC)

  BlockPreconditioner block;
  InverseOp f_inv_exact;
  std::pair<int, int> coarse_dims{0, 0};
};

RunConfig parse_config_checked(const json& j);

std::vector<char> outflow_nodes(const Mesh& mesh) {
  std::vector<char> mask(mesh.n_nodes(), 0);
  for (int i = 0; i < mesh.n_nodes(); ++i) {
    mask[i] = mesh.node_tags[i] == BoundaryTag::outflow ? 1 : 0;
  }
  return mask;
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");
  try {
    return parse_config_checked(j);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
}

namespace {

RunConfig parse_config_checked(const json& j) {
  check_keys(j, "",
             {"schema_version", "name", "problem", "dim", "discretization",
              "cells_per_subdomain", "subdomains_per_unit", "stationary", "stokes", "nu",
              "reynolds", "v_max", "dt", "t_end", "threads", "seed", "preconditioner",
              "newton"});

  RunConfig cfg;
  cfg.schema_version = get_or(j, "schema_version", 1);
  if (cfg.schema_version != 1) fail_field("schema_version", "expected 1");
  cfg.name = get_or<std::string>(j, "name", cfg.name);
  const std::string problem = get_or<std::string>(j, "problem", "cavity2d");
  if (problem == "cavity2d" || problem == "cavity3d") {
    cfg.problem = "cavity";
  } else if (problem == "bfs2d" || problem == "bfs3d") {
    cfg.problem = "bfs";
  } else {
    fail_field("problem", "expected cavity2d, cavity3d, bfs2d, or bfs3d");
  }
  cfg.dim = problem.back() == '3' ? 3 : 2;
  if (j.contains("dim")) {
    const int dim = j.at("dim").get<int>();
    if (dim != cfg.dim) fail_field("dim", "contradicts the problem name");
  }
  cfg.discretization = get_or<std::string>(j, "discretization", cfg.discretization);
  parse_discretization(cfg.discretization, cfg.dim);  // validation only
  cfg.cells_per_subdomain = get_or(j, "cells_per_subdomain", cfg.cells_per_subdomain);
  if (cfg.cells_per_subdomain < 1) fail_field("cells_per_subdomain", "must be >= 1");
  cfg.subdomains_per_unit = get_or(j, "subdomains_per_unit", cfg.subdomains_per_unit);
  if (cfg.subdomains_per_unit < 1) fail_field("subdomains_per_unit", "must be >= 1");
  cfg.stationary = get_or(j, "stationary", cfg.stationary);
  cfg.stokes = get_or(j, "stokes", cfg.stokes);
  cfg.nu = get_or(j, "nu", cfg.nu);
  if (cfg.nu <= 0.0) fail_field("nu", "must be positive");
  cfg.reynolds = get_or(j, "reynolds", cfg.reynolds);
  if (cfg.reynolds < 0.0) fail_field("reynolds", "must be nonnegative");
  cfg.v_max = get_or(j, "v_max", cfg.v_max);
  if (cfg.v_max <= 0.0) fail_field("v_max", "must be positive");
  cfg.dt = get_or(j, "dt", cfg.dt);
  cfg.t_end = get_or(j, "t_end", cfg.t_end);
  if (!cfg.stationary) {
    if (cfg.dt <= 0.0) fail_field("dt", "must be positive");
    if (cfg.t_end < cfg.dt) fail_field("t_end", "must cover at least one step");
  }
  cfg.threads = get_or(j, "threads", cfg.threads);
  if (cfg.threads < 0) fail_field("threads", "must be nonnegative");
  cfg.seed = get_or<long>(j, "seed", cfg.seed);

  if (j.contains("preconditioner")) {
    const json& p = j.at("preconditioner");
    if (!p.is_object()) fail_field("preconditioner", "must be an object");
    check_keys(p, "preconditioner",
               {"type", "inner", "levels", "overlap", "velocity_coarse", "pressure_coarse",
                "decoupled_phi", "pressure_projection", "reuse", "rebuild_first_k", "pcd",
                "scaling", "alpha"});
    cfg.precond = parse_precond_type(get_or<std::string>(p, "type", "monolithic"));
    const std::string inner = get_or<std::string>(p, "inner", "schwarz");
    if (inner == "schwarz") {
      cfg.inner = InnerInverse::schwarz;
    } else if (inner == "exact") {
      cfg.inner = InnerInverse::exact;
    } else {
      fail_field("preconditioner.inner", "expected 'schwarz' or 'exact'");
    }
    cfg.schwarz.levels = get_or(p, "levels", cfg.schwarz.levels);
    if (cfg.schwarz.levels != 1 && cfg.schwarz.levels != 2) {
      fail_field("preconditioner.levels", "expected 1 or 2");
    }
    cfg.schwarz.overlap = get_or(p, "overlap", cfg.schwarz.overlap);
    if (cfg.schwarz.overlap < 1) fail_field("preconditioner.overlap", "must be >= 1");
    cfg.schwarz.velocity_coarse = parse_coarse_kind(
        get_or<std::string>(p, "velocity_coarse", "rgdsw"), "preconditioner.velocity_coarse");
    cfg.schwarz.pressure_coarse = parse_coarse_kind(
        get_or<std::string>(p, "pressure_coarse", "rgdsw"), "preconditioner.pressure_coarse");
    cfg.schwarz.decoupled_phi = get_or(p, "decoupled_phi", cfg.schwarz.decoupled_phi);
    if (p.contains("pressure_projection")) {
      cfg.schwarz.pressure_projection = p.at("pressure_projection").get<bool>();
      cfg.pressure_projection_explicit = true;
    }
    if (p.contains("reuse")) {
      const json& r = p.at("reuse");
      check_keys(r, "preconditioner.reuse", {"symbolic", "coarse_basis", "coarse_matrix"});
      cfg.schwarz.reuse.symbolic = get_or(r, "symbolic", cfg.schwarz.reuse.symbolic);
      cfg.schwarz.reuse.coarse_basis =
          get_or(r, "coarse_basis", cfg.schwarz.reuse.coarse_basis);
      cfg.schwarz.reuse.coarse_matrix =
          get_or(r, "coarse_matrix", cfg.schwarz.reuse.coarse_matrix);
    }
    cfg.rebuild_first_k = get_or(p, "rebuild_first_k", cfg.rebuild_first_k);
    if (p.contains("rebuild_first_k") && cfg.rebuild_first_k < 1) {
      fail_field("preconditioner.rebuild_first_k", "must be >= 1");
    }
    if (p.contains("pcd")) {
      const json& q = p.at("pcd");
      check_keys(q, "preconditioner.pcd", {"bc", "flip", "mp_inverse", "structure"});
      if (q.contains("bc")) {
        cfg.pcd.bc = parse_bc(q.at("bc").get<std::string>());
        cfg.pcd_bc_explicit = true;
      }
      cfg.pcd.flip = get_or(q, "flip", cfg.pcd.flip);
      if (q.contains("mp_inverse")) {
        cfg.pcd.mp_inverse = parse_mass_inverse(q.at("mp_inverse").get<std::string>());
        cfg.pcd_mp_inverse_explicit = true;
      }
      const std::string st = get_or<std::string>(q, "structure", "triangular");
      if (st == "triangular") {
        cfg.pcd.structure = BlockStructure::triangular;
      } else if (st == "ldu") {
        cfg.pcd.structure = BlockStructure::ldu;
      } else {
        fail_field("preconditioner.pcd.structure", "expected 'triangular' or 'ldu'");
      }
    }
    if (p.contains("scaling")) {
      cfg.lsc.scaling = parse_scaling(p.at("scaling").get<std::string>());
    }
    cfg.simple.alpha = get_or(p, "alpha", cfg.simple.alpha);
    if (cfg.simple.alpha <= 0.0 || cfg.simple.alpha > 1.0) {
      fail_field("preconditioner.alpha", "must lie in (0, 1]");
    }
  }
  cfg.lsc.variant = lsc_variant_of(cfg.precond);
  cfg.simple.variant =
      cfg.precond == PrecondType::simple ? SimpleVariant::simple : SimpleVariant::simplec;

  if (j.contains("newton")) {
    const json& nw = j.at("newton");
    check_keys(nw, "newton",
               {"residual_tol", "update_tol", "max_steps", "gmres_max_iter", "gmres_restart",
                "fixed_forcing", "forcing", "line_search"});
    cfg.newton.residual_tol = get_or(nw, "residual_tol", cfg.newton.residual_tol);
    cfg.newton.update_tol = get_or(nw, "update_tol", cfg.newton.update_tol);
    cfg.newton.max_steps = get_or(nw, "max_steps", cfg.newton.max_steps);
    cfg.newton.gmres_max_iter = get_or(nw, "gmres_max_iter", cfg.newton.gmres_max_iter);
    cfg.newton.gmres_restart = get_or(nw, "gmres_restart", cfg.newton.gmres_restart);
    if (nw.contains("fixed_forcing")) {
      cfg.newton.fixed_forcing = nw.at("fixed_forcing").get<double>();
    }
    if (nw.contains("forcing")) {
      const json& f = nw.at("forcing");
      check_keys(f, "newton.forcing", {"eta0", "eta_min", "eta_max", "alpha", "gamma"});
      cfg.newton.forcing.eta0 = get_or(f, "eta0", cfg.newton.forcing.eta0);
      cfg.newton.forcing.eta_min = get_or(f, "eta_min", cfg.newton.forcing.eta_min);
      cfg.newton.forcing.eta_max = get_or(f, "eta_max", cfg.newton.forcing.eta_max);
      cfg.newton.forcing.alpha = get_or(f, "alpha", cfg.newton.forcing.alpha);
      cfg.newton.forcing.gamma = get_or(f, "gamma", cfg.newton.forcing.gamma);
    }
    if (nw.contains("line_search")) {
      const json& ls = nw.at("line_search");
      check_keys(ls, "newton.line_search",
                 {"initial", "contraction", "max_backtracks", "sufficient_decrease"});
      cfg.newton.line_search.initial = get_or(ls, "initial", cfg.newton.line_search.initial);
      cfg.newton.line_search.contraction =
          get_or(ls, "contraction", cfg.newton.line_search.contraction);
      cfg.newton.line_search.max_backtracks =
          get_or(ls, "max_backtracks", cfg.newton.line_search.max_backtracks);
      cfg.newton.line_search.sufficient_decrease =
          get_or(ls, "sufficient_decrease", cfg.newton.line_search.sufficient_decrease);
    }
  }
  return cfg;
}

}  // namespace

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

namespace {

// Builds the preconditioner for the current linearization. `rebuild_index`
// is the Newton step inside the current outer solve; once it reaches
// rebuild_first_k the previous preconditioner is reused unchanged.
LinOp make_step_preconditioner(const RunConfig& cfg, const ProblemSetup& prob,
                               const Partition& part, const SaddleSystem& sys,
                               int rebuild_index, std::optional<double> mass_coeff,
                               const Vector& u_iterate,
                               const std::shared_ptr<RunScratch>& scratch) {
  const Mesh& mesh = prob.mesh;
  const DofMap& dofmap = prob.dofmap;
  RunScratch& sc = *scratch;
  const auto t0 = Clock::now();
  const int rebuild_k = cfg.schwarz.reuse.rebuild_first_k;

  SchwarzConfig field_cfg = cfg.schwarz;
  field_cfg.pressure_projection = false;
  field_cfg.decoupled_phi = false;

  if (cfg.precond == PrecondType::monolithic) {
    if (!sc.mono_space) {
      sc.mono_space = make_monolithic_space(mesh, part, dofmap, prob.enclosed);
    }
    const SparseMatrix K = sys.op.monolithic();
    sc.mono = setup_schwarz(K, *sc.mono_space, cfg.schwarz,
                            sc.mono.valid() ? &sc.mono : nullptr, rebuild_index);
    sc.coarse_dims = sc.mono.coarse_dims();
    SchwarzPreconditioner p = sc.mono;
    sc.setup_seconds += seconds_since(t0);
    return [p](const Vector& r) { return p.apply(r); };
  }

  if (sc.block.valid() && rebuild_index >= rebuild_k) {
    sc.setup_seconds += seconds_since(t0);
    BlockPreconditioner p = sc.block;
    return [p](const Vector& r) { return p.apply(r); };
  }

  // Velocity block inverse (rebuilt while rebuilding is allowed).
  InverseOp f_inv;
  if (cfg.inner == InnerInverse::schwarz) {
    if (!sc.velocity_space) sc.velocity_space = make_velocity_space(mesh, part, dofmap);
    sc.f_schwarz = setup_schwarz(sys.op.F, *sc.velocity_space, field_cfg,
                                 sc.f_schwarz.valid() ? &sc.f_schwarz : nullptr,
                                 rebuild_index);
    sc.coarse_dims.first = sc.f_schwarz.coarse_dims().first;
    f_inv = make_schwarz_inverse("F", sc.f_schwarz);
  } else {
    sc.f_inv_exact = make_factorized_inverse("F", sys.op.F);
    f_inv = sc.f_inv_exact;
  }

  auto pressure_schwarz_inverse = [&](const char* name, const SparseMatrix& m,
                                      bool outflow_dirichlet,
                                      SchwarzPreconditioner* prev) {
    auto& space = outflow_dirichlet ? sc.pressure_space_outflow : sc.pressure_space_plain;
    if (!space) {
      space = make_pressure_space(mesh, part, dofmap,
                                  outflow_dirichlet ? outflow_nodes(mesh)
                                                    : std::vector<char>(mesh.n_nodes(), 0));
    }
    SchwarzPreconditioner p =
        setup_schwarz(m, *space, field_cfg, prev && prev->valid() ? prev : nullptr,
                      prev ? rebuild_index : 0);
    if (prev) *prev = p;
    sc.coarse_dims.second = p.coarse_dims().second;
    return make_schwarz_inverse(name, p);
  };

  switch (cfg.precond) {
    case PrecondType::pcd: {
      if (!sc.ap_inv.valid()) {
        sc.ap = assemble_pressure_laplacian(mesh, dofmap, cfg.pcd.bc);
        sc.ap_inv = cfg.inner == InnerInverse::schwarz
                        ? pressure_schwarz_inverse("Ap", *sc.ap, true, nullptr)
                        : make_factorized_inverse("Ap", *sc.ap);
      }
      if (!sc.mp_inv.valid()) {
        sc.mp = assemble_mass(mesh, dofmap, Field::pressure);
        switch (cfg.pcd.mp_inverse) {
          case MassInverseKind::schwarz:
            sc.mp_inv = pressure_schwarz_inverse("Mp", *sc.mp, false, nullptr);
            break;
          case MassInverseKind::diagonal:
            sc.mp_inv = make_diagonal_scaling_inverse("Mp", diag_inverse(*sc.mp));
            break;
          case MassInverseKind::absrowsum:
            sc.mp_inv = make_diagonal_scaling_inverse("Mp", absrowsum_inverse(*sc.mp));
            break;
        }
      }
      const SparseMatrix fp = assemble_pressure_convdiff(mesh, dofmap, u_iterate, prob.nu,
                                                         mass_coeff, cfg.pcd.bc);
      sc.block = make_pcd(sys.op, f_inv, sc.ap_inv, sc.mp_inv, fp, cfg.pcd);
      break;
    }
    case PrecondType::lsc:
    case PrecondType::bfbt:
    case PrecondType::lsc_ap:
    case PrecondType::lsc_stab_ap: {
      if (!sc.mu_inv.valid()) {
        sc.mu = assemble_mass(mesh, dofmap, Field::velocity);
        sc.h_mu = scaling_vector(*sc.mu, effective_scaling(cfg.lsc));
        sc.mu_inv = make_diagonal_scaling_inverse("Mu", sc.h_mu);
      }
      const bool ap_variant = cfg.lsc.variant == LscVariant::lsc_ap ||
                              cfg.lsc.variant == LscVariant::lsc_stab_ap;
      const bool stabilized_term =
          cfg.lsc.variant == LscVariant::lsc_stab_ap ||
          (cfg.lsc.variant == LscVariant::lsc && sys.op.C.nnz() > 0);
      std::optional<LscScalars> scalars;
      if (stabilized_term) scalars = compute_lsc_scalars(sys.op, sc.h_mu);

      InverseOp poisson_inv;
      if (ap_variant) {
        if (!sc.ap_inv.valid()) {
          sc.ap = assemble_pressure_laplacian(mesh, dofmap, BcStrategy::bc2);
          sc.ap_inv = cfg.inner == InnerInverse::schwarz
                          ? pressure_schwarz_inverse("Ap", *sc.ap, true, nullptr)
                          : make_factorized_inverse("Ap", *sc.ap);
        }
        poisson_inv = sc.ap_inv;
      } else if (stabilized_term) {
        // gamma depends on F, so the proxy is rebuilt with each Jacobian.
        const SparseMatrix proxy = form_poisson_proxy(sys.op, sc.h_mu, scalars->gamma);
        poisson_inv = cfg.inner == InnerInverse::schwarz
                          ? pressure_schwarz_inverse("BHBt", proxy, false, nullptr)
                          : make_factorized_inverse("BHBt", proxy);
      } else {
        if (!sc.poisson_inv.valid()) {
          const SparseMatrix proxy = form_poisson_proxy(sys.op, sc.h_mu, 0.0);
          sc.poisson_inv = cfg.inner == InnerInverse::schwarz
                               ? pressure_schwarz_inverse("BHBt", proxy, false, nullptr)
                               : make_factorized_inverse("BHBt", proxy);
        }
        poisson_inv = sc.poisson_inv;
      }
      sc.block = make_lsc(sys.op, f_inv, poisson_inv, sc.mu_inv, cfg.lsc, scalars);
      break;
    }
    case PrecondType::simple:
    case PrecondType::simplec: {
      const ScalingKind hk = cfg.simple.variant == SimpleVariant::simple
                                 ? ScalingKind::diagonal
                                 : ScalingKind::absrowsum;
      Vector h_f = scaling_vector(sys.op.F, hk);
      const SparseMatrix s = form_simple_schur(sys.op, h_f);
      InverseOp schur_inv = cfg.inner == InnerInverse::schwarz
                                ? pressure_schwarz_inverse("S", s, false, &sc.schur_schwarz)
                                : make_factorized_inverse("S", s);
      sc.block = make_simple(sys.op, f_inv, schur_inv, cfg.simple, std::move(h_f));
      break;
    }
    case PrecondType::diagonal: {
      if (!sc.mp_ref_inv.valid()) {
        sc.mp = assemble_mass(mesh, dofmap, Field::pressure);
        sc.mp_ref_inv = make_diagonal_scaling_inverse("Mp", absrowsum_inverse(*sc.mp));
      }
      sc.block = make_diagonal_reference(sys.op, f_inv, sc.mp_ref_inv, prob.nu);
      break;
    }
    case PrecondType::monolithic:
      break;  // handled above
  }

  sc.setup_seconds += seconds_since(t0);
  BlockPreconditioner p = sc.block;
  return [p](const Vector& r) { return p.apply(r); };
}

ordered_json reuse_json(const ReusePolicy& r) {
  ordered_json j;
  j["symbolic"] = r.symbolic;
  j["coarse_basis"] = r.coarse_basis;
  j["coarse_matrix"] = r.coarse_matrix;
  j["rebuild_first_k"] = r.rebuild_first_k;
  return j;
}

std::string serialize_report(const RunConfig& cfg, const ProblemSetup& prob,
                             const Partition& part, const RunReport& rep) {
  ordered_json j;
  j["schema_version"] = 1;
  j["name"] = cfg.name;
  j["problem"] = cfg.problem;
  j["dim"] = cfg.dim;
  j["discretization"] = cfg.discretization;
  j["stationary"] = cfg.stationary;
  j["stokes"] = cfg.stokes;
  j["nu"] = prob.nu;
  if (cfg.problem == "bfs") {
    j["v_max"] = prob.v_max;
    j["reynolds"] = reynolds_bfs(prob.v_max, prob.nu);
  } else {
    j["reynolds"] = 1.0 / prob.nu;
  }
  j["cells_per_subdomain"] = cfg.cells_per_subdomain;
  j["subdomains_per_unit"] = cfg.subdomains_per_unit;
  if (!cfg.stationary) {
    j["dt"] = cfg.dt;
    j["t_end"] = cfg.t_end;
  }
  j["seed"] = cfg.seed;
  j["dofs"] = {{"velocity", rep.n_velocity},
               {"pressure", rep.n_pressure},
               {"total", rep.n_velocity + rep.n_pressure}};
  j["n_subdomains"] = part.n_subdomains;

  ordered_json pj;
  pj["type"] = precond_name(cfg.precond);
  pj["inner"] = cfg.inner == InnerInverse::schwarz ? "schwarz" : "exact";
  pj["levels"] = cfg.schwarz.levels;
  pj["overlap"] = cfg.schwarz.overlap;
  pj["velocity_coarse"] = coarse_name(cfg.schwarz.velocity_coarse);
  pj["pressure_coarse"] = coarse_name(cfg.schwarz.pressure_coarse);
  pj["decoupled_phi"] = cfg.schwarz.decoupled_phi;
  pj["pressure_projection"] = cfg.schwarz.pressure_projection;
  pj["reuse"] = reuse_json(cfg.schwarz.reuse);
  if (cfg.precond == PrecondType::pcd) {
    pj["pcd"] = {{"bc", bc_name(cfg.pcd.bc)},
                 {"flip", cfg.pcd.flip},
                 {"mp_inverse", mass_inverse_name(cfg.pcd.mp_inverse)},
                 {"structure", cfg.pcd.structure == BlockStructure::ldu ? "ldu" : "triangular"}};
  }
  if (is_lsc_family(cfg.precond)) {
    pj["scaling"] = scaling_name(effective_scaling(cfg.lsc));
  }
  if (cfg.precond == PrecondType::simple || cfg.precond == PrecondType::simplec) {
    pj["alpha"] = cfg.simple.alpha;
  }
  j["preconditioner"] = pj;
  j["coarse_dims"] = {{"velocity", rep.coarse_dims.first},
                      {"pressure", rep.coarse_dims.second}};

  ordered_json steps = ordered_json::array();
  for (const StepRecord& s : rep.steps) {
    ordered_json e;
    e["time_step"] = s.time_step;
    e["time"] = s.time;
    e["newton_step"] = s.newton_step;
    e["residual_norm"] = s.residual_norm;
    e["eta"] = s.eta;
    e["gmres_iterations"] = s.gmres_iterations;
    e["gmres_relative_residual"] = s.gmres_relative_residual;
    e["backtracks"] = s.backtracks;
    e["update_norm"] = s.update_norm;
    steps.push_back(std::move(e));
  }
  j["newton_steps"] = std::move(steps);

  if (!cfg.stationary) {
    ordered_json ts = ordered_json::array();
    for (const TimeStepRecord& s : rep.time_steps) {
      ordered_json e;
      e["index"] = s.index;
      e["time"] = s.time;
      e["cfl_max"] = s.cfl_max;
      e["cfl_avg"] = s.cfl_avg;
      e["newton_steps"] = s.newton_steps;
      e["gmres_total"] = s.gmres_total;
      e["mean_gmres"] = s.mean_gmres;
      e["converged"] = s.converged;
      ts.push_back(std::move(e));
    }
    j["time_steps"] = std::move(ts);
  }

  j["totals"] = {{"gmres_iterations", rep.total_gmres},
                 {"newton_steps", rep.total_newton},
                 {"avg_gmres_per_newton", rep.avg_gmres}};
  j["timings"] = {{"setup_seconds", rep.setup_seconds},
                  {"solve_seconds", rep.solve_seconds},
                  {"total_seconds", rep.total_seconds},
                  {"timings_suppressed", rep.timings_suppressed}};
  j["converged"] = rep.converged;
  j["failure"] = rep.failure;
  return j.dump(2) + "\n";
}

std::string serialize_csv(const RunConfig& cfg, const RunReport& rep) {
  std::ostringstream out;
  if (cfg.stationary) {
    out << "newton_step,residual_norm,eta,gmres_iterations,backtracks,update_norm\n";
    for (const StepRecord& s : rep.steps) {
      out << s.newton_step << ',' << fmt_double(s.residual_norm) << ',' << fmt_double(s.eta)
          << ',' << s.gmres_iterations << ',' << s.backtracks << ','
          << fmt_double(s.update_norm) << '\n';
    }
  } else {
    out << "step,t,cfl_max,cfl_avg,newton_steps,mean_gmres\n";
    for (const TimeStepRecord& s : rep.time_steps) {
      out << s.index << ',' << fmt_double(s.time) << ',' << fmt_double(s.cfl_max) << ','
          << fmt_double(s.cfl_avg) << ',' << s.newton_steps << ','
          << fmt_double(s.mean_gmres) << '\n';
    }
  }
  return out.str();
}

}  // namespace

RunReport run(const RunConfig& cfg_in) {
  const auto wall0 = Clock::now();
  RunConfig cfg = cfg_in;
  if (cfg.threads > 0) exec::set_threads(cfg.threads);

  const Discretization disc = parse_discretization(cfg.discretization, cfg.dim);
  const int cells_per_unit = cfg.cells_per_subdomain * cfg.subdomains_per_unit;

  ProblemSetup prob;
  if (cfg.problem == "cavity") {
    const double re = cfg.reynolds > 0.0 ? cfg.reynolds : 1.0 / cfg.nu;
    prob = make_cavity(cfg.dim, re, cells_per_unit, disc.kind, disc.order);
  } else {
    const double nu = cfg.reynolds > 0.0 ? 2.0 * cfg.v_max / cfg.reynolds : cfg.nu;
    prob = make_bfs(cfg.dim, cfg.v_max, nu, cells_per_unit, disc.kind, disc.order);
  }
  const Mesh& mesh = prob.mesh;
  const DofMap& dofmap = prob.dofmap;

  std::array<int, 3> counts{cfg.subdomains_per_unit, cfg.subdomains_per_unit,
                            cfg.dim == 3 ? cfg.subdomains_per_unit : 1};
  const Partition part = partition_structured(mesh, counts);

  // Remaining context-dependent defaults.
  if (!cfg.pressure_projection_explicit) {
    cfg.schwarz.pressure_projection = cfg.stationary && prob.enclosed;
  }
  if (!cfg.pcd_bc_explicit) cfg.pcd.bc = cfg.stationary ? BcStrategy::bc2 : BcStrategy::bc3;
  if (!cfg.pcd_mp_inverse_explicit) {
    cfg.pcd.mp_inverse =
        cfg.stationary ? MassInverseKind::absrowsum : MassInverseKind::schwarz;
  }
  if (cfg.rebuild_first_k < 1) cfg.rebuild_first_k = cfg.stationary ? 3 : 1;
  cfg.schwarz.reuse.rebuild_first_k = cfg.rebuild_first_k;

  RunReport rep;
  rep.n_velocity = dofmap.n_velocity();
  rep.n_pressure = dofmap.n_pressure();
  rep.n_subdomains = part.n_subdomains;

  auto scratch = std::make_shared<RunScratch>();
  const int n = dofmap.n_total();

  // One linearization: assemble the saddle system at x, build or reuse the
  // preconditioner, and hand Newton the operator closures.
  auto build_system = [&, scratch](const Vector& x, int step, std::optional<double> mass_coeff,
                                   std::shared_ptr<const Vector> u_prev,
                                   std::shared_ptr<const Vector> u_prev2) -> NewtonSystem {
    AssemblyState st;
    st.X = x;
    st.nu = prob.nu;
    st.stabilized = prob.stabilized;
    st.convection = !cfg.stokes;
    if (mass_coeff) st.dt = cfg.dt;
    st.u_prev = u_prev ? u_prev.get() : nullptr;
    st.u_prev2 = u_prev2 ? u_prev2.get() : nullptr;
    const LinearizationMode mode =
        mass_coeff ? LinearizationMode::transient_newton : LinearizationMode::newton;
    SaddleSystem sys = assemble_saddle(mesh, dofmap, st, mode);

    const Vector u_iter(x.begin(), x.begin() + dofmap.n_velocity());
    NewtonSystem ns;
    ns.preconditioner =
        make_step_preconditioner(cfg, prob, part, sys, step, mass_coeff, u_iter, scratch);
    auto op = std::make_shared<SaddleOperator>(std::move(sys.op));
    ns.jacobian = [op](const Vector& v) { return op->apply(v); };
    ns.residual = std::move(sys.residual);
    return ns;
  };

  auto residual_at = [&](const Vector& x, std::optional<double> mass_coeff,
                         std::shared_ptr<const Vector> u_prev,
                         std::shared_ptr<const Vector> u_prev2) -> Vector {
    AssemblyState st;
    st.X = x;
    st.nu = prob.nu;
    st.stabilized = prob.stabilized;
    st.convection = !cfg.stokes;
    if (mass_coeff) st.dt = cfg.dt;
    st.u_prev = u_prev ? u_prev.get() : nullptr;
    st.u_prev2 = u_prev2 ? u_prev2.get() : nullptr;
    const LinearizationMode mode =
        mass_coeff ? LinearizationMode::transient_newton : LinearizationMode::newton;
    return assemble_saddle(mesh, dofmap, st, LinearizationMode(mode)).residual;
  };

  auto append_newton_stats = [&rep](const NewtonReport& nr, int time_step, double time) {
    for (const NewtonStepStats& s : nr.step_stats) {
      StepRecord r;
      r.time_step = time_step;
      r.time = time;
      r.newton_step = s.step;
      r.residual_norm = s.residual_norm;
      r.eta = s.eta;
      r.gmres_iterations = s.gmres_iterations;
      r.gmres_relative_residual = s.gmres_relative_residual;
      r.backtracks = s.backtracks;
      r.update_norm = s.update_norm;
      rep.steps.push_back(r);
      rep.total_gmres += s.gmres_iterations;
      rep.total_newton += 1;
      rep.solve_seconds += s.gmres_seconds;
    }
  };

  Vector X(n, 0.0);
  apply_dirichlet_values(dofmap, X);

  if (cfg.stationary) {
    NewtonProblem np;
    np.n = n;
    np.assemble = [&](const Vector& x, int step) {
      return build_system(x, step, std::nullopt, nullptr, nullptr);
    };
    np.residual_only = [&](const Vector& x) {
      return residual_at(x, std::nullopt, nullptr, nullptr);
    };
    const NewtonReport nr = newton_solve(np, X, cfg.newton);
    append_newton_stats(nr, 0, 0.0);
    rep.converged = nr.converged;
    rep.failure = nr.failure;
  } else {
    const int n_steps = static_cast<int>(std::llround(cfg.t_end / cfg.dt));
    Vector x_prev;
    bool have_prev = false;
    rep.converged = true;
    for (int s = 0; s < n_steps; ++s) {
      const double t_next = cfg.dt * (s + 1);
      const bool bootstrap = !have_prev;
      const double c0 = bdf2_terms(cfg.dt, bootstrap).c0;
      auto u_n = std::make_shared<const Vector>(X.begin(), X.begin() + dofmap.n_velocity());
      std::shared_ptr<const Vector> u_nm1;
      if (have_prev) {
        u_nm1 = std::make_shared<const Vector>(x_prev.begin(),
                                               x_prev.begin() + dofmap.n_velocity());
      }
      ImplicitStepFactory factory = [&](double, const Vector&, const Vector*, double) {
        NewtonProblem np;
        np.n = n;
        np.assemble = [&, u_n, u_nm1, c0](const Vector& x, int step) {
          return build_system(x, step, c0, u_n, u_nm1);
        };
        np.residual_only = [&, u_n, u_nm1, c0](const Vector& x) {
          return residual_at(x, c0, u_n, u_nm1);
        };
        return np;
      };
      StepResult sr =
          bdf2_advance(factory, X, have_prev ? &x_prev : nullptr, cfg.dt, t_next, cfg.newton);
      append_newton_stats(sr.report, s + 1, t_next);

      TimeStepRecord tr;
      tr.index = s + 1;
      tr.time = t_next;
      tr.newton_steps = static_cast<int>(sr.report.step_stats.size());
      for (const auto& st : sr.report.step_stats) tr.gmres_total += st.gmres_iterations;
      tr.mean_gmres =
          tr.newton_steps > 0 ? double(tr.gmres_total) / double(tr.newton_steps) : 0.0;
      tr.converged = sr.report.converged;
      const Vector u_new(sr.x.begin(), sr.x.begin() + dofmap.n_velocity());
      const auto cfl = cfl_unstructured(mesh, dofmap, u_new, cfg.dt);
      tr.cfl_max = cfl.first;
      tr.cfl_avg = cfl.second;
      rep.time_steps.push_back(tr);

      if (!sr.report.converged) {
        rep.converged = false;
        rep.failure = "time step " + std::to_string(s + 1) + ": " + sr.report.failure;
        break;
      }
      x_prev = std::move(X);
      X = std::move(sr.x);
      have_prev = true;
    }
  }

  rep.coarse_dims = scratch->coarse_dims;
  rep.avg_gmres =
      rep.total_newton > 0 ? double(rep.total_gmres) / double(rep.total_newton) : 0.0;
  rep.setup_seconds = scratch->setup_seconds;
  rep.total_seconds = seconds_since(wall0);
  if (exec::serial()) {
    rep.setup_seconds = 0.0;
    rep.solve_seconds = 0.0;
    rep.total_seconds = 0.0;
    rep.timings_suppressed = true;
  }
  rep.solution = std::move(X);
  rep.report_json = serialize_report(cfg, prob, part, rep);
  rep.report_csv = serialize_csv(cfg, rep);
  return rep;
}

SweepResult sweep(const RunConfig& base, const std::string& axis,
                  const std::vector<double>& values) {
  SweepResult result;
  result.axis = axis;
  if (axis != "subdomains" && axis != "reynolds_nu" && axis != "reynolds_v" && axis != "cfl") {
    throw std::invalid_argument("unknown sweep axis '" + axis + "'");
  }
  for (double v : values) {
    RunConfig c = base;
    if (axis == "subdomains") {
      const int s = static_cast<int>(std::llround(v));
      if (s < 1) throw std::invalid_argument("subdomains sweep values must be >= 1");
      c.subdomains_per_unit = s;
    } else if (axis == "reynolds_nu") {
      if (v <= 0.0) throw std::invalid_argument("reynolds sweep values must be positive");
      c.reynolds = v;
    } else if (axis == "reynolds_v") {
      if (base.problem != "bfs") {
        throw std::invalid_argument("reynolds_v sweep requires the bfs problem");
      }
      if (v <= 0.0) throw std::invalid_argument("reynolds sweep values must be positive");
      c.reynolds = 0.0;
      c.v_max = v * base.nu / 2.0;
    } else {  // cfl
      if (v <= 0.0) throw std::invalid_argument("cfl sweep values must be positive");
      const double h = 1.0 / double(base.cells_per_subdomain * base.subdomains_per_unit);
      const double u_ref = base.problem == "bfs" ? base.v_max : 1.0;
      c.dt = v * h / u_ref;
      if (c.t_end < c.dt) c.t_end = c.dt;
    }
    c.name = base.name + "_" + axis + "_" + fmt_double(v);
    SweepRow row;
    row.value = v;
    row.report = run(c);
    result.rows.push_back(std::move(row));
  }

  std::ostringstream out;
  out << "axis,value,converged,newton_steps,gmres_total,avg_gmres_per_newton,"
         "setup_seconds,solve_seconds,total_seconds\n";
  for (const SweepRow& r : result.rows) {
    out << axis << ',' << fmt_double(r.value) << ',' << (r.report.converged ? 1 : 0) << ','
        << r.report.total_newton << ',' << r.report.total_gmres << ','
        << fmt_double(r.report.avg_gmres) << ',' << fmt_double(r.report.setup_seconds) << ','
        << fmt_double(r.report.solve_seconds) << ',' << fmt_double(r.report.total_seconds)
        << '\n';
  }
  result.summary_csv = out.str();
  return result;
}

namespace {

std::string write_text_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
  return p.string();
}

}  // namespace

std::string write_report_files(const RunReport& report, const std::string& out_dir,
                               const std::string& name) {
  std::filesystem::path dir(out_dir.empty() ? "." : out_dir);
  std::filesystem::create_directories(dir);
  write_text_file(dir / (name + ".csv"), report.report_csv);
  return write_text_file(dir / (name + ".report.json"), report.report_json);
}

std::string write_sweep_files(const SweepResult& sweep_result, const std::string& out_dir,
                              const std::string& name) {
  std::filesystem::path dir(out_dir.empty() ? "." : out_dir);
  std::filesystem::create_directories(dir);
  for (const SweepRow& r : sweep_result.rows) {
    ordered_json j = ordered_json::parse(r.report.report_json);
    const std::string run_name = j.at("name").get<std::string>();
    write_text_file(dir / (run_name + ".report.json"), r.report.report_json);
    write_text_file(dir / (run_name + ".csv"), r.report.report_csv);
  }
  return write_text_file(dir / (name + ".sweep.csv"), sweep_result.summary_csv);
}

}  // namespace solverkit

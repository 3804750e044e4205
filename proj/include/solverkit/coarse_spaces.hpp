#pragma once

#include <vector>

#include "solverkit/domain_decomp.hpp"
#include "solverkit/fe_assembly.hpp"
#include "solverkit/sparse.hpp"

namespace solverkit {

// Scalar interface function: values over interface nodes.
struct PouFunction {
  ComponentType kind = ComponentType::vertex;  // generating component kind
  int component = -1;                          // generator index
  std::vector<int> nodes;                      // sorted node ids
  std::vector<double> values;
};

struct InterfacePoU {
  std::vector<PouFunction> functions;
};

// One characteristic function per interface component.
InterfacePoU pou_gdsw(const InterfaceClassification& cls);
// Vertex-based functions; a non-vertex component contributes value
// 1/(number of adjacent vertices) to each adjacent vertex function, where
// adjacency means the component's sharing set is a strict subset of the
// vertex's. Components with no adjacent vertex keep their own function.
InterfacePoU pou_rgdsw_option1(const InterfaceClassification& cls);
// Vertex functions extended over adjacent edges only; faces stay separate.
// In 2D this coincides with the reduced-dimension construction.
InterfacePoU pou_gdsw_star(const InterfaceClassification& cls, int dim);

// One column of the coarse basis restricted to the interface.
struct CoarseColumn {
  Field field = Field::velocity;
  ComponentType kind = ComponentType::vertex;
  int component = -1;
  int direction = 0;  // translation component for velocity columns
  std::vector<int> dofs;
  std::vector<double> values;
};

struct CoarseColumns {
  std::vector<CoarseColumn> cols;
};

// Tensorizes a scalar partition of unity with the field's null space:
// velocity gets dim translation columns per function, pressure one column.
CoarseColumns tensor_nullspace(const InterfacePoU& pou, Field field,
                               const DofMap& dofmap);
// Scalar problems: dofs are node ids.
CoarseColumns tensor_scalar(const InterfacePoU& pou);

struct CoarseBasis {
  SparseMatrix phi;  // n_dofs x n_columns
  std::vector<CoarseColumn> columns;
  int n_velocity_rows = 0;  // 0 for scalar problems
};

// Energy-minimal extension of the interface values: per subdomain solves
// K_II x_I = -K_IG g. Interior sets must partition the non-interface dofs.
CoarseBasis harmonic_extension(const SparseMatrix& K, const CoarseColumns& cols,
                               const std::vector<int>& interface_dofs,
                               const std::vector<std::vector<int>>& interior_sets,
                               int n_velocity_rows = 0);

// Zeroes velocity rows of pressure columns and vice versa.
CoarseBasis decouple_fields(const CoarseBasis& basis);

// Galerkin coarse operator phi^T K phi (with optional field decoupling).
SparseMatrix assemble_coarse(const SparseMatrix& K, const CoarseBasis& basis,
                             bool decoupled);

}  // namespace solverkit

#pragma once

#include <string>

#include "solverkit/sparse.hpp"

namespace solverkit {

// Coordinate-format matrix market IO, 1-based indices, kind "general".
// Readers also accept "symmetric" files and expand the lower triangle.
void write_matrix_market(const std::string& path, const SparseMatrix& m);
SparseMatrix read_matrix_market(const std::string& path);

}  // namespace solverkit

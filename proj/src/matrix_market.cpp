#include "solverkit/matrix_market.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace solverkit {

void write_matrix_market(const std::string& path, const SparseMatrix& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << m.rows() << " " << m.cols() << " " << m.nnz() << "\n";
  char buf[64];
  for (int r = 0; r < m.rows(); ++r) {
    for (int k = m.row_offsets()[r]; k < m.row_offsets()[r + 1]; ++k) {
      std::snprintf(buf, sizeof(buf), "%d %d %.17g\n", r + 1, m.col_indices()[k] + 1,
                    m.values()[k]);
      out << buf;
    }
  }
}

SparseMatrix read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty matrix market file " + path);
  std::string header = line;
  for (char& c : header) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (header.rfind("%%matrixmarket", 0) != 0 ||
      header.find("coordinate") == std::string::npos) {
    throw std::runtime_error("unsupported matrix market header in " + path);
  }
  const bool symmetric = header.find("symmetric") != std::string::npos;
  if (header.find("pattern") != std::string::npos ||
      header.find("complex") != std::string::npos) {
    throw std::runtime_error("unsupported matrix market field type in " + path);
  }
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '%') break;
  }
  std::istringstream dims(line);
  int rows = 0, cols = 0;
  long long nnz = 0;
  if (!(dims >> rows >> cols >> nnz)) {
    throw std::runtime_error("bad matrix market size line in " + path);
  }
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(nnz));
  for (long long k = 0; k < nnz; ++k) {
    int i = 0, j = 0;
    double v = 0.0;
    if (!(in >> i >> j >> v)) {
      throw std::runtime_error("truncated matrix market data in " + path);
    }
    t.push_back({i - 1, j - 1, v, 0});
    if (symmetric && i != j) t.push_back({j - 1, i - 1, v, 0});
  }
  return SparseMatrix::from_triplets(rows, cols, std::move(t));
}

}  // namespace solverkit

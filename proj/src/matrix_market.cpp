#include "krylovrl/matrix_market.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace krylovrl {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

[[noreturn]] void fail(std::size_t line_no, const std::string& msg) {
  throw std::runtime_error("matrix market: line " + std::to_string(line_no) +
                           ": " + msg);
}

}  // namespace

SparseMatrix read_matrix_market(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) fail(line_no, "empty file");

  std::istringstream header(lower(line));
  std::string banner, object, format, field, symmetry;
  header >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%matrixmarket" || object != "matrix") {
    fail(line_no, "not a MatrixMarket matrix header");
  }
  if (format != "coordinate") fail(line_no, "unsupported format: " + format);
  if (field != "real" && field != "integer") {
    fail(line_no, "unsupported field: " + field);
  }
  if (symmetry != "general" && symmetry != "symmetric") {
    fail(line_no, "unsupported symmetry: " + symmetry);
  }
  const bool symmetric = symmetry == "symmetric";

  // Size line (after comments)
  std::size_t n_rows = 0, n_cols = 0, nnz = 0;
  for (;;) {
    if (!std::getline(in, line)) fail(line_no, "missing size line");
    ++line_no;
    if (line.empty() || line[0] == '%') continue;
    std::istringstream ls(line);
    if (!(ls >> n_rows >> n_cols >> nnz)) fail(line_no, "malformed size line");
    break;
  }

  std::vector<Triplet> trip;
  trip.reserve(symmetric ? 2 * nnz : nnz);
  for (std::size_t k = 0; k < nnz;) {
    if (!std::getline(in, line)) fail(line_no, "unexpected end of file");
    ++line_no;
    if (line.empty() || line[0] == '%') continue;
    std::istringstream ls(line);
    std::size_t i, j;
    double v;
    if (!(ls >> i >> j >> v)) fail(line_no, "malformed entry");
    if (i < 1 || i > n_rows || j < 1 || j > n_cols) {
      fail(line_no, "index out of range");
    }
    trip.push_back({i - 1, j - 1, v});
    if (symmetric && i != j) trip.push_back({j - 1, i - 1, v});
    ++k;
  }
  return csr_from_triplets(trip, n_rows, n_cols);
}

SparseMatrix read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  return read_matrix_market(in);
}

void write_matrix_market(const SparseMatrix& a, std::ostream& out) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << a.n_rows << ' ' << a.n_cols << ' ' << a.nnz() << '\n';
  out.precision(17);
  for (std::size_t r = 0; r < a.n_rows; ++r) {
    for (std::size_t k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) {
      out << r + 1 << ' ' << a.col_idx[k] + 1 << ' ' << a.values[k] << '\n';
    }
  }
}

void write_matrix_market(const SparseMatrix& a, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  write_matrix_market(a, out);
  if (!out) throw std::runtime_error("write failed: " + path);
}

DenseVector read_vector_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::size_t n = 0;
  if (!(in >> n)) throw std::runtime_error("vector file: missing count header: " + path);
  DenseVector v(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(in >> v[i])) {
      throw std::runtime_error("vector file: expected " + std::to_string(n) +
                               " values, got " + std::to_string(i) + ": " + path);
    }
  }
  return v;
}

void write_vector_file(const DenseVector& v, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  out.precision(17);
  out << v.size() << '\n';
  for (double e : v) out << e << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace krylovrl

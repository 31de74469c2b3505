#pragma once

#include <iosfwd>
#include <string>

#include "krylovrl/sparse.hpp"

namespace krylovrl {

/// Reads a Matrix Market coordinate file with real or integer values.
/// "general" matrices are kept as stored; "symmetric" files mirror their
/// off-diagonal entries. complex/pattern fields and hermitian/skew-symmetric
/// symmetries are rejected with a descriptive error, as is any malformed
/// line (reported with its line number).
SparseMatrix read_matrix_market(std::istream& in);
SparseMatrix read_matrix_market(const std::string& path);

/// Writes coordinate real general, 1-based indices, 17 significant digits.
/// read(write(a)) is the identity on canonical CSR.
void write_matrix_market(const SparseMatrix& a, std::ostream& out);
void write_matrix_market(const SparseMatrix& a, const std::string& path);

/// Vector file: first line the count n, then n decimal values one per line.
DenseVector read_vector_file(const std::string& path);
void write_vector_file(const DenseVector& v, const std::string& path);

}  // namespace krylovrl

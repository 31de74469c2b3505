#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <tuple>
#include <vector>

namespace krylovrl {

using DenseVector = std::vector<double>;

/// Square or rectangular real matrix in canonical CSR form: column indices
/// strictly increasing within each row, duplicates summed at construction,
/// explicit zeros dropped. Immutable after construction.
struct SparseMatrix {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<std::size_t> row_ptr;  // length n_rows+1
  std::vector<std::size_t> col_idx;
  std::vector<double> values;

  std::size_t nnz() const { return values.size(); }
  bool square() const { return n_rows == n_cols; }
};

struct Triplet {
  std::size_t row;
  std::size_t col;
  double value;
};

/// Builds a canonical CSR matrix from (row, col, value) entries.
/// Duplicate coordinates are summed; entries that sum to exactly zero are
/// dropped. Throws std::invalid_argument on an out-of-range index.
SparseMatrix csr_from_triplets(std::span<const Triplet> entries,
                               std::size_t n_rows, std::size_t n_cols);

/// y = A * x. Throws std::invalid_argument on dimension mismatch.
DenseVector spmv(const SparseMatrix& a, const DenseVector& x);

/// y += alpha * A * x, in place.
void spmv_add(const SparseMatrix& a, const DenseVector& x, double alpha,
              DenseVector& y);

double dot(const DenseVector& a, const DenseVector& b);
double norm2(const DenseVector& v);
void axpy(double alpha, const DenseVector& x, DenseVector& y);  // y += alpha x
void scale(DenseVector& v, double alpha);

/// Dense row-major s-by-s block.
struct DenseBlock {
  std::size_t size = 0;
  std::vector<double> values;  // size*size, row-major

  double& at(std::size_t i, std::size_t j) { return values[i * size + j]; }
  double at(std::size_t i, std::size_t j) const { return values[i * size + j]; }
};

/// Dense copy of the diagonal window rows/cols [start, start+size) of a
/// square matrix; entries absent from the sparsity pattern are zero.
DenseBlock extract_diagonal_block(const SparseMatrix& a, std::size_t start,
                                  std::size_t size);

}  // namespace krylovrl

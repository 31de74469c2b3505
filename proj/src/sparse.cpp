#include "krylovrl/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace krylovrl {

SparseMatrix csr_from_triplets(std::span<const Triplet> entries,
                               std::size_t n_rows, std::size_t n_cols) {
  for (const auto& t : entries) {
    if (t.row >= n_rows || t.col >= n_cols) {
      throw std::invalid_argument(
          "csr_from_triplets: index out of range at (" +
          std::to_string(t.row) + "," + std::to_string(t.col) + ") for " +
          std::to_string(n_rows) + "x" + std::to_string(n_cols) + " matrix");
    }
  }

  std::vector<Triplet> sorted(entries.begin(), entries.end());
  std::sort(sorted.begin(), sorted.end(), [](const Triplet& a, const Triplet& b) {
    return std::tie(a.row, a.col) < std::tie(b.row, b.col);
  });

  SparseMatrix m;
  m.n_rows = n_rows;
  m.n_cols = n_cols;
  m.row_ptr.assign(n_rows + 1, 0);

  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    double sum = 0.0;
    while (j < sorted.size() && sorted[j].row == sorted[i].row &&
           sorted[j].col == sorted[i].col) {
      sum += sorted[j].value;
      ++j;
    }
    if (sum != 0.0) {
      m.col_idx.push_back(sorted[i].col);
      m.values.push_back(sum);
      ++m.row_ptr[sorted[i].row + 1];
    }
    i = j;
  }
  for (std::size_t r = 0; r < n_rows; ++r) m.row_ptr[r + 1] += m.row_ptr[r];
  return m;
}

DenseVector spmv(const SparseMatrix& a, const DenseVector& x) {
  if (x.size() != a.n_cols) {
    throw std::invalid_argument("spmv: vector length " +
                                std::to_string(x.size()) +
                                " does not match n_cols " +
                                std::to_string(a.n_cols));
  }
  DenseVector y(a.n_rows, 0.0);
  for (std::size_t r = 0; r < a.n_rows; ++r) {
    double sum = 0.0;
    for (std::size_t k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) {
      sum += a.values[k] * x[a.col_idx[k]];
    }
    y[r] = sum;
  }
  return y;
}

void spmv_add(const SparseMatrix& a, const DenseVector& x, double alpha,
              DenseVector& y) {
  if (x.size() != a.n_cols || y.size() != a.n_rows) {
    throw std::invalid_argument("spmv_add: dimension mismatch");
  }
  for (std::size_t r = 0; r < a.n_rows; ++r) {
    double sum = 0.0;
    for (std::size_t k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) {
      sum += a.values[k] * x[a.col_idx[k]];
    }
    y[r] += alpha * sum;
  }
}

double dot(const DenseVector& a, const DenseVector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const DenseVector& v) { return std::sqrt(dot(v, v)); }

void axpy(double alpha, const DenseVector& x, DenseVector& y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

void scale(DenseVector& v, double alpha) {
  for (double& e : v) e *= alpha;
}

DenseBlock extract_diagonal_block(const SparseMatrix& a, std::size_t start,
                                  std::size_t size) {
  if (!a.square()) {
    throw std::invalid_argument("extract_diagonal_block: matrix not square");
  }
  if (start + size > a.n_rows) {
    throw std::invalid_argument("extract_diagonal_block: window [" +
                                std::to_string(start) + "," +
                                std::to_string(start + size) +
                                ") exceeds matrix order " +
                                std::to_string(a.n_rows));
  }
  DenseBlock block;
  block.size = size;
  block.values.assign(size * size, 0.0);
  for (std::size_t r = start; r < start + size; ++r) {
    for (std::size_t k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) {
      std::size_t c = a.col_idx[k];
      if (c >= start && c < start + size) {
        block.at(r - start, c - start) = a.values[k];
      }
    }
  }
  return block;
}

}  // namespace krylovrl

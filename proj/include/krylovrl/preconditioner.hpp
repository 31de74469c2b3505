#pragma once

#include "krylovrl/dense_qr.hpp"
#include "krylovrl/sparse.hpp"

namespace krylovrl {

/// Contiguous partition of [0, n) into blocks of nominal size k; the final
/// block absorbs the remainder (n mod k) when nonzero.
struct BlockPartition {
  std::size_t n = 0;
  std::size_t nominal_size = 0;
  std::vector<std::size_t> boundaries;  // ascending, first 0, last n

  std::size_t block_count() const { return boundaries.size() - 1; }
  std::size_t block_start(std::size_t i) const { return boundaries[i]; }
  std::size_t block_size(std::size_t i) const {
    return boundaries[i + 1] - boundaries[i];
  }
};

/// Throws std::invalid_argument unless 1 <= k <= n.
BlockPartition plan_partition(std::size_t n, std::size_t k);

/// Block-diagonal preconditioner M = diag(A_1, ..., A_k); each diagonal
/// block of A is held as a dense Householder QR factorization. Immutable
/// after build; apply solves each block independently.
struct BlockQRPreconditioner {
  BlockPartition partition;
  std::vector<QRFactor> factors;
  double reg_eps = 1e-10;

  static BlockQRPreconditioner build(const SparseMatrix& a,
                                     const BlockPartition& partition,
                                     double reg_eps = 1e-10);

  /// z = M^{-1} r (regularized on singular blocks).
  DenseVector apply(const DenseVector& r) const;
};

}  // namespace krylovrl

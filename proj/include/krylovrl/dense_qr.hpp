#pragma once

#include "krylovrl/sparse.hpp"

namespace krylovrl {

/// Householder QR factorization of a dense block: Q orthogonal, R upper
/// triangular with exact zeros below the diagonal. Singular blocks factor
/// without error (R may carry zero diagonal entries).
struct QRFactor {
  std::size_t size = 0;
  std::vector<double> q;  // size*size, row-major, orthogonal
  std::vector<double> r;  // size*size, row-major, upper triangular
};

/// Throws std::invalid_argument on non-finite input.
QRFactor dense_qr(const DenseBlock& block);

/// Solves R z = Q^T rhs by back substitution. Each diagonal pivot d is
/// replaced by a sign-preserving max(|d|, reg_eps * max(1, max_i |R_ii|))
/// before division, so singular factors still yield a finite result.
DenseVector qr_solve(const QRFactor& f, const DenseVector& rhs, double reg_eps);

}  // namespace krylovrl

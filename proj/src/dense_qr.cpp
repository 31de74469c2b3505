#include "krylovrl/dense_qr.hpp"

#include <cmath>
#include <stdexcept>

namespace krylovrl {

QRFactor dense_qr(const DenseBlock& block) {
  const std::size_t s = block.size;
  for (double v : block.values) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("dense_qr: non-finite entry in block");
    }
  }

  QRFactor f;
  f.size = s;
  f.r = block.values;                // reduced in place to R
  f.q.assign(s * s, 0.0);            // accumulates Q
  for (std::size_t i = 0; i < s; ++i) f.q[i * s + i] = 1.0;

  std::vector<double> v(s);
  for (std::size_t k = 0; k + 1 < s; ++k) {
    // Householder vector annihilating R[k+1..s-1][k]
    double norm_x = 0.0;
    for (std::size_t i = k; i < s; ++i) norm_x += f.r[i * s + k] * f.r[i * s + k];
    norm_x = std::sqrt(norm_x);
    if (norm_x == 0.0) continue;

    double alpha = f.r[k * s + k] >= 0.0 ? -norm_x : norm_x;
    double vnorm2 = 0.0;
    for (std::size_t i = k; i < s; ++i) {
      v[i] = f.r[i * s + k];
      if (i == k) v[i] -= alpha;
      vnorm2 += v[i] * v[i];
    }
    if (vnorm2 == 0.0) continue;
    const double beta = 2.0 / vnorm2;

    // R <- (I - beta v v^T) R
    for (std::size_t j = k; j < s; ++j) {
      double proj = 0.0;
      for (std::size_t i = k; i < s; ++i) proj += v[i] * f.r[i * s + j];
      proj *= beta;
      for (std::size_t i = k; i < s; ++i) f.r[i * s + j] -= proj * v[i];
    }
    // Q <- Q (I - beta v v^T)
    for (std::size_t i = 0; i < s; ++i) {
      double proj = 0.0;
      for (std::size_t j = k; j < s; ++j) proj += f.q[i * s + j] * v[j];
      proj *= beta;
      for (std::size_t j = k; j < s; ++j) f.q[i * s + j] -= proj * v[j];
    }
  }

  // Exact zeros below the diagonal
  for (std::size_t i = 1; i < s; ++i) {
    for (std::size_t j = 0; j < i; ++j) f.r[i * s + j] = 0.0;
  }
  return f;
}

DenseVector qr_solve(const QRFactor& f, const DenseVector& rhs, double reg_eps) {
  const std::size_t s = f.size;
  if (rhs.size() != s) {
    throw std::invalid_argument("qr_solve: rhs length mismatch");
  }
  if (!(reg_eps > 0.0)) {
    throw std::invalid_argument("qr_solve: reg_eps must be positive");
  }

  // y = Q^T rhs
  DenseVector y(s, 0.0);
  for (std::size_t i = 0; i < s; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < s; ++j) sum += f.q[j * s + i] * rhs[j];
    y[i] = sum;
  }

  double max_diag = 0.0;
  for (std::size_t i = 0; i < s; ++i) {
    max_diag = std::max(max_diag, std::abs(f.r[i * s + i]));
  }
  const double floor = reg_eps * std::max(1.0, max_diag);

  DenseVector z(s, 0.0);
  for (std::size_t ii = s; ii-- > 0;) {
    double sum = y[ii];
    for (std::size_t j = ii + 1; j < s; ++j) sum -= f.r[ii * s + j] * z[j];
    double d = f.r[ii * s + ii];
    double clamped = std::abs(d) >= floor ? d : (d < 0.0 ? -floor : floor);
    z[ii] = sum / clamped;
  }
  return z;
}

}  // namespace krylovrl

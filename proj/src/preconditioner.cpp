#include "krylovrl/preconditioner.hpp"

#include <stdexcept>

namespace krylovrl {

BlockPartition plan_partition(std::size_t n, std::size_t k) {
  if (k < 1 || k > n) {
    throw std::invalid_argument("plan_partition: block size " +
                                std::to_string(k) + " out of range [1, " +
                                std::to_string(n) + "]");
  }
  BlockPartition p;
  p.n = n;
  p.nominal_size = k;
  for (std::size_t b = 0; b < n; b += k) p.boundaries.push_back(b);
  p.boundaries.push_back(n);
  return p;
}

BlockQRPreconditioner BlockQRPreconditioner::build(const SparseMatrix& a,
                                                   const BlockPartition& partition,
                                                   double reg_eps) {
  if (!a.square() || a.n_rows != partition.n) {
    throw std::invalid_argument("BlockQRPreconditioner: partition order " +
                                std::to_string(partition.n) +
                                " does not match matrix order " +
                                std::to_string(a.n_rows));
  }
  BlockQRPreconditioner p;
  p.partition = partition;
  p.reg_eps = reg_eps;
  p.factors.reserve(partition.block_count());
  for (std::size_t i = 0; i < partition.block_count(); ++i) {
    p.factors.push_back(dense_qr(
        extract_diagonal_block(a, partition.block_start(i), partition.block_size(i))));
  }
  return p;
}

DenseVector BlockQRPreconditioner::apply(const DenseVector& r) const {
  if (r.size() != partition.n) {
    throw std::invalid_argument("BlockQRPreconditioner::apply: length mismatch");
  }
  DenseVector z(partition.n);
  DenseVector rhs;
  for (std::size_t i = 0; i < partition.block_count(); ++i) {
    const std::size_t start = partition.block_start(i);
    const std::size_t size = partition.block_size(i);
    rhs.assign(r.begin() + start, r.begin() + start + size);
    DenseVector zb = qr_solve(factors[i], rhs, reg_eps);
    std::copy(zb.begin(), zb.end(), z.begin() + start);
  }
  return z;
}

}  // namespace krylovrl

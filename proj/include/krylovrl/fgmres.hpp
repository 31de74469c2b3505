#pragma once

#include <functional>
#include <iosfwd>
#include <string>

#include "krylovrl/preconditioner.hpp"
#include "krylovrl/sparse.hpp"

namespace krylovrl {

struct SolverConfig {
  double tol = 1e-8;          // relative residual target
  std::size_t restart = 20;   // inner Krylov dimension m
  std::size_t max_cycles = 200;
  bool reorthogonalize = true;
  double reg_eps = 1e-10;     // pivot clamp for the block QR solves
};

/// Fixed 6-feature summary of the solver state handed to a chooser before
/// each restart cycle. Keeps the policy input size independent of n.
struct SolverObservation {
  static constexpr std::size_t kDim = 6;
  double features[kDim];
  // [0] log10(rel_residual), clamped to [-16, 2]
  // [1] log10 decrement of rel_residual over the previous cycle (0 at cycle 0)
  // [2] cycle_index / max_cycles
  // [3] log2(current block size) / log2(max action)
  // [4] log10(n) / 8
  // [5] restart / 64
};

SolverObservation make_observation(double rel_residual, double prev_rel_residual,
                                   std::size_t cycle, std::size_t max_cycles,
                                   std::size_t current_block, std::size_t max_block,
                                   std::size_t n, std::size_t restart);

/// Per-cycle block-size selection hook. `choose` runs once per restart cycle;
/// the returned size is clamped to [1, n] by the solver.
class BlockSizeChooser {
 public:
  virtual ~BlockSizeChooser() = default;
  virtual std::size_t choose(const SolverObservation& obs) = 0;
  /// Largest size the chooser can return (feeds observation feature 3).
  virtual std::size_t max_block() const = 0;
};

class ConstantChooser final : public BlockSizeChooser {
 public:
  explicit ConstantChooser(std::size_t k) : k_(k) {}
  std::size_t choose(const SolverObservation&) override { return k_; }
  std::size_t max_block() const override { return k_; }

 private:
  std::size_t k_;
};

/// Flexible Arnoldi workspace for one restart cycle: basis V, preconditioned
/// vectors Z, Hessenberg H, and the Givens-rotated residual vector g.
struct ArnoldiState {
  std::size_t n = 0;
  std::size_t m = 0;                   // restart dimension
  std::vector<DenseVector> v;          // m+1 basis vectors
  std::vector<DenseVector> z;          // m preconditioned vectors
  std::vector<double> h;               // (m+1) x m raw Hessenberg, row-major
  std::vector<double> r;               // Givens-rotated triangle, same shape
  std::vector<double> g;               // rotated beta*e1, length m+1
  std::vector<std::pair<double, double>> rotations;  // (cos, sin) per column
  bool reorthogonalize = true;

  ArnoldiState(std::size_t n_, std::size_t m_);
  double& hess(std::size_t i, std::size_t j) { return h[i * m + j]; }
  double hess(std::size_t i, std::size_t j) const { return h[i * m + j]; }
  double& tri(std::size_t i, std::size_t j) { return r[i * m + j]; }
  double tri(std::size_t i, std::size_t j) const { return r[i * m + j]; }
};

/// One flexible Arnoldi step: w = A z_j, modified Gram-Schmidt against
/// v_0..v_j (one repeat pass when reorthogonalize is set), then normalize
/// into v_{j+1}. Returns true on happy breakdown
/// (h[j+1][j] <= 1e-14 * ||A z_j||). Throws on non-finite w.
bool arnoldi_step(const SparseMatrix& a, ArnoldiState& state, std::size_t j,
                  const DenseVector& z_j);

/// Applies stored Givens rotations to column j of H, forms the new rotation
/// zeroing h[j+1][j], updates g. Returns |g[j+1]|, the minimal residual norm
/// over the current subspace.
double ls_update(ArnoldiState& state, std::size_t j);

enum class SolveOutcome { converged, max_cycles, breakdown };

struct CycleRecord {
  std::size_t cycle = 0;
  std::size_t block_size = 0;
  std::size_t inner_iters = 0;
  std::size_t matvecs = 0;     // cumulative
  double rel_residual = 0.0;   // true residual, recomputed
  double elapsed_ms = 0.0;
  // Diagnostics kept in memory only (not part of the CSV schema):
  double est_rel_residual = 0.0;        // Givens estimate at cycle end
  std::vector<double> inner_estimates;  // per inner step, relative
};

struct SolveTrace {
  std::vector<CycleRecord> records;
  SolveOutcome outcome = SolveOutcome::max_cycles;

  std::size_t total_matvecs() const {
    return records.empty() ? 0 : records.back().matvecs;
  }
  std::size_t cycles() const { return records.size(); }

  /// CSV with header cycle,block_size,inner_iters,matvecs,rel_residual,elapsed_ms
  std::string to_csv() const;
  static SolveTrace from_csv(std::istream& in);
};

struct SolveResult {
  DenseVector x;
  SolveTrace trace;
};

/// Called after each cycle with the Arnoldi workspace, the number of inner
/// steps taken, the Givens relative-residual estimate, and the recomputed
/// true relative residual. Test instrumentation; ignored when empty.
using CycleInspector = std::function<void(const ArnoldiState&, std::size_t,
                                          double, double)>;

/// Restarted FGMRES with right block-QR preconditioning. The chooser is
/// queried once per restart cycle; the preconditioner is rebuilt only when
/// the returned block size changes. The trace records the true residual
/// (recomputed from b - A x) at every cycle boundary.
SolveResult fgmres_solve(const SparseMatrix& a, const DenseVector& b,
                         BlockSizeChooser& chooser, const SolverConfig& config,
                         const CycleInspector& inspect = {});

std::string outcome_name(SolveOutcome o);

}  // namespace krylovrl

#pragma once

#include <cstdint>
#include <string>

#include "krylovrl/fgmres.hpp"
#include "krylovrl/sparse.hpp"

namespace krylovrl {

enum class Provenance { portfolio, option_step, file };

/// (A, b) pair with a tag recording which problem family produced it.
struct LinearSystem {
  SparseMatrix a;
  DenseVector b;
  Provenance provenance = Provenance::file;
};

/// Mean-variance portfolio instance: covariance Sigma, expected returns mu,
/// target return. Sigma must be symmetric to 1e-12.
struct PortfolioProblem {
  SparseMatrix sigma;  // n x n covariance
  DenseVector mu;      // expected per-period returns
  double r_target = 0.0;
};

/// Weights plus the two equality-constraint multipliers extracted from a
/// converged KKT solve.
struct KKTSolution {
  DenseVector weights;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
};

/// Assembles the (n+2) x (n+2) saddle-point system
///   [[Sigma, e, mu], [e^T, 0, 0], [mu^T, 0, 0]] y = (0, ..., 0, 1, r_target)
/// Throws if Sigma deviates from symmetry beyond 1e-12.
LinearSystem assemble_kkt(const PortfolioProblem& p);

KKTSolution split_kkt_solution(const DenseVector& y);

/// Factor-model covariance Sigma = F F^T + noise * diag(d) with positive d,
/// seeded returns mu in [0.01, 0.20], r_target = mean(mu). Deterministic
/// in the seed.
PortfolioProblem generate_covariance(std::size_t n, std::size_t n_factors,
                                     double noise, std::uint64_t seed);

/// Implicit finite-difference grid for a European call under Black-Scholes.
struct BSParams {
  double sigma = 0.2;    // annualized volatility
  double r = 0.05;       // risk-free rate
  double strike = 100.0;
  double s_max = 300.0;
  std::size_t m = 300;   // price subintervals
  double t_expiry = 1.0;
  std::size_t n_steps = 1000;

  double ds() const { return s_max / static_cast<double>(m); }
  double dt() const { return t_expiry / static_cast<double>(n_steps); }
  void validate() const;  // throws std::invalid_argument
};

/// Tridiagonal stencil coefficients at one grid node.
struct BSCoefficients {
  double alpha = 0.0;
  double b_diag = 0.0;
  double gamma = 0.0;
};

/// alpha = dt/2 (sigma^2 s^2/dS^2 - r s/dS), gamma with +, B = 1 + dt (sigma^2 s^2/dS^2 + r).
BSCoefficients bs_coefficients(double s_i, const BSParams& p);

double payoff(double s, double k);

/// Builds the tridiagonal interior system for one backward time step;
/// v_next has length m-1; t_index is the step being solved for (the b vector
/// picks up Dirichlet boundary contributions at t = t_index * dt).
LinearSystem assemble_bs_system(const BSParams& p, const DenseVector& v_next,
                                std::size_t t_index);

/// Steps the grid from expiry back to t = 0, solving each tridiagonal system
/// with FGMRES under the given chooser. Returns the interior node values at
/// t = 0 and accumulates the per-step traces into `cumulative` when non-null.
DenseVector bs_backward_solve(const BSParams& p, BlockSizeChooser& chooser,
                              const SolverConfig& config,
                              SolveTrace* cumulative = nullptr);

/// Closed-form Black-Scholes European call price.
double analytic_bs_call(double s, double k, double t, double r, double sigma);

}  // namespace krylovrl

#include "krylovrl/problems.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "krylovrl/rng.hpp"

namespace krylovrl {

namespace {

double csr_entry(const SparseMatrix& a, std::size_t row, std::size_t col) {
  const auto begin = a.col_idx.begin() + static_cast<std::ptrdiff_t>(a.row_ptr[row]);
  const auto end = a.col_idx.begin() + static_cast<std::ptrdiff_t>(a.row_ptr[row + 1]);
  const auto it = std::lower_bound(begin, end, col);
  if (it == end || *it != col) return 0.0;
  return a.values[static_cast<std::size_t>(it - a.col_idx.begin())];
}

}  // namespace

LinearSystem assemble_kkt(const PortfolioProblem& p) {
  const std::size_t n = p.sigma.n_rows;
  if (!p.sigma.square() || n < 1) {
    throw std::invalid_argument("assemble_kkt: sigma must be square, n >= 1");
  }
  if (p.mu.size() != n) {
    throw std::invalid_argument("assemble_kkt: mu length mismatch");
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = p.sigma.row_ptr[i]; k < p.sigma.row_ptr[i + 1]; ++k) {
      const std::size_t j = p.sigma.col_idx[k];
      const double v = p.sigma.values[k];
      if (std::abs(v - csr_entry(p.sigma, j, i)) > 1e-12 * std::max(1.0, std::abs(v))) {
        throw std::invalid_argument("assemble_kkt: sigma is not symmetric at (" +
                                    std::to_string(i) + "," + std::to_string(j) + ")");
      }
    }
  }

  std::vector<Triplet> t;
  t.reserve(p.sigma.nnz() + 4 * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = p.sigma.row_ptr[i]; k < p.sigma.row_ptr[i + 1]; ++k) {
      t.push_back({i, p.sigma.col_idx[k], p.sigma.values[k]});
    }
    t.push_back({i, n, 1.0});          // e column
    t.push_back({i, n + 1, p.mu[i]});  // mu column
    t.push_back({n, i, 1.0});          // e^T row
    t.push_back({n + 1, i, p.mu[i]});  // mu^T row
  }

  LinearSystem sys;
  sys.a = csr_from_triplets(t, n + 2, n + 2);
  sys.b.assign(n + 2, 0.0);
  sys.b[n] = 1.0;
  sys.b[n + 1] = p.r_target;
  sys.provenance = Provenance::portfolio;
  return sys;
}

KKTSolution split_kkt_solution(const DenseVector& y) {
  if (y.size() < 3) {
    throw std::invalid_argument("split_kkt_solution: vector too short");
  }
  KKTSolution s;
  s.weights.assign(y.begin(), y.end() - 2);
  // The assembled system carries +e, +mu columns, so the raw trailing
  // components are the negated Lagrange multipliers of
  //   min (1/2) x' Sigma x  s.t.  e' x = 1, mu' x = R.
  s.lambda1 = -y[y.size() - 2];
  s.lambda2 = -y[y.size() - 1];
  return s;
}

PortfolioProblem generate_covariance(std::size_t n, std::size_t n_factors,
                                     double noise, std::uint64_t seed) {
  if (n < 1 || n_factors > n) {
    throw std::invalid_argument("generate_covariance: require 1 <= n and n_factors <= n");
  }
  if (!(noise > 0.0)) {
    throw std::invalid_argument("generate_covariance: noise must be positive");
  }
  Rng rng(seed);

  // Per-asset volatilities in [0.05, 0.25], factor loadings scaled by them.
  std::vector<double> vol(n);
  for (std::size_t i = 0; i < n; ++i) vol[i] = rng.uniform(0.05, 0.25);
  std::vector<double> f(n * n_factors);
  const double load_scale =
      n_factors > 0 ? 1.0 / std::sqrt(static_cast<double>(n_factors)) : 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n_factors; ++k) {
      f[i * n_factors + k] = vol[i] * load_scale * rng.normal();
    }
  }

  // Sigma = F F^T + noise I, filled symmetrically.
  std::vector<Triplet> t;
  t.reserve(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n_factors; ++k) {
        s += f[i * n_factors + k] * f[j * n_factors + k];
      }
      if (i == j) s += noise;
      if (s != 0.0) {
        t.push_back({i, j, s});
        if (i != j) t.push_back({j, i, s});
      }
    }
  }

  PortfolioProblem p;
  p.sigma = csr_from_triplets(t, n, n);
  p.mu.resize(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    p.mu[i] = rng.uniform(0.01, 0.20);
    sum += p.mu[i];
  }
  p.r_target = sum / static_cast<double>(n);
  return p;
}

void BSParams::validate() const {
  if (!(s_max > strike) || !(strike > 0.0)) {
    throw std::invalid_argument("BSParams: require s_max > strike > 0");
  }
  if (m < 3) throw std::invalid_argument("BSParams: require m >= 3");
  if (n_steps < 1) throw std::invalid_argument("BSParams: require n_steps >= 1");
  if (sigma < 0.0) throw std::invalid_argument("BSParams: sigma must be >= 0");
  if (!(t_expiry > 0.0)) throw std::invalid_argument("BSParams: t_expiry must be > 0");
}

BSCoefficients bs_coefficients(double s_i, const BSParams& p) {
  const double ds = p.ds();
  const double dt = p.dt();
  const double diffusion = p.sigma * p.sigma * s_i * s_i / (ds * ds);
  const double drift = p.r * s_i / ds;
  BSCoefficients c;
  c.alpha = 0.5 * dt * (diffusion - drift);
  c.gamma = 0.5 * dt * (diffusion + drift);
  c.b_diag = 1.0 + dt * (diffusion + p.r);
  return c;
}

double payoff(double s, double k) { return std::max(s - k, 0.0); }

LinearSystem assemble_bs_system(const BSParams& p, const DenseVector& v_next,
                                std::size_t t_index) {
  p.validate();
  const std::size_t interior = p.m - 1;
  if (v_next.size() != interior) {
    throw std::invalid_argument("assemble_bs_system: expected " +
                                std::to_string(interior) + " interior values, got " +
                                std::to_string(v_next.size()));
  }
  const double ds = p.ds();
  const double t = static_cast<double>(t_index) * p.dt();

  std::vector<Triplet> trip;
  trip.reserve(3 * interior);
  LinearSystem sys;
  sys.b = v_next;
  for (std::size_t i = 1; i <= interior; ++i) {
    const BSCoefficients c = bs_coefficients(static_cast<double>(i) * ds, p);
    const std::size_t row = i - 1;
    if (i > 1) trip.push_back({row, row - 1, -c.alpha});
    trip.push_back({row, row, c.b_diag});
    if (i < interior) trip.push_back({row, row + 1, -c.gamma});
    // Dirichlet boundaries: V(0,t) = 0, V(s_max,t) = s_max - K e^{-r(T-t)}.
    if (i == interior) {
      sys.b[row] += c.gamma * (p.s_max - p.strike * std::exp(-p.r * (p.t_expiry - t)));
    }
  }
  sys.a = csr_from_triplets(trip, interior, interior);
  sys.provenance = Provenance::option_step;
  return sys;
}

DenseVector bs_backward_solve(const BSParams& p, BlockSizeChooser& chooser,
                              const SolverConfig& config, SolveTrace* cumulative) {
  p.validate();
  const std::size_t interior = p.m - 1;
  const double ds = p.ds();

  DenseVector v(interior);
  for (std::size_t i = 1; i <= interior; ++i) {
    v[i - 1] = payoff(static_cast<double>(i) * ds, p.strike);
  }

  std::size_t matvec_offset = 0;
  std::size_t cycle_offset = 0;
  for (std::size_t step = p.n_steps; step-- > 0;) {
    LinearSystem sys = assemble_bs_system(p, v, step);
    SolveResult res = fgmres_solve(sys.a, sys.b, chooser, config);
    if (cumulative) {
      for (CycleRecord rec : res.trace.records) {
        rec.cycle += cycle_offset;
        rec.matvecs += matvec_offset;
        cumulative->records.push_back(std::move(rec));
      }
      cycle_offset += res.trace.records.size();
      matvec_offset += res.trace.total_matvecs();
      cumulative->outcome = res.trace.outcome;
    }
    if (res.trace.outcome != SolveOutcome::converged) {
      throw std::runtime_error("bs_backward_solve: solver did not converge at time step " +
                               std::to_string(step) + " (" +
                               outcome_name(res.trace.outcome) + ")");
    }
    v = std::move(res.x);
  }
  return v;
}

double analytic_bs_call(double s, double k, double t, double r, double sigma) {
  if (!(s > 0.0) || !(k > 0.0) || !(t > 0.0) || !(sigma > 0.0)) {
    throw std::invalid_argument("analytic_bs_call: require s, k, t, sigma > 0");
  }
  const double sqt = sigma * std::sqrt(t);
  const double d1 = (std::log(s / k) + (r + 0.5 * sigma * sigma) * t) / sqt;
  const double d2 = d1 - sqt;
  auto normal_cdf = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
  return s * normal_cdf(d1) - k * std::exp(-r * t) * normal_cdf(d2);
}

}  // namespace krylovrl

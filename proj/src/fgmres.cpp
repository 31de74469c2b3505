#include "krylovrl/fgmres.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <istream>
#include <sstream>
#include <stdexcept>

namespace krylovrl {

SolverObservation make_observation(double rel_residual, double prev_rel_residual,
                                   std::size_t cycle, std::size_t max_cycles,
                                   std::size_t current_block, std::size_t max_block,
                                   std::size_t n, std::size_t restart) {
  auto clamp = [](double v, double lo, double hi) {
    return std::min(hi, std::max(lo, v));
  };
  SolverObservation obs{};
  const double lr = clamp(std::log10(std::max(rel_residual, 1e-300)), -16.0, 2.0);
  obs.features[0] = lr;
  if (cycle == 0 || !(prev_rel_residual > 0.0)) {
    obs.features[1] = 0.0;
  } else {
    const double lp = clamp(std::log10(prev_rel_residual), -16.0, 2.0);
    obs.features[1] = clamp(lp - lr, -16.0, 16.0);
  }
  obs.features[2] = max_cycles ? static_cast<double>(cycle) / max_cycles : 0.0;
  obs.features[3] = max_block > 1
                        ? std::log2(static_cast<double>(std::max<std::size_t>(current_block, 1))) /
                              std::log2(static_cast<double>(max_block))
                        : 0.0;
  obs.features[4] = std::log10(static_cast<double>(std::max<std::size_t>(n, 1))) / 8.0;
  obs.features[5] = static_cast<double>(restart) / 64.0;
  return obs;
}

ArnoldiState::ArnoldiState(std::size_t n_, std::size_t m_) : n(n_), m(m_) {
  v.assign(m + 1, DenseVector());
  z.assign(m, DenseVector());
  h.assign((m + 1) * m, 0.0);
  r.assign((m + 1) * m, 0.0);
  g.assign(m + 1, 0.0);
}

bool arnoldi_step(const SparseMatrix& a, ArnoldiState& state, std::size_t j,
                  const DenseVector& z_j) {
  DenseVector w = spmv(a, z_j);
  const double wnorm0 = norm2(w);
  if (!std::isfinite(wnorm0)) {
    throw std::runtime_error("arnoldi_step: non-finite vector after A*z");
  }
  state.z[j] = z_j;

  // Modified Gram-Schmidt, one repeat pass when reorthogonalization is on.
  const int passes = state.reorthogonalize ? 2 : 1;
  for (int pass = 0; pass < passes; ++pass) {
    for (std::size_t i = 0; i <= j; ++i) {
      const double hij = dot(state.v[i], w);
      axpy(-hij, state.v[i], w);
      state.hess(i, j) += hij;
    }
  }

  const double hnext = norm2(w);
  state.hess(j + 1, j) = hnext;
  if (hnext <= 1e-14 * wnorm0) {
    state.v[j + 1].assign(state.n, 0.0);
    return true;  // happy breakdown
  }
  scale(w, 1.0 / hnext);
  state.v[j + 1] = std::move(w);
  return false;
}

double ls_update(ArnoldiState& state, std::size_t j) {
  for (std::size_t i = 0; i <= j + 1; ++i) state.tri(i, j) = state.hess(i, j);
  for (std::size_t i = 0; i < state.rotations.size(); ++i) {
    const auto [c, s] = state.rotations[i];
    const double t0 = state.tri(i, j);
    const double t1 = state.tri(i + 1, j);
    state.tri(i, j) = c * t0 + s * t1;
    state.tri(i + 1, j) = -s * t0 + c * t1;
  }
  const double a = state.tri(j, j);
  const double b = state.tri(j + 1, j);
  const double rho = std::hypot(a, b);
  double c = 1.0, s = 0.0;
  if (rho > 0.0) {
    c = a / rho;
    s = b / rho;
  }
  state.rotations.emplace_back(c, s);
  state.tri(j, j) = rho;
  state.tri(j + 1, j) = 0.0;
  const double g0 = state.g[j];
  state.g[j] = c * g0;
  state.g[j + 1] = -s * g0;
  return std::abs(state.g[j + 1]);
}

namespace {

// Back-substitutes the Givens-triangularized Hessenberg for the inner
// least-squares coefficients y (first `cols` columns).
DenseVector solve_triangular(const ArnoldiState& st, std::size_t cols) {
  DenseVector y(cols, 0.0);
  for (std::size_t ii = cols; ii-- > 0;) {
    double sum = st.g[ii];
    for (std::size_t jj = ii + 1; jj < cols; ++jj) sum -= st.tri(ii, jj) * y[jj];
    const double d = st.tri(ii, ii);
    y[ii] = d != 0.0 ? sum / d : 0.0;
  }
  return y;
}

bool all_finite(const DenseVector& v) {
  for (double e : v) {
    if (!std::isfinite(e)) return false;
  }
  return true;
}

}  // namespace

SolveResult fgmres_solve(const SparseMatrix& a, const DenseVector& b,
                         BlockSizeChooser& chooser, const SolverConfig& config,
                         const CycleInspector& inspect) {
  if (!a.square()) throw std::invalid_argument("fgmres_solve: matrix not square");
  if (b.size() != a.n_rows) {
    throw std::invalid_argument("fgmres_solve: rhs length mismatch");
  }
  const std::size_t n = a.n_rows;
  const double bnorm = norm2(b);
  if (!(bnorm > 0.0)) {
    throw std::invalid_argument("fgmres_solve: rhs norm must be positive");
  }

  const auto t_start = std::chrono::steady_clock::now();
  auto elapsed_ms = [&t_start] {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - t_start)
        .count();
  };

  SolveResult result;
  result.x.assign(n, 0.0);
  DenseVector r = b;
  double relres = 1.0;
  double prev_relres = 0.0;
  std::size_t matvecs = 0;
  std::size_t cur_k = 0;
  BlockQRPreconditioner precond;
  result.trace.outcome = SolveOutcome::max_cycles;

  for (std::size_t cycle = 0; cycle < config.max_cycles; ++cycle) {
    const SolverObservation obs = make_observation(
        relres, prev_relres, cycle, config.max_cycles,
        cur_k == 0 ? 1 : cur_k, chooser.max_block(), n, config.restart);
    const std::size_t k =
        std::clamp<std::size_t>(chooser.choose(obs), 1, n);
    if (k != cur_k) {
      precond = BlockQRPreconditioner::build(a, plan_partition(n, k),
                                             config.reg_eps);
      cur_k = k;
    }

    const double beta = norm2(r);
    ArnoldiState st(n, config.restart);
    st.reorthogonalize = config.reorthogonalize;
    st.v[0] = r;
    scale(st.v[0], 1.0 / beta);
    st.g[0] = beta;

    std::size_t inner = 0;
    bool happy = false;
    bool broke_down = false;
    double est = beta;
    std::vector<double> inner_estimates;
    for (std::size_t j = 0; j < config.restart; ++j) {
      DenseVector z_j = precond.apply(st.v[j]);
      if (!all_finite(z_j)) {
        broke_down = true;
        break;
      }
      bool flag;
      try {
        flag = arnoldi_step(a, st, j, z_j);
      } catch (const std::runtime_error&) {
        broke_down = true;
        break;
      }
      ++matvecs;
      est = ls_update(st, j);
      ++inner;
      inner_estimates.push_back(est / bnorm);
      if (flag) {
        happy = true;
        break;
      }
      if (est / bnorm <= config.tol) break;
    }

    if (inner > 0) {
      const DenseVector y = solve_triangular(st, inner);
      for (std::size_t j = 0; j < inner; ++j) axpy(y[j], st.z[j], result.x);
    }

    // True residual each cycle; the Givens estimate can drift.
    r = b;
    spmv_add(a, result.x, -1.0, r);
    ++matvecs;
    const double new_relres = norm2(r) / bnorm;

    CycleRecord rec;
    rec.cycle = cycle;
    rec.block_size = k;
    rec.inner_iters = inner;
    rec.matvecs = matvecs;
    rec.rel_residual = new_relres;
    rec.elapsed_ms = elapsed_ms();
    rec.est_rel_residual = est / bnorm;
    rec.inner_estimates = std::move(inner_estimates);
    result.trace.records.push_back(std::move(rec));

    if (inspect) inspect(st, inner, est / bnorm, new_relres);

    if (broke_down || !std::isfinite(new_relres)) {
      result.trace.outcome = SolveOutcome::breakdown;
      return result;
    }
    prev_relres = relres;
    relres = new_relres;
    if (relres <= config.tol) {
      result.trace.outcome = SolveOutcome::converged;
      return result;
    }
    if (happy) {
      // Exact subspace solution that still misses the tolerance.
      result.trace.outcome = SolveOutcome::breakdown;
      return result;
    }
  }
  return result;
}

std::string SolveTrace::to_csv() const {
  std::ostringstream out;
  out << "cycle,block_size,inner_iters,matvecs,rel_residual,elapsed_ms\n";
  out.precision(17);
  for (const auto& r : records) {
    out << r.cycle << ',' << r.block_size << ',' << r.inner_iters << ','
        << r.matvecs << ',' << r.rel_residual << ',' << r.elapsed_ms << '\n';
  }
  return out.str();
}

SolveTrace SolveTrace::from_csv(std::istream& in) {
  SolveTrace trace;
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("SolveTrace::from_csv: empty input");
  }
  if (line != "cycle,block_size,inner_iters,matvecs,rel_residual,elapsed_ms") {
    throw std::runtime_error("SolveTrace::from_csv: unexpected header: " + line);
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    CycleRecord rec;
    char comma;
    if (!(ls >> rec.cycle >> comma >> rec.block_size >> comma >>
          rec.inner_iters >> comma >> rec.matvecs >> comma >>
          rec.rel_residual >> comma >> rec.elapsed_ms)) {
      throw std::runtime_error("SolveTrace::from_csv: malformed row: " + line);
    }
    trace.records.push_back(rec);
  }
  return trace;
}

std::string outcome_name(SolveOutcome o) {
  switch (o) {
    case SolveOutcome::converged: return "converged";
    case SolveOutcome::max_cycles: return "max_cycles";
    case SolveOutcome::breakdown: return "breakdown";
  }
  return "unknown";
}

}  // namespace krylovrl

// Acceptance suite: runs each criterion and prints one PASS/FAIL line.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <vector>

#include "krylovrl/fgmres.hpp"
#include "krylovrl/matrix_market.hpp"
#include "krylovrl/ppo.hpp"
#include "krylovrl/problems.hpp"
#include "krylovrl/rng.hpp"

using namespace krylovrl;

namespace {

int failures = 0;

void report(const std::string& id, bool ok, const std::string& detail) {
  std::cout << id << (ok ? " PASS" : " FAIL") << " (" << detail << ")\n";
  if (!ok) ++failures;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// A1: implicit FD price vs the closed form at S=100.
void a1() {
  const auto t0 = std::chrono::steady_clock::now();
  BSParams p;  // sigma 0.2, r 0.05, K 100, S_max 300, m 300, T 1, N 1000
  ConstantChooser chooser(16);
  SolverConfig cfg;
  auto v = bs_backward_solve(p, chooser, cfg);
  const double fd = v[99];  // node 100 (ds = 1), interior index 99
  const double exact = analytic_bs_call(100.0, 100.0, 1.0, 0.05, 0.2);
  const double diff = std::abs(fd - exact);
  const double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t0).count();
  std::ostringstream d;
  d << "fd " << fd << " analytic " << exact << " |diff| " << diff << " in "
    << secs << " s";
  report("A1", diff <= 0.05 && secs <= 60.0, d.str());
}

// A2: KKT constraint and stationarity residuals at tol 1e-10.
void a2() {
  const auto t0 = std::chrono::steady_clock::now();
  auto prob = generate_covariance(500, 10, 0.05, 20260823);
  auto sys = assemble_kkt(prob);
  ConstantChooser chooser(32);
  SolverConfig cfg;
  cfg.tol = 1e-10;
  cfg.restart = 100;
  cfg.max_cycles = 500;
  auto res = fgmres_solve(sys.a, sys.b, chooser, cfg);
  auto sol = split_kkt_solution(res.x);

  double budget = -1.0, ret = -prob.r_target;
  for (std::size_t i = 0; i < 500; ++i) {
    budget += sol.weights[i];
    ret += prob.mu[i] * sol.weights[i];
  }
  auto sx = spmv(prob.sigma, sol.weights);
  double stat = 0.0, sigma_inf = 0.0;
  for (std::size_t i = 0; i < 500; ++i) {
    stat = std::max(stat, std::abs(sx[i] - sol.lambda1 - sol.lambda2 * prob.mu[i]));
    double row = 0.0;
    for (std::size_t k = prob.sigma.row_ptr[i]; k < prob.sigma.row_ptr[i + 1]; ++k) {
      row += std::abs(prob.sigma.values[k]);
    }
    sigma_inf = std::max(sigma_inf, row);
  }
  const double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t0).count();
  const bool ok = res.trace.outcome == SolveOutcome::converged &&
                  std::abs(budget) <= 1e-6 && std::abs(ret) <= 1e-6 &&
                  stat <= 1e-6 * sigma_inf && secs <= 30.0;
  std::ostringstream d;
  d << outcome_name(res.trace.outcome) << " |e^T x - 1| " << std::abs(budget)
    << " |mu^T x - R| " << std::abs(ret) << " stationarity " << stat << " vs "
    << 1e-6 * sigma_inf << " in " << secs << " s";
  report("A2", ok, d.str());
}

// A3: exact preconditioner on a conforming block-diagonal matrix.
void a3() {
  Rng rng(303);
  const std::size_t n = 64, k = 8;
  std::vector<Triplet> t;
  for (std::size_t b = 0; b < n; b += k) {
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) {
        double v = rng.uniform(-1.0, 1.0);
        if (i == j) v += 4.0;
        t.push_back({b + i, b + j, v});
      }
    }
  }
  auto a = csr_from_triplets(t, n, n);
  DenseVector b(n);
  for (auto& e : b) e = rng.uniform(-1.0, 1.0);
  ConstantChooser chooser(k);
  auto res = fgmres_solve(a, b, chooser, {});
  const bool ok = res.trace.outcome == SolveOutcome::converged &&
                  res.trace.cycles() == 1 &&
                  res.trace.records[0].inner_iters == 1 &&
                  res.trace.total_matvecs() <= 2;
  std::ostringstream d;
  d << "cycles " << res.trace.cycles() << " inner "
    << (res.trace.records.empty() ? 0 : res.trace.records[0].inner_iters)
    << " matvecs " << res.trace.total_matvecs();
  report("A3", ok, d.str());
}

// A4: Arnoldi invariants measured inside real solves on 20 seeded systems.
void a4() {
  Rng seed_rng(404);
  double worst_ortho = 0.0, worst_rel = 0.0, worst_est = 0.0;
  bool monotone = true;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 20 + static_cast<std::size_t>(seed_rng.uniform_index(181));
    Rng rng(seed_rng.next_raw());
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) {
          t.push_back({i, j, 3.0 + rng.uniform()});
        } else if (rng.uniform() < 0.1) {
          t.push_back({i, j, rng.uniform(-1.0, 1.0)});
        }
      }
    }
    auto a = csr_from_triplets(t, n, n);
    DenseVector b(n);
    for (auto& e : b) e = rng.uniform(-1.0, 1.0);

    auto inspect = [&](const ArnoldiState& st, std::size_t cols, double est,
                       double true_rel) {
      for (std::size_t i = 0; i <= cols; ++i) {
        for (std::size_t j = 0; j <= cols; ++j) {
          const double g = dot(st.v[i], st.v[j]);
          worst_ortho = std::max(worst_ortho,
                                 std::abs(g - (i == j ? 1.0 : 0.0)));
        }
      }
      double num = 0.0, den = 0.0;
      for (std::size_t j = 0; j < cols; ++j) {
        auto az = spmv(a, st.z[j]);
        for (std::size_t i = 0; i < n; ++i) {
          double vh = 0.0;
          for (std::size_t kk = 0; kk <= j + 1; ++kk) {
            vh += st.v[kk][i] * st.hess(kk, j);
          }
          num += (az[i] - vh) * (az[i] - vh);
          den += az[i] * az[i];
        }
      }
      if (den > 0.0) worst_rel = std::max(worst_rel, std::sqrt(num / den));
      worst_est = std::max(worst_est, std::abs(est - true_rel) /
                                          std::max(true_rel, 1e-300));
    };

    ConstantChooser chooser(4);
    auto res = fgmres_solve(a, b, chooser, {}, inspect);
    for (const auto& rec : res.trace.records) {
      for (std::size_t i = 1; i < rec.inner_estimates.size(); ++i) {
        if (rec.inner_estimates[i] > rec.inner_estimates[i - 1] + 1e-12) {
          monotone = false;
        }
      }
    }
  }
  const bool ok = worst_ortho <= 1e-8 && worst_rel <= 1e-10 &&
                  worst_est <= 1e-6 && monotone;
  std::ostringstream d;
  d << "ortho " << worst_ortho << " relation " << worst_rel << " est-vs-true "
    << worst_est << (monotone ? " monotone" : " NOT monotone");
  report("A4", ok, d.str());
}

// A5: trained policy vs exhaustive constant baseline on held-out seeds.
void a5() {
  const auto t0 = std::chrono::steady_clock::now();
  ActionSpace space;
  space.sizes = {1, 2, 4, 8, 16, 32, 64};
  auto family = [](std::uint64_t seed) {
    return assemble_kkt(generate_covariance(300, 10, 0.05, seed));
  };
  SolverConfig scfg;  // tol 1e-8, restart 20, max_cycles 200
  PpoConfig pcfg;
  pcfg.episodes = 200;
  pcfg.seed = 505;
  auto trained = train(family, space, pcfg, scfg, RewardKind::log_decrement);

  const std::vector<std::uint64_t> held_out{10001, 10002, 10003, 10004, 10005,
                                            10006, 10007, 10008, 10009, 10010};
  auto matvecs_for = [&](BlockSizeChooser& chooser, std::uint64_t seed) {
    auto sys = family(seed);
    auto res = fgmres_solve(sys.a, sys.b, chooser, scfg);
    if (res.trace.outcome != SolveOutcome::converged) return 1e18;
    return static_cast<double>(res.trace.total_matvecs());
  };

  double best_const = 1e18;
  std::size_t best_k = 0;
  for (std::size_t k : space.sizes) {
    std::vector<double> counts;
    for (auto s : held_out) {
      ConstantChooser c(k);
      counts.push_back(matvecs_for(c, s));
    }
    const double med = median(counts);
    if (med < best_const) {
      best_const = med;
      best_k = k;
    }
  }

  std::vector<double> policy_counts;
  for (auto s : held_out) {
    PolicyChooser chooser(trained.params, /*greedy=*/true);
    policy_counts.push_back(matvecs_for(chooser, s));
  }
  const double policy_med = median(policy_counts);
  const double secs = std::chrono::duration<double>(
                          std::chrono::steady_clock::now() - t0).count();
  const bool ok = policy_med <= 1.1 * best_const && secs <= 600.0;
  std::ostringstream d;
  d << "policy median matvecs " << policy_med << " best constant k=" << best_k
    << " median " << best_const << " ratio " << policy_med / best_const
    << " in " << secs << " s";
  report("A5", ok, d.str());
}

// A6: PPO gradient/GAE correctness and bit-deterministic retraining.
void a6() {
  // Gradient check on a 6 -> 8 -> 3 net.
  Rng init_rng(606);
  Mlp actor({6, 8, 3}, &init_rng);
  Mlp critic({6, 8, 3, 1}, &init_rng);
  Rng rng(607);
  DenseVector x(6);
  for (auto& e : x) e = rng.uniform(-1.0, 1.0);
  const std::size_t action = 2;
  const double h = 1e-5;
  double worst = 0.0;

  {
    Mlp::Cache cache;
    DenseVector probs = softmax(actor.forward(x, &cache));
    Mlp::Gradient grad = actor.zero_gradient();
    DenseVector dlogits(3);
    for (std::size_t k = 0; k < 3; ++k) {
      dlogits[k] = (k == action ? 1.0 : 0.0) - probs[k];
    }
    actor.backward(cache, dlogits, grad);
    actor.for_each_param(grad, [&](double& param, double& g) {
      const double saved = param;
      param = saved + h;
      const double up = std::log(softmax(actor.forward(x))[action]);
      param = saved - h;
      const double dn = std::log(softmax(actor.forward(x))[action]);
      param = saved;
      const double fd = (up - dn) / (2.0 * h);
      worst = std::max(worst,
                       std::abs(fd - g) / std::max({std::abs(fd), std::abs(g), 1e-6}));
    });
  }
  {
    Mlp::Cache cache;
    critic.forward(x, &cache);
    Mlp::Gradient grad = critic.zero_gradient();
    critic.backward(cache, {1.0}, grad);
    critic.for_each_param(grad, [&](double& param, double& g) {
      const double saved = param;
      param = saved + h;
      const double up = critic.forward(x)[0];
      param = saved - h;
      const double dn = critic.forward(x)[0];
      param = saved;
      const double fd = (up - dn) / (2.0 * h);
      worst = std::max(worst,
                       std::abs(fd - g) / std::max({std::abs(fd), std::abs(g), 1e-6}));
    });
  }

  auto [adv, ret] = gae({1.0, 1.0}, {0.5, 0.5}, 0.0, 1.0, 1.0);
  const bool gae_ok =
      adv[0] == 1.5 && adv[1] == 0.5 && ret[0] == 2.0 && ret[1] == 1.0;

  // Retrain twice; policy files must match byte for byte.
  ActionSpace space;
  space.sizes = {1, 2, 4, 8};
  PpoConfig cfg;
  cfg.episodes = 10;
  cfg.seed = 608;
  SolverConfig scfg;
  scfg.max_cycles = 30;
  auto family = [](std::uint64_t seed) {
    return assemble_kkt(generate_covariance(40, 5, 0.05, seed));
  };
  auto r1 = train(family, space, cfg, scfg);
  auto r2 = train(family, space, cfg, scfg);
  save_policy(r1.params, "a6_policy_1.txt");
  save_policy(r2.params, "a6_policy_2.txt");
  std::ifstream f1("a6_policy_1.txt"), f2("a6_policy_2.txt");
  std::stringstream s1, s2;
  s1 << f1.rdbuf();
  s2 << f2.rdbuf();
  const bool det_ok = s1.str() == s2.str() && !s1.str().empty();
  std::remove("a6_policy_1.txt");
  std::remove("a6_policy_2.txt");

  std::ostringstream d;
  d << "grad rel err " << worst << (gae_ok ? ", gae exact" : ", gae WRONG")
    << (det_ok ? ", retrain identical" : ", retrain DIFFERS");
  report("A6", worst <= 1e-4 && gae_ok && det_ok, d.str());
}

// A7: I/O fidelity.
void a7() {
  bool ok = true;
  std::ostringstream d;

  // Matrix Market round trip on a random canonical matrix.
  Rng rng(707);
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < 40; ++i) {
    for (std::size_t j = 0; j < 40; ++j) {
      if (i == j || rng.uniform() < 0.05) t.push_back({i, j, rng.uniform(-1.0, 1.0)});
    }
  }
  auto a = csr_from_triplets(t, 40, 40);
  std::ostringstream out;
  write_matrix_market(a, out);
  std::istringstream in(out.str());
  auto back = read_matrix_market(in);
  if (back.row_ptr != a.row_ptr || back.col_idx != a.col_idx ||
      back.values != a.values) {
    ok = false;
    d << "mm round-trip differs; ";
  }

  // Symmetric expansion fixture.
  std::istringstream sym(
      "%%MatrixMarket matrix coordinate real symmetric\n"
      "3 3 4\n1 1 2.0\n2 1 5.0\n3 2 -1.0\n3 3 1.0\n");
  auto s = read_matrix_market(sym);
  auto entry = [&](std::size_t i, std::size_t j) {
    for (std::size_t k = s.row_ptr[i]; k < s.row_ptr[i + 1]; ++k) {
      if (s.col_idx[k] == j) return s.values[k];
    }
    return 0.0;
  };
  if (s.nnz() != 6 || entry(0, 1) != 5.0 || entry(1, 0) != 5.0 ||
      entry(1, 2) != -1.0 || entry(2, 1) != -1.0) {
    ok = false;
    d << "symmetric expansion wrong; ";
  }

  // Policy save/load preserves greedy actions on 100 observations.
  ActionSpace space;
  auto params = init_policy(space, 709);
  save_policy(params, "a7_policy.txt");
  auto loaded = load_policy("a7_policy.txt");
  std::remove("a7_policy.txt");
  Rng orng(710);
  for (int i = 0; i < 100; ++i) {
    SolverObservation obs{};
    for (double& f : obs.features) f = orng.uniform(-1.0, 1.0);
    auto [p1, v1] = policy_forward(params, obs);
    auto [p2, v2] = policy_forward(loaded, obs);
    if (std::max_element(p1.begin(), p1.end()) - p1.begin() !=
        std::max_element(p2.begin(), p2.end()) - p2.begin()) {
      ok = false;
      d << "greedy action changed after reload; ";
      break;
    }
  }
  if (ok) d << "mm round-trip exact, symmetric expansion, policy reload";
  report("A7", ok, d.str());
}

// A8: large-matrix ingestion. Uses KRYLOVRL_A8_MATRIX when provided, else a
// synthetic 4008x4008 stand-in with 8188 nonzeros.
void a8() {
  std::string path;
  std::string source;
  if (const char* env = std::getenv("KRYLOVRL_A8_MATRIX")) {
    path = env;
    source = "local file " + path;
  } else {
    Rng rng(808);
    const std::size_t n = 4008;
    std::vector<Triplet> t;
    std::set<std::pair<std::size_t, std::size_t>> used;
    for (std::size_t i = 0; i < n; ++i) {
      t.push_back({i, i, 2.0 + rng.uniform()});
      used.insert({i, i});
    }
    while (t.size() < 8188) {
      const std::size_t i = rng.uniform_index(n);
      const std::size_t j = rng.uniform_index(n);
      if (i != j && used.insert({i, j}).second) {
        t.push_back({i, j, rng.uniform(-0.5, 0.5)});
      }
    }
    auto a = csr_from_triplets(t, n, n);
    path = "a8_standin.mtx";
    write_matrix_market(a, path);
    source = "synthetic stand-in (no KRYLOVRL_A8_MATRIX set)";
  }

  auto a = read_matrix_market(path);
  DenseVector b = spmv(a, DenseVector(a.n_cols, 1.0));
  SolverConfig cfg;  // tol 1e-8, max_cycles 200
  bool converged = false;
  std::size_t winning_k = 0;
  for (std::size_t k : {1, 2, 4, 8, 16, 32, 64}) {
    if (k > a.n_rows) break;
    ConstantChooser chooser(k);
    auto res = fgmres_solve(a, b, chooser, cfg);
    if (res.trace.outcome == SolveOutcome::converged) {
      converged = true;
      winning_k = k;
      break;
    }
  }
  if (source.rfind("synthetic", 0) == 0) std::remove("a8_standin.mtx");
  std::ostringstream d;
  d << source << ", " << a.n_rows << "x" << a.n_cols << " nnz " << a.nnz();
  if (converged) d << ", converged at k=" << winning_k;
  report("A8", converged, d.str());
}

}  // namespace

int main() {
  a1();
  a2();
  a3();
  a4();
  a5();
  a6();
  a7();
  a8();
  if (failures) {
    std::cout << failures << " criterion(s) failed\n";
    return 1;
  }
  std::cout << "all criteria passed\n";
  return 0;
}

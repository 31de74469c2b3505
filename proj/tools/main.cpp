// krylovrl command line: assemble, solve, train, bench, price.
#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "krylovrl/fgmres.hpp"
#include "krylovrl/matrix_market.hpp"
#include "krylovrl/ppo.hpp"
#include "krylovrl/problems.hpp"

using namespace krylovrl;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNoConvergence = 3;
constexpr int kExitIo = 4;
constexpr int kExitDimension = 5;

std::uint64_t default_seed() {
  if (const char* env = std::getenv("KRYLOVRL_SEED")) {
    return std::strtoull(env, nullptr, 10);
  }
  return 0;
}

DenseVector ones_rhs(const SparseMatrix& a) {
  return spmv(a, DenseVector(a.n_cols, 1.0));
}

std::vector<std::size_t> parse_size_list(const std::string& csv) {
  std::vector<std::size_t> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoull(item));
  }
  if (out.empty()) throw CLI::ValidationError("empty size list");
  return out;
}

struct SolveFlags {
  std::size_t block_size = 0;
  std::string policy_path;
  double tol = 1e-8;
  std::size_t restart = 20;
  std::size_t max_cycles = 200;

  void attach(CLI::App* cmd, bool required_source = true) {
    auto* bs = cmd->add_option("--block-size", block_size, "Constant preconditioner block size");
    auto* pol = cmd->add_option("--policy", policy_path, "Trained policy file (greedy decoding)");
    bs->excludes(pol);
    pol->excludes(bs);
    if (required_source) {
      cmd->parse_complete_callback([cmd] {
        if (cmd->count("--block-size") == 0 && cmd->count("--policy") == 0) {
          throw CLI::RequiredError("one of --block-size or --policy");
        }
      });
    }
    cmd->add_option("--tol", tol, "Relative residual tolerance");
    cmd->add_option("--restart", restart, "Inner Krylov dimension");
    cmd->add_option("--max-cycles", max_cycles, "Restart cycle cap");
  }

  SolverConfig config() const {
    SolverConfig cfg;
    cfg.tol = tol;
    cfg.restart = restart;
    cfg.max_cycles = max_cycles;
    return cfg;
  }

  // Owns the loaded policy, if any.
  std::unique_ptr<BlockSizeChooser> make_chooser(std::unique_ptr<PolicyParameters>& holder) const {
    if (!policy_path.empty()) {
      holder = std::make_unique<PolicyParameters>(load_policy(policy_path));
      return std::make_unique<PolicyChooser>(*holder, /*greedy=*/true);
    }
    return std::make_unique<ConstantChooser>(block_size == 0 ? 8 : block_size);
  }
};

struct BSFlags {
  BSParams params;

  void attach(CLI::App* cmd) {
    cmd->add_option("--sigma", params.sigma, "Volatility (annualized)")->required();
    cmd->add_option("--rate", params.r, "Risk-free rate")->required();
    cmd->add_option("--strike", params.strike, "Strike price")->required();
    cmd->add_option("--smax", params.s_max, "Price-domain upper bound")->required();
    cmd->add_option("--m", params.m, "Price subintervals")->required();
    cmd->add_option("--expiry", params.t_expiry, "Years to expiry")->required();
    cmd->add_option("--steps", params.n_steps, "Time steps")->required();
  }
};

void print_solve_summary(const SolveResult& res, double bnorm_unused) {
  (void)bnorm_unused;
  const auto& t = res.trace;
  const double relres = t.records.empty() ? 1.0 : t.records.back().rel_residual;
  const double ms = t.records.empty() ? 0.0 : t.records.back().elapsed_ms;
  std::cout << "outcome " << outcome_name(t.outcome) << "\n"
            << "rel_residual " << relres << "\n"
            << "cycles " << t.cycles() << "\n"
            << "matvecs " << t.total_matvecs() << "\n"
            << "elapsed_ms " << ms << "\n";
}

void write_trace(const SolveTrace& trace, const std::string& path) {
  if (path.empty()) return;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  out << trace.to_csv();
}

int cmd_assemble_portfolio(std::size_t n, std::size_t factors, double noise,
                           std::uint64_t seed, double target, bool has_target,
                           const std::string& sigma_file,
                           const std::string& out_matrix, const std::string& out_rhs) {
  PortfolioProblem prob;
  if (!sigma_file.empty()) {
    prob.sigma = read_matrix_market(sigma_file);
    Rng rng(seed);
    prob.mu.resize(prob.sigma.n_rows);
    double sum = 0.0;
    for (auto& m : prob.mu) {
      m = rng.uniform(0.01, 0.20);
      sum += m;
    }
    prob.r_target = sum / static_cast<double>(prob.mu.size());
  } else {
    prob = generate_covariance(n, factors, noise, seed);
  }
  if (has_target) prob.r_target = target;
  auto sys = assemble_kkt(prob);
  write_matrix_market(sys.a, out_matrix);
  write_vector_file(sys.b, out_rhs);
  std::cout << "wrote " << out_matrix << " (" << sys.a.n_rows << "x"
            << sys.a.n_cols << ", nnz " << sys.a.nnz() << ") and " << out_rhs
            << "\n";
  return 0;
}

int cmd_assemble_bs(const BSParams& p, std::size_t t_index,
                    const std::string& out_matrix, const std::string& out_rhs) {
  p.validate();
  // v_next defaults to the expiry payoff (the first backward step).
  DenseVector v(p.m - 1);
  for (std::size_t i = 1; i < p.m; ++i) {
    v[i - 1] = payoff(static_cast<double>(i) * p.ds(), p.strike);
  }
  auto sys = assemble_bs_system(p, v, t_index);
  write_matrix_market(sys.a, out_matrix);
  write_vector_file(sys.b, out_rhs);
  std::cout << "wrote " << out_matrix << " (" << sys.a.n_rows << "x"
            << sys.a.n_cols << ", nnz " << sys.a.nnz() << ") and " << out_rhs
            << "\n";
  return 0;
}

int cmd_solve(const std::string& matrix_path, const std::string& rhs_path,
              const SolveFlags& flags, const std::string& trace_path) {
  auto a = read_matrix_market(matrix_path);
  DenseVector b = rhs_path.empty() ? ones_rhs(a) : read_vector_file(rhs_path);
  std::unique_ptr<PolicyParameters> policy;
  auto chooser = flags.make_chooser(policy);
  auto res = fgmres_solve(a, b, *chooser, flags.config());
  print_solve_summary(res, 0.0);
  write_trace(res.trace, trace_path);
  return res.trace.outcome == SolveOutcome::converged ? 0 : kExitNoConvergence;
}

struct FamilyFlags {
  std::string family;  // kkt | bs | file-dir
  std::size_t n = 300;
  std::size_t factors = 10;
  double noise = 0.05;
  double sigma_lo = 0.05;
  double sigma_hi = 0.25;
  double rate = 0.01;
  std::size_t m = 200;
  std::string dir;

  void attach(CLI::App* cmd) {
    cmd->add_option("--family", family, "Problem family: kkt | bs | file-dir")->required();
    cmd->add_option("--n", n, "Assets (kkt family)");
    cmd->add_option("--factors", factors, "Factor count (kkt family)");
    cmd->add_option("--noise", noise, "Diagonal noise (kkt family)");
    cmd->add_option("--sigma-lo", sigma_lo, "Volatility lower bound (bs family)");
    cmd->add_option("--sigma-hi", sigma_hi, "Volatility upper bound (bs family)");
    cmd->add_option("--rate", rate, "Risk-free rate (bs family)");
    cmd->add_option("--m", m, "Grid subintervals (bs family)");
    cmd->add_option("--dir", dir, "Directory of .mtx files (file-dir family)");
  }

  std::function<LinearSystem(std::uint64_t)> make() const {
    if (family == "kkt") {
      const std::size_t nn = n, ff = factors;
      const double no = noise;
      return [nn, ff, no](std::uint64_t seed) {
        return assemble_kkt(generate_covariance(nn, ff, no, seed));
      };
    }
    if (family == "bs") {
      BSParams base;
      base.r = rate;
      base.m = m;
      base.strike = 100.0;
      base.s_max = 300.0;
      base.t_expiry = 1.0;
      base.n_steps = 100;
      const double lo = sigma_lo, hi = sigma_hi;
      return [base, lo, hi](std::uint64_t seed) {
        Rng rng(seed);
        BSParams p = base;
        p.sigma = rng.uniform(lo, hi);
        DenseVector v(p.m - 1);
        for (std::size_t i = 1; i < p.m; ++i) {
          v[i - 1] = payoff(static_cast<double>(i) * p.ds(), p.strike);
        }
        return assemble_bs_system(p, v, p.n_steps - 1);
      };
    }
    if (family == "file-dir") {
      std::vector<std::string> files;
      for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.path().extension() == ".mtx") files.push_back(e.path().string());
      }
      if (files.empty()) throw std::runtime_error("file-dir family: no .mtx files in " + dir);
      std::sort(files.begin(), files.end());
      return [files](std::uint64_t seed) {
        const auto& path = files[seed % files.size()];
        LinearSystem sys;
        sys.a = read_matrix_market(path);
        sys.b = ones_rhs(sys.a);
        sys.provenance = Provenance::file;
        return sys;
      };
    }
    throw CLI::ValidationError("unknown family: " + family);
  }
};

int cmd_train(const FamilyFlags& fam, std::size_t episodes, std::uint64_t seed,
              const std::string& out, const std::string& actions_csv,
              const std::string& reward_name, const SolveFlags& flags) {
  ActionSpace space;
  if (!actions_csv.empty()) space.sizes = parse_size_list(actions_csv);
  PpoConfig cfg;
  cfg.episodes = episodes;
  cfg.seed = seed;
  const RewardKind reward = reward_name == "log-decrement"
                                ? RewardKind::log_decrement
                                : RewardKind::negative_residual;
  auto result = train(fam.make(), space, cfg, flags.config(), reward, &std::cerr);
  save_policy(result.params, out);
  std::ofstream log(out + ".log.csv");
  if (!log) throw std::runtime_error("cannot open file for writing: " + out + ".log.csv");
  log << training_log_csv(result.log);
  std::cout << "wrote " << out << " and " << out << ".log.csv\n";
  return 0;
}

int cmd_bench(const std::string& matrix_path, const std::string& rhs_path,
              const std::string& sizes_csv, const std::string& policy_path,
              std::size_t repeats, const SolveFlags& flags,
              const std::string& out_csv, const std::string& trace_dir) {
  auto a = read_matrix_market(matrix_path);
  DenseVector b = rhs_path.empty() ? ones_rhs(a) : read_vector_file(rhs_path);
  const SolverConfig cfg = flags.config();

  std::ostringstream rows;
  rows.precision(17);
  rows << "config,block_size_or_policy,cycles,matvecs,final_rel_residual,elapsed_ms\n";

  auto run_one = [&](const std::string& label, BlockSizeChooser& chooser,
                     const std::string& trace_name) {
    for (std::size_t rep = 0; rep < repeats; ++rep) {
      auto res = fgmres_solve(a, b, chooser, cfg);
      const auto& t = res.trace;
      const double relres = t.records.empty() ? 1.0 : t.records.back().rel_residual;
      const double ms = t.records.empty() ? 0.0 : t.records.back().elapsed_ms;
      rows << label.substr(0, label.find(':')) << ',' << label.substr(label.find(':') + 1)
           << ',' << t.cycles() << ',' << t.total_matvecs() << ',' << relres
           << ',' << ms << '\n';
      if (!trace_dir.empty() && rep == 0) {
        write_trace(t, trace_dir + "/" + trace_name + ".csv");
      }
    }
  };

  for (std::size_t k : parse_size_list(sizes_csv)) {
    ConstantChooser chooser(k);
    run_one("constant:" + std::to_string(k), chooser, "constant_k" + std::to_string(k));
  }
  if (!policy_path.empty()) {
    auto params = load_policy(policy_path);
    PolicyChooser chooser(params, /*greedy=*/true);
    run_one("policy:" + policy_path, chooser, "policy");
  }

  if (out_csv.empty()) {
    std::cout << rows.str();
  } else {
    std::ofstream out(out_csv);
    if (!out) throw std::runtime_error("cannot open file for writing: " + out_csv);
    out << rows.str();
    std::cout << "wrote " << out_csv << "\n";
  }
  return 0;
}

int cmd_price(const BSParams& p, double spot, const SolveFlags& flags,
              const std::string& trace_path) {
  p.validate();
  if (spot < 0.0 || spot > p.s_max) {
    std::cerr << "price: --spot must lie in [0, " << p.s_max << "]\n";
    return kExitUsage;
  }
  std::unique_ptr<PolicyParameters> policy;
  auto chooser = flags.make_chooser(policy);
  SolveTrace cumulative;
  auto v = bs_backward_solve(p, *chooser, flags.config(), &cumulative);

  // Linear interpolation on the interior grid (node i holds S = i*ds, i>=1).
  const double ds = p.ds();
  const double pos = spot / ds;
  const std::size_t lo = std::min<std::size_t>(static_cast<std::size_t>(pos),
                                               p.m - 1);
  auto node_value = [&](std::size_t i) {
    if (i == 0) return 0.0;
    if (i >= p.m) return p.s_max - p.strike * std::exp(-p.r * p.t_expiry);
    return v[i - 1];
  };
  const double frac = pos - static_cast<double>(lo);
  const double fd = node_value(lo) * (1.0 - frac) + node_value(lo + 1) * frac;

  const double sigma_eff = p.sigma > 0.0 ? p.sigma : 1e-12;
  const double exact = analytic_bs_call(std::max(spot, 1e-12), p.strike,
                                        p.t_expiry, p.r, sigma_eff);
  std::cout << "fd_price " << fd << "\n"
            << "analytic_price " << exact << "\n"
            << "abs_diff " << std::abs(fd - exact) << "\n";
  write_trace(cumulative, trace_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Block-QR preconditioned FGMRES with an RL-tuned block size"};
  app.require_subcommand(1);

  int rc = 0;
  std::function<int()> action;

  // assemble
  auto* assemble = app.add_subcommand("assemble", "Write a linear system to files");
  assemble->require_subcommand(1);
  {
    auto* portfolio = assemble->add_subcommand("portfolio", "Mean-variance KKT system");
    auto n = std::make_shared<std::size_t>(100);
    auto factors = std::make_shared<std::size_t>(10);
    auto noise = std::make_shared<double>(0.05);
    auto seed = std::make_shared<std::uint64_t>(default_seed());
    auto target = std::make_shared<double>(0.0);
    auto sigma_file = std::make_shared<std::string>();
    auto out_matrix = std::make_shared<std::string>("A.mtx");
    auto out_rhs = std::make_shared<std::string>("b.txt");
    portfolio->add_option("--n", *n, "Number of assets");
    portfolio->add_option("--factors", *factors, "Factor count");
    portfolio->add_option("--noise", *noise, "Diagonal noise level");
    portfolio->add_option("--seed", *seed, "Generator seed");
    auto* topt = portfolio->add_option("--target", *target, "Target return");
    portfolio->add_option("--sigma-file", *sigma_file, "Covariance Matrix Market file");
    portfolio->add_option("--out-matrix", *out_matrix, "Output matrix path");
    portfolio->add_option("--out-rhs", *out_rhs, "Output rhs path");
    portfolio->callback([=, &action] {
      action = [=] {
        return cmd_assemble_portfolio(*n, *factors, *noise, *seed, *target,
                                      topt->count() > 0, *sigma_file,
                                      *out_matrix, *out_rhs);
      };
    });

    auto* bs = assemble->add_subcommand("bs", "Implicit Black-Scholes step system");
    auto bsf = std::make_shared<BSFlags>();
    bsf->attach(bs);
    auto t_index = std::make_shared<std::size_t>(0);
    auto bs_out_matrix = std::make_shared<std::string>("A.mtx");
    auto bs_out_rhs = std::make_shared<std::string>("b.txt");
    bs->add_option("--time-index", *t_index, "Time step index")->required();
    bs->add_option("--out-matrix", *bs_out_matrix, "Output matrix path");
    bs->add_option("--out-rhs", *bs_out_rhs, "Output rhs path");
    bs->callback([=, &action] {
      action = [=] {
        return cmd_assemble_bs(bsf->params, *t_index, *bs_out_matrix, *bs_out_rhs);
      };
    });
  }

  // solve
  {
    auto* solve = app.add_subcommand("solve", "Solve A x = b from files");
    auto matrix = std::make_shared<std::string>();
    auto rhs = std::make_shared<std::string>();
    auto trace = std::make_shared<std::string>();
    auto flags = std::make_shared<SolveFlags>();
    solve->add_option("--matrix", *matrix, "Matrix Market file")->required();
    solve->add_option("--rhs", *rhs, "Vector file (default: A*ones)");
    solve->add_option("--trace", *trace, "Write SolveTrace CSV here");
    flags->attach(solve);
    solve->callback([=, &action] {
      action = [=] { return cmd_solve(*matrix, *rhs, *flags, *trace); };
    });
  }

  // train
  {
    auto* tr = app.add_subcommand("train", "Train the block-size policy");
    auto fam = std::make_shared<FamilyFlags>();
    fam->attach(tr);
    auto episodes = std::make_shared<std::size_t>(200);
    auto seed = std::make_shared<std::uint64_t>(default_seed());
    auto out = std::make_shared<std::string>("policy.txt");
    auto actions = std::make_shared<std::string>();
    auto reward = std::make_shared<std::string>("neg-residual");
    auto flags = std::make_shared<SolveFlags>();
    tr->add_option("--episodes", *episodes, "Training episodes")->required();
    tr->add_option("--seed", *seed, "Training seed");
    tr->add_option("--out", *out, "Policy output path")->required();
    tr->add_option("--actions", *actions, "Comma list of block sizes");
    tr->add_option("--reward", *reward, "neg-residual | log-decrement");
    flags->attach(tr, /*required_source=*/false);
    tr->callback([=, &action] {
      action = [=] {
        return cmd_train(*fam, *episodes, *seed, *out, *actions, *reward, *flags);
      };
    });
  }

  // bench
  {
    auto* bench = app.add_subcommand("bench", "Compare constant sizes and a policy");
    auto matrix = std::make_shared<std::string>();
    auto rhs = std::make_shared<std::string>();
    auto sizes = std::make_shared<std::string>("1,2,4,8,16,32,64");
    auto repeats = std::make_shared<std::size_t>(1);
    auto out = std::make_shared<std::string>();
    auto trace_dir = std::make_shared<std::string>();
    auto flags = std::make_shared<SolveFlags>();
    bench->add_option("--matrix", *matrix, "Matrix Market file")->required();
    bench->add_option("--rhs", *rhs, "Vector file (default: A*ones)");
    bench->add_option("--block-sizes", *sizes, "Comma list of constant sizes");
    bench->add_option("--repeats", *repeats, "Repetitions per configuration");
    bench->add_option("--out", *out, "Comparison CSV path (default stdout)");
    bench->add_option("--trace-dir", *trace_dir, "Directory for per-config residual traces");
    flags->attach(bench, /*required_source=*/false);
    bench->callback([=, &action] {
      action = [=] {
        return cmd_bench(*matrix, *rhs, *sizes, flags->policy_path, *repeats,
                         *flags, *out, *trace_dir);
      };
    });
  }

  // price
  {
    auto* price = app.add_subcommand("price", "Price a European call by implicit FD");
    auto bsf = std::make_shared<BSFlags>();
    bsf->attach(price);
    auto spot = std::make_shared<double>(0.0);
    auto trace = std::make_shared<std::string>();
    auto flags = std::make_shared<SolveFlags>();
    price->add_option("--spot", *spot, "Spot price to report")->required();
    price->add_option("--trace", *trace, "Cumulative SolveTrace CSV path");
    flags->attach(price);
    price->callback([=, &action] {
      action = [=] { return cmd_price(bsf->params, *spot, *flags, *trace); };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  }

  try {
    rc = action();
  } catch (const PolicyVersionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const PolicyShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDimension;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDimension;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return rc;
}

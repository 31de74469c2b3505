#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <sstream>

#include "krylovrl/fgmres.hpp"
#include "krylovrl/matrix_market.hpp"
#include "krylovrl/ppo.hpp"
#include "krylovrl/problems.hpp"
#include "krylovrl/rng.hpp"

namespace py = pybind11;
using namespace krylovrl;

namespace {

SparseMatrix make_csr(const std::vector<std::tuple<std::size_t, std::size_t, double>>& entries,
                      std::size_t n_rows, std::size_t n_cols) {
  std::vector<Triplet> t;
  t.reserve(entries.size());
  for (const auto& [i, j, v] : entries) t.push_back({i, j, v});
  return csr_from_triplets(t, n_rows, n_cols);
}

}  // namespace

PYBIND11_MODULE(_krylovrl, m) {
  m.doc() = "Sparse FGMRES solver with learned block-size selection";

  py::class_<SparseMatrix>(m, "SparseMatrix")
      .def_readonly("n_rows", &SparseMatrix::n_rows)
      .def_readonly("n_cols", &SparseMatrix::n_cols)
      .def_readonly("row_ptr", &SparseMatrix::row_ptr)
      .def_readonly("col_idx", &SparseMatrix::col_idx)
      .def_readonly("values", &SparseMatrix::values)
      .def("nnz", &SparseMatrix::nnz)
      .def("__repr__", [](const SparseMatrix& a) {
        std::ostringstream s;
        s << "SparseMatrix(" << a.n_rows << "x" << a.n_cols << ", nnz=" << a.nnz()
          << ")";
        return s.str();
      });

  m.def("csr_from_triplets", &make_csr, py::arg("entries"), py::arg("n_rows"),
        py::arg("n_cols"),
        "Build a canonical CSR matrix from (row, col, value) triplets.");
  m.def("spmv", [](const SparseMatrix& a, const DenseVector& x) { return spmv(a, x); },
        py::arg("a"), py::arg("x"));

  py::class_<SolverConfig>(m, "SolverConfig")
      .def(py::init<>())
      .def_readwrite("tol", &SolverConfig::tol)
      .def_readwrite("restart", &SolverConfig::restart)
      .def_readwrite("max_cycles", &SolverConfig::max_cycles)
      .def_readwrite("reorthogonalize", &SolverConfig::reorthogonalize)
      .def_readwrite("reg_eps", &SolverConfig::reg_eps);

  py::enum_<SolveOutcome>(m, "SolveOutcome")
      .value("converged", SolveOutcome::converged)
      .value("max_cycles", SolveOutcome::max_cycles)
      .value("breakdown", SolveOutcome::breakdown);

  py::class_<CycleRecord>(m, "CycleRecord")
      .def_readonly("cycle", &CycleRecord::cycle)
      .def_readonly("block_size", &CycleRecord::block_size)
      .def_readonly("inner_iters", &CycleRecord::inner_iters)
      .def_readonly("matvecs", &CycleRecord::matvecs)
      .def_readonly("rel_residual", &CycleRecord::rel_residual)
      .def_readonly("elapsed_ms", &CycleRecord::elapsed_ms);

  py::class_<SolveTrace>(m, "SolveTrace")
      .def_readonly("records", &SolveTrace::records)
      .def_readonly("outcome", &SolveTrace::outcome)
      .def("total_matvecs", &SolveTrace::total_matvecs)
      .def("cycles", &SolveTrace::cycles)
      .def("to_csv", &SolveTrace::to_csv);

  py::class_<SolveResult>(m, "SolveResult")
      .def_readonly("x", &SolveResult::x)
      .def_readonly("trace", &SolveResult::trace);

  m.def(
      "solve",
      [](const SparseMatrix& a, const DenseVector& b, std::size_t block_size,
         const SolverConfig& cfg) {
        ConstantChooser chooser(block_size);
        return fgmres_solve(a, b, chooser, cfg);
      },
      py::arg("a"), py::arg("b"), py::arg("block_size") = 8,
      py::arg("config") = SolverConfig{},
      "Restarted FGMRES with a block-QR preconditioner of fixed block size.");
  m.def(
      "solve_with_policy",
      [](const SparseMatrix& a, const DenseVector& b, const PolicyParameters& p,
         const SolverConfig& cfg) {
        PolicyChooser chooser(p, /*greedy=*/true);
        return fgmres_solve(a, b, chooser, cfg);
      },
      py::arg("a"), py::arg("b"), py::arg("policy"),
      py::arg("config") = SolverConfig{},
      "FGMRES with the per-cycle block size chosen greedily by a policy.");

  py::class_<PortfolioProblem>(m, "PortfolioProblem")
      .def_readonly("sigma", &PortfolioProblem::sigma)
      .def_readonly("mu", &PortfolioProblem::mu)
      .def_readonly("r_target", &PortfolioProblem::r_target);

  py::class_<LinearSystem>(m, "LinearSystem")
      .def_readonly("a", &LinearSystem::a)
      .def_readonly("b", &LinearSystem::b);

  m.def("generate_covariance", &generate_covariance, py::arg("n"),
        py::arg("n_factors"), py::arg("noise"), py::arg("seed"));
  m.def("assemble_kkt", &assemble_kkt, py::arg("problem"));
  m.def(
      "split_kkt_solution",
      [](const DenseVector& y) {
        auto s = split_kkt_solution(y);
        return py::make_tuple(s.weights, s.lambda1, s.lambda2);
      },
      py::arg("y"), "Split a KKT solve into (weights, lambda1, lambda2).");

  py::class_<BSParams>(m, "BSParams")
      .def(py::init<>())
      .def_readwrite("sigma", &BSParams::sigma)
      .def_readwrite("r", &BSParams::r)
      .def_readwrite("strike", &BSParams::strike)
      .def_readwrite("s_max", &BSParams::s_max)
      .def_readwrite("m", &BSParams::m)
      .def_readwrite("t_expiry", &BSParams::t_expiry)
      .def_readwrite("n_steps", &BSParams::n_steps)
      .def("ds", &BSParams::ds)
      .def("dt", &BSParams::dt);

  m.def(
      "bs_grid_price",
      [](const BSParams& p, std::size_t block_size, const SolverConfig& cfg) {
        ConstantChooser chooser(block_size);
        return bs_backward_solve(p, chooser, cfg);
      },
      py::arg("params"), py::arg("block_size") = 8,
      py::arg("config") = SolverConfig{},
      "Interior option values at t=0 from implicit finite differences.");
  m.def("analytic_bs_call", &analytic_bs_call, py::arg("s"), py::arg("k"),
        py::arg("t"), py::arg("r"), py::arg("sigma"));

  py::class_<ActionSpace>(m, "ActionSpace")
      .def(py::init<>())
      .def_readwrite("sizes", &ActionSpace::sizes);

  py::class_<PolicyParameters>(m, "PolicyParameters")
      .def_readonly("schema_version", &PolicyParameters::schema_version);

  py::class_<PpoConfig>(m, "PpoConfig")
      .def(py::init<>())
      .def_readwrite("gamma", &PpoConfig::gamma)
      .def_readwrite("gae_lambda", &PpoConfig::gae_lambda)
      .def_readwrite("clip_eps", &PpoConfig::clip_eps)
      .def_readwrite("epochs_per_update", &PpoConfig::epochs_per_update)
      .def_readwrite("minibatch", &PpoConfig::minibatch)
      .def_readwrite("learning_rate", &PpoConfig::learning_rate)
      .def_readwrite("entropy_coef", &PpoConfig::entropy_coef)
      .def_readwrite("value_coef", &PpoConfig::value_coef)
      .def_readwrite("episodes", &PpoConfig::episodes)
      .def_readwrite("seed", &PpoConfig::seed);

  m.def(
      "train_on_kkt_family",
      [](std::size_t n, std::size_t n_factors, double noise,
         const ActionSpace& actions, const PpoConfig& ppo_cfg,
         const SolverConfig& solver_cfg) {
        auto family = [=](std::uint64_t seed) {
          return assemble_kkt(generate_covariance(n, n_factors, noise, seed));
        };
        auto result = train(family, actions, ppo_cfg, solver_cfg);
        return py::make_tuple(std::move(result.params),
                              training_log_csv(result.log));
      },
      py::arg("n"), py::arg("n_factors"), py::arg("noise"), py::arg("actions"),
      py::arg("ppo_config"), py::arg("solver_config") = SolverConfig{},
      "Train a block-size policy on seeded portfolio KKT systems; returns "
      "(policy, training log CSV).");

  m.def("init_policy", &init_policy, py::arg("actions"), py::arg("seed"),
        py::arg("hidden") = 64, py::arg("zero_init") = false);
  m.def("save_policy", &save_policy, py::arg("policy"), py::arg("path"));
  m.def("load_policy", &load_policy, py::arg("path"));
  m.def(
      "policy_forward",
      [](const PolicyParameters& p, const std::vector<double>& features) {
        if (features.size() != SolverObservation::kDim) {
          throw std::invalid_argument("policy_forward: expected 6 features");
        }
        SolverObservation obs{};
        std::copy(features.begin(), features.end(), obs.features);
        auto [probs, value] = policy_forward(p, obs);
        return py::make_tuple(probs, value);
      },
      py::arg("policy"), py::arg("features"),
      "Action probabilities and value estimate for a 6-feature observation.");

  m.def(
      "read_matrix_market",
      [](const std::string& path) { return read_matrix_market(path); },
      py::arg("path"));
  m.def(
      "write_matrix_market",
      [](const SparseMatrix& a, const std::string& path) {
        write_matrix_market(a, path);
      },
      py::arg("a"), py::arg("path"));
  m.def("read_vector_file", [](const std::string& path) { return read_vector_file(path); },
        py::arg("path"));
  m.def(
      "write_vector_file",
      [](const DenseVector& v, const std::string& path) {
        write_vector_file(v, path);
      },
      py::arg("v"), py::arg("path"));
}

#include "krylovrl/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace krylovrl {

namespace {

DenseVector obs_to_vec(const SolverObservation& obs) {
  return DenseVector(obs.features, obs.features + SolverObservation::kDim);
}

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

void adam_step(Mlp& net, Mlp::Gradient& grad, Mlp::Gradient& m, Mlp::Gradient& v,
               std::size_t step, double lr) {
  const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(step));
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    auto apply = [&](std::vector<double>& p, std::vector<double>& g,
                     std::vector<double>& mm, std::vector<double>& vv) {
      for (std::size_t i = 0; i < p.size(); ++i) {
        mm[i] = kAdamBeta1 * mm[i] + (1.0 - kAdamBeta1) * g[i];
        vv[i] = kAdamBeta2 * vv[i] + (1.0 - kAdamBeta2) * g[i] * g[i];
        p[i] -= lr * (mm[i] / bc1) / (std::sqrt(vv[i] / bc2) + kAdamEps);
      }
    };
    apply(net.layers()[l].w, grad.layers[l].w, m.layers[l].w, v.layers[l].w);
    apply(net.layers()[l].b, grad.layers[l].b, m.layers[l].b, v.layers[l].b);
  }
}

void zero_out(Mlp::Gradient& g) {
  for (auto& layer : g.layers) {
    std::fill(layer.w.begin(), layer.w.end(), 0.0);
    std::fill(layer.b.begin(), layer.b.end(), 0.0);
  }
}

}  // namespace

void ActionSpace::validate() const {
  if (sizes.empty()) throw std::invalid_argument("ActionSpace: empty");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] == 0) throw std::invalid_argument("ActionSpace: sizes must be positive");
    if (i > 0 && sizes[i] <= sizes[i - 1]) {
      throw std::invalid_argument("ActionSpace: sizes must be strictly ascending");
    }
  }
}

void PpoConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("PpoConfig: gamma in (0,1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) {
    throw std::invalid_argument("PpoConfig: gae_lambda in [0,1]");
  }
  if (!(clip_eps > 0.0)) throw std::invalid_argument("PpoConfig: clip_eps > 0");
  if (epochs_per_update < 1 || minibatch < 1) {
    throw std::invalid_argument("PpoConfig: epochs and minibatch must be >= 1");
  }
  if (!(learning_rate > 0.0)) throw std::invalid_argument("PpoConfig: learning_rate > 0");
}

PolicyParameters init_policy(const ActionSpace& actions, std::uint64_t seed,
                             std::size_t hidden, bool zero_init) {
  actions.validate();
  PolicyParameters p;
  p.actions = actions;
  Rng rng(seed);
  Rng* rp = zero_init ? nullptr : &rng;
  p.actor = Mlp({SolverObservation::kDim, hidden, hidden, actions.count()}, rp);
  p.critic = Mlp({SolverObservation::kDim, hidden, hidden, 1}, rp);
  return p;
}

std::pair<DenseVector, double> policy_forward(const PolicyParameters& params,
                                              const SolverObservation& obs) {
  const DenseVector x = obs_to_vec(obs);
  DenseVector logits = params.actor.forward(x);
  if (logits.size() != params.actions.count()) {
    throw PolicyShapeError("policy_forward: actor output size " +
                           std::to_string(logits.size()) +
                           " does not match action count " +
                           std::to_string(params.actions.count()));
  }
  const double value = params.critic.forward(x)[0];
  return {softmax(logits), value};
}

std::pair<std::size_t, double> sample_action(const DenseVector& probs, Rng& rng) {
  const double u = rng.uniform();
  double cum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cum += probs[i];
    if (u < cum) return {i, std::log(probs[i])};
  }
  const std::size_t last = probs.size() - 1;
  return {last, std::log(probs[last])};
}

std::pair<DenseVector, DenseVector> gae(const DenseVector& rewards,
                                        const DenseVector& values,
                                        double bootstrap, double gamma,
                                        double lambda) {
  if (rewards.size() != values.size()) {
    throw std::invalid_argument("gae: rewards/values length mismatch");
  }
  const std::size_t n = rewards.size();
  DenseVector adv(n, 0.0), ret(n, 0.0);
  double acc = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const double v_next = t + 1 < n ? values[t + 1] : bootstrap;
    const double delta = rewards[t] + gamma * v_next - values[t];
    acc = delta + gamma * lambda * acc;
    adv[t] = acc;
    ret[t] = adv[t] + values[t];
  }
  return {adv, ret};
}

AdamState AdamState::for_policy(const PolicyParameters& p) {
  AdamState s;
  s.actor_m = p.actor.zero_gradient();
  s.actor_v = p.actor.zero_gradient();
  s.critic_m = p.critic.zero_gradient();
  s.critic_v = p.critic.zero_gradient();
  return s;
}

UpdateStats ppo_update(PolicyParameters& params, AdamState& opt,
                       const std::vector<Transition>& batch,
                       const PpoConfig& cfg, Rng& rng) {
  cfg.validate();
  if (batch.empty()) throw std::invalid_argument("ppo_update: empty batch");
  const std::size_t n = batch.size();

  // GAE over the batch, restarting at episode boundaries (done flags).
  DenseVector advantages(n), returns(n);
  std::size_t start = 0;
  for (std::size_t t = 0; t < n; ++t) {
    if (batch[t].done || t + 1 == n) {
      DenseVector rw, vals;
      for (std::size_t i = start; i <= t; ++i) {
        rw.push_back(batch[i].reward);
        vals.push_back(batch[i].value);
      }
      auto [a, r] = gae(rw, vals, 0.0, cfg.gamma, cfg.gae_lambda);
      std::copy(a.begin(), a.end(), advantages.begin() + start);
      std::copy(r.begin(), r.end(), returns.begin() + start);
      start = t + 1;
    }
  }

  // Normalize advantages once per update.
  double mean = 0.0;
  for (double a : advantages) mean += a;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double a : advantages) var += (a - mean) * (a - mean);
  const double stddev = std::sqrt(var / static_cast<double>(n));
  for (double& a : advantages) a = (a - mean) / (stddev + 1e-8);

  const PolicyParameters saved = params;  // restored on non-finite loss

  Mlp::Gradient a_grad = params.actor.zero_gradient();
  Mlp::Gradient c_grad = params.critic.zero_gradient();
  UpdateStats stats;
  double stat_n = 0.0;

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < cfg.epochs_per_update; ++epoch) {
    // Fisher-Yates shuffle with the deterministic generator.
    for (std::size_t i = n; i-- > 1;) {
      const std::size_t j = static_cast<std::size_t>(rng.uniform_index(i + 1));
      std::swap(order[i], order[j]);
    }
    for (std::size_t mb_start = 0; mb_start < n; mb_start += cfg.minibatch) {
      const std::size_t mb_end = std::min(n, mb_start + cfg.minibatch);
      const double mb_size = static_cast<double>(mb_end - mb_start);
      zero_out(a_grad);
      zero_out(c_grad);
      double mb_ploss = 0.0, mb_vloss = 0.0, mb_entropy = 0.0, mb_kl = 0.0;

      for (std::size_t ii = mb_start; ii < mb_end; ++ii) {
        const Transition& tr = batch[order[ii]];
        const double adv = advantages[order[ii]];
        const double ret = returns[order[ii]];
        const DenseVector x = obs_to_vec(tr.obs);

        Mlp::Cache a_cache, c_cache;
        const DenseVector logits = params.actor.forward(x, &a_cache);
        const DenseVector probs = softmax(logits);
        const double logp = std::log(probs[tr.action_index]);
        const double ratio = std::exp(logp - tr.log_prob);
        const double clipped =
            std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
        const double surr1 = ratio * adv;
        const double surr2 = clipped * adv;
        mb_ploss += -std::min(surr1, surr2);
        mb_kl += tr.log_prob - logp;

        double entropy = 0.0;
        for (double p : probs) entropy -= p * std::log(p);
        mb_entropy += entropy;

        // d loss / d logp: active only when the unclipped surrogate is taken.
        const double dlogp = surr1 <= surr2 ? -ratio * adv : 0.0;
        DenseVector dlogits(probs.size());
        for (std::size_t kk = 0; kk < probs.size(); ++kk) {
          const double onehot = kk == tr.action_index ? 1.0 : 0.0;
          double g = dlogp * (onehot - probs[kk]);
          g += cfg.entropy_coef * probs[kk] * (std::log(probs[kk]) + entropy);
          dlogits[kk] = g / mb_size;
        }
        params.actor.backward(a_cache, dlogits, a_grad);

        const double v = params.critic.forward(x, &c_cache)[0];
        mb_vloss += cfg.value_coef * (v - ret) * (v - ret);
        params.critic.backward(
            c_cache, {2.0 * cfg.value_coef * (v - ret) / mb_size}, c_grad);
      }

      const double loss = (mb_ploss + mb_vloss) / mb_size;
      if (!std::isfinite(loss)) {
        params = saved;
        stats.aborted = true;
        return stats;
      }
      ++opt.step;
      adam_step(params.actor, a_grad, opt.actor_m, opt.actor_v, opt.step,
                cfg.learning_rate);
      adam_step(params.critic, c_grad, opt.critic_m, opt.critic_v, opt.step,
                cfg.learning_rate);

      stats.policy_loss += mb_ploss / mb_size;
      stats.value_loss += mb_vloss / mb_size;
      stats.entropy += mb_entropy / mb_size;
      stats.approx_kl += mb_kl / mb_size;
      stat_n += 1.0;
    }
  }
  stats.policy_loss /= stat_n;
  stats.value_loss /= stat_n;
  stats.entropy /= stat_n;
  stats.approx_kl /= stat_n;
  return stats;
}

std::size_t PolicyChooser::choose(const SolverObservation& obs) {
  auto [probs, value] = policy_forward(params_, obs);
  std::size_t idx;
  double logp;
  if (greedy_) {
    idx = static_cast<std::size_t>(
        std::max_element(probs.begin(), probs.end()) - probs.begin());
    logp = std::log(probs[idx]);
  } else {
    if (!rng_) throw std::invalid_argument("PolicyChooser: sampling mode needs an rng");
    std::tie(idx, logp) = sample_action(probs, *rng_);
  }
  steps_.push_back({obs, idx, logp, value});
  return params_.actions.sizes[idx];
}

std::pair<std::vector<Transition>, SolveTrace> env_episode(
    const LinearSystem& system, const PolicyParameters& params,
    const SolverConfig& cfg, Rng& rng, RewardKind reward) {
  PolicyChooser chooser(params, /*greedy=*/false, &rng);
  SolveResult res = fgmres_solve(system.a, system.b, chooser, cfg);

  const auto& steps = chooser.steps();
  const auto& recs = res.trace.records;
  std::vector<Transition> transitions;
  transitions.reserve(recs.size());
  double prev = 1.0;
  for (std::size_t t = 0; t < recs.size() && t < steps.size(); ++t) {
    Transition tr;
    tr.obs = steps[t].obs;
    tr.action_index = steps[t].action_index;
    tr.log_prob = steps[t].log_prob;
    tr.value = steps[t].value;
    const double rr = std::max(recs[t].rel_residual, 1e-300);
    tr.reward = reward == RewardKind::negative_residual
                    ? -rr
                    : std::log10(prev) - std::log10(rr);
    prev = rr;
    tr.done = t + 1 == recs.size();
    transitions.push_back(tr);
  }
  return {std::move(transitions), std::move(res.trace)};
}

TrainResult train(const std::function<LinearSystem(std::uint64_t)>& family,
                  const ActionSpace& actions, const PpoConfig& ppo_cfg,
                  const SolverConfig& solver_cfg, RewardKind reward,
                  std::ostream* progress) {
  ppo_cfg.validate();
  TrainResult result;
  result.params = init_policy(actions, ppo_cfg.seed);
  AdamState opt = AdamState::for_policy(result.params);
  Rng rng(ppo_cfg.seed ^ 0x5DEECE66DULL);

  for (std::size_t ep = 0; ep < ppo_cfg.episodes; ++ep) {
    const std::uint64_t problem_seed = rng.next_raw();
    const LinearSystem sys = family(problem_seed);
    auto [transitions, trace] = env_episode(sys, result.params, solver_cfg, rng, reward);

    EpisodeSummary summary;
    summary.episode = ep;
    summary.cycles = trace.cycles();
    summary.final_rel_residual =
        trace.records.empty() ? 1.0 : trace.records.back().rel_residual;
    for (const Transition& t : transitions) summary.total_reward += t.reward;
    result.log.push_back(summary);

    if (!transitions.empty()) {
      const UpdateStats stats = ppo_update(result.params, opt, transitions, ppo_cfg, rng);
      if (stats.aborted) {
        throw std::runtime_error("train: non-finite loss at episode " +
                                 std::to_string(ep));
      }
    }
    if (progress) {
      *progress << "episode " << ep << " reward " << summary.total_reward
                << " cycles " << summary.cycles << " relres "
                << summary.final_rel_residual << '\n';
    }
  }
  return result;
}

std::string training_log_csv(const std::vector<EpisodeSummary>& log) {
  std::ostringstream out;
  out.precision(17);
  out << "episode,total_reward,cycles,final_rel_residual\n";
  for (const auto& e : log) {
    out << e.episode << ',' << e.total_reward << ',' << e.cycles << ','
        << e.final_rel_residual << '\n';
  }
  return out.str();
}

namespace {

void write_net(std::ostream& out, const std::string& name, const Mlp& net) {
  const auto sizes = net.layer_sizes();
  out << name;
  for (std::size_t s : sizes) out << ' ' << s;
  out << '\n';
  for (const auto& layer : net.layers()) {
    for (std::size_t o = 0; o < layer.out; ++o) {
      for (std::size_t i = 0; i < layer.in; ++i) {
        if (i) out << ' ';
        out << layer.w[o * layer.in + i];
      }
      out << '\n';
    }
    for (std::size_t o = 0; o < layer.out; ++o) {
      if (o) out << ' ';
      out << layer.b[o];
    }
    out << '\n';
  }
}

Mlp read_net(std::istream& in, const std::string& expected_name) {
  std::string line;
  do {
    if (!std::getline(in, line)) {
      throw PolicyParseError("policy file: missing section " + expected_name);
    }
  } while (line.empty());
  std::istringstream ls(line);
  std::string name;
  ls >> name;
  if (name != expected_name) {
    throw PolicyParseError("policy file: expected section " + expected_name +
                           ", got " + name);
  }
  std::vector<std::size_t> sizes;
  std::size_t s;
  while (ls >> s) sizes.push_back(s);
  if (sizes.size() < 2) throw PolicyParseError("policy file: bad layer sizes");

  Mlp net(sizes, nullptr);
  for (auto& layer : net.layers()) {
    for (std::size_t o = 0; o < layer.out; ++o) {
      for (std::size_t i = 0; i < layer.in; ++i) {
        if (!(in >> layer.w[o * layer.in + i])) {
          throw PolicyParseError("policy file: truncated weights in " + expected_name);
        }
      }
    }
    for (std::size_t o = 0; o < layer.out; ++o) {
      if (!(in >> layer.b[o])) {
        throw PolicyParseError("policy file: truncated biases in " + expected_name);
      }
    }
  }
  in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
  return net;
}

}  // namespace

void save_policy(const PolicyParameters& params, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  out.precision(17);
  out << "krylovrl policy\n";
  out << "schema_version " << params.schema_version << '\n';
  out << "actions " << params.actions.count();
  for (std::size_t s : params.actions.sizes) out << ' ' << s;
  out << '\n';
  write_net(out, "actor", params.actor);
  write_net(out, "critic", params.critic);
  out << "end\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

PolicyParameters load_policy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);

  std::string line;
  if (!std::getline(in, line) || line != "krylovrl policy") {
    throw PolicyParseError("policy file: bad magic line");
  }
  PolicyParameters p;
  std::string key;
  if (!(in >> key >> p.schema_version) || key != "schema_version") {
    throw PolicyParseError("policy file: missing schema_version");
  }
  if (p.schema_version != 1) {
    throw PolicyVersionError("policy file: unsupported schema_version " +
                             std::to_string(p.schema_version));
  }
  std::size_t count;
  if (!(in >> key >> count) || key != "actions") {
    throw PolicyParseError("policy file: missing actions line");
  }
  p.actions.sizes.assign(count, 0);
  for (std::size_t i = 0; i < count; ++i) {
    if (!(in >> p.actions.sizes[i])) {
      throw PolicyParseError("policy file: truncated action list");
    }
  }
  p.actions.validate();
  in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');

  p.actor = read_net(in, "actor");
  p.critic = read_net(in, "critic");

  const auto a_sizes = p.actor.layer_sizes();
  const auto c_sizes = p.critic.layer_sizes();
  if (a_sizes.front() != SolverObservation::kDim || a_sizes.back() != count) {
    throw PolicyShapeError("policy file: actor shape does not match action set");
  }
  if (c_sizes.front() != SolverObservation::kDim || c_sizes.back() != 1) {
    throw PolicyShapeError("policy file: critic shape invalid");
  }
  return p;
}

}  // namespace krylovrl

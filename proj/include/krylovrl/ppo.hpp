#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "krylovrl/fgmres.hpp"
#include "krylovrl/mlp.hpp"
#include "krylovrl/problems.hpp"
#include "krylovrl/rng.hpp"

namespace krylovrl {

/// Discrete block-size menu; each size is clamped to <= n at use.
struct ActionSpace {
  std::vector<std::size_t> sizes{1, 2, 4, 8, 16, 32, 64, 128};

  void validate() const;  // non-empty, ascending, positive
  std::size_t count() const { return sizes.size(); }
  std::size_t max_size() const { return sizes.back(); }
};

/// Actor (block-size distribution) and critic (value) networks plus the
/// action set they were trained against.
struct PolicyParameters {
  int schema_version = 1;
  ActionSpace actions;
  Mlp actor;   // obs dim -> hidden -> |actions| logits
  Mlp critic;  // obs dim -> hidden -> 1
};

/// Seeded initialization; zero_init gives all-zero weights (uniform policy).
PolicyParameters init_policy(const ActionSpace& actions, std::uint64_t seed,
                             std::size_t hidden = 64, bool zero_init = false);

struct Transition {
  SolverObservation obs;
  std::size_t action_index = 0;
  double log_prob = 0.0;
  double reward = 0.0;
  double value = 0.0;
  bool done = false;
};

struct PpoConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_eps = 0.2;
  std::size_t epochs_per_update = 4;
  std::size_t minibatch = 64;
  double learning_rate = 3e-4;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  std::size_t episodes = 200;
  std::uint64_t seed = 0;

  void validate() const;
};

/// (action probabilities, value estimate) for one observation.
std::pair<DenseVector, double> policy_forward(const PolicyParameters& params,
                                              const SolverObservation& obs);

/// Inverse-CDF draw over the listed action order; returns (index, log prob).
std::pair<std::size_t, double> sample_action(const DenseVector& probs, Rng& rng);

/// Generalized advantage estimation:
///   delta_t = r_t + gamma V_{t+1} - V_t, A_t = delta_t + gamma lambda A_{t+1},
/// returns_t = A_t + V_t, with V_T = bootstrap.
std::pair<DenseVector, DenseVector> gae(const DenseVector& rewards,
                                        const DenseVector& values,
                                        double bootstrap, double gamma,
                                        double lambda);

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  bool aborted = false;  // non-finite loss encountered; params unchanged
};

/// Adam moment buffers for actor and critic.
struct AdamState {
  Mlp::Gradient actor_m, actor_v, critic_m, critic_v;
  std::size_t step = 0;

  static AdamState for_policy(const PolicyParameters& p);
};

/// One PPO update: epochs_per_update passes of shuffled minibatches with the
/// clipped surrogate, value MSE, and entropy bonus; advantages normalized
/// per update. Mutates params and opt in place.
UpdateStats ppo_update(PolicyParameters& params, AdamState& opt,
                       const std::vector<Transition>& batch,
                       const PpoConfig& cfg, Rng& rng);

enum class RewardKind { negative_residual, log_decrement };

/// Chooser backed by a policy network: samples during training, argmax when
/// greedy. Records per-cycle transitions for the trainer.
class PolicyChooser final : public BlockSizeChooser {
 public:
  PolicyChooser(const PolicyParameters& params, bool greedy, Rng* rng = nullptr)
      : params_(params), greedy_(greedy), rng_(rng) {
    params.actions.validate();
  }

  std::size_t choose(const SolverObservation& obs) override;
  std::size_t max_block() const override { return params_.actions.max_size(); }

  struct Step {
    SolverObservation obs;
    std::size_t action_index;
    double log_prob;
    double value;
  };
  const std::vector<Step>& steps() const { return steps_; }

 private:
  const PolicyParameters& params_;
  bool greedy_;
  Rng* rng_;
  std::vector<Step> steps_;
};

/// One episode: solve the system with a sampling PolicyChooser; one
/// Transition per restart cycle, reward from the chosen kind.
std::pair<std::vector<Transition>, SolveTrace> env_episode(
    const LinearSystem& system, const PolicyParameters& params,
    const SolverConfig& cfg, Rng& rng,
    RewardKind reward = RewardKind::negative_residual);

struct EpisodeSummary {
  std::size_t episode = 0;
  double total_reward = 0.0;
  std::size_t cycles = 0;
  double final_rel_residual = 0.0;
};

struct TrainResult {
  PolicyParameters params;
  std::vector<EpisodeSummary> log;
};

/// Draws one problem per episode from the seeded family, rolls an episode,
/// runs a PPO update on its transitions. Deterministic in ppo_cfg.seed.
TrainResult train(const std::function<LinearSystem(std::uint64_t)>& family,
                  const ActionSpace& actions, const PpoConfig& ppo_cfg,
                  const SolverConfig& solver_cfg,
                  RewardKind reward = RewardKind::negative_residual,
                  std::ostream* progress = nullptr);

/// CSV with header episode,total_reward,cycles,final_rel_residual
std::string training_log_csv(const std::vector<EpisodeSummary>& log);

/// Versioned UTF-8 text document; load(save(p)) preserves weights to 17
/// significant digits. Version, shape, and parse failures throw
/// PolicyVersionError, PolicyShapeError, PolicyParseError respectively.
void save_policy(const PolicyParameters& params, const std::string& path);
PolicyParameters load_policy(const std::string& path);

struct PolicyVersionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct PolicyShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct PolicyParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace krylovrl

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <variant>
#include <vector>

#include "dmfrl/fusion.hpp"
#include "dmfrl/numkit.hpp"
#include "dmfrl/replay.hpp"

namespace dmfrl {

/// Policy network: a plain MLP or a fusion policy.
class Actor {
 public:
  Actor() = default;
  explicit Actor(MLP net) : net_(std::move(net)) {}
  explicit Actor(FusionPolicy net) : net_(std::move(net)) {}

  bool is_fusion() const { return std::holds_alternative<FusionPolicy>(net_); }
  const MLP& mlp() const { return std::get<MLP>(net_); }
  MLP& mlp() { return std::get<MLP>(net_); }
  const FusionPolicy& fusion() const { return std::get<FusionPolicy>(net_); }
  FusionPolicy& fusion() { return std::get<FusionPolicy>(net_); }

  std::size_t input_dim() const;
  std::size_t output_dim() const;

  Matrix forward(const Matrix& input);
  Matrix predict(const Matrix& input) const;
  Matrix backward(const Matrix& output_grad);
  std::vector<ParamView> parameters();
  void zero_grad();
  std::vector<double> flat_parameters() const;

  friend void copy_params(const Actor& src, Actor& dst, double tau);

 private:
  std::variant<MLP, FusionPolicy> net_;
};

enum class OptimizerKind : std::uint8_t { sgd, adam };

OptimizerKind parse_optimizer(std::string_view name);

struct AgentConfig {
  double gamma = 0.98;
  double tau = 0.05;
  double lr_actor = 1e-3;
  double lr_critic = 5e-3;
  double noise_std = 0.2;
  // Probability of replacing the exploratory action by a uniform one.
  double random_eps = 0.3;
  std::size_t batch_size = 128;
  std::size_t obs_dim = 13;
  std::size_t goal_dim = 2;
  std::size_t action_dim = 2;
  std::vector<std::size_t> hidden{64, 64};
  OptimizerKind optimizer = OptimizerKind::adam;
  std::optional<double> max_grad_norm;
  // Penalty weight on mean squared actions in the actor objective.
  double action_l2 = 0.0;
  // Bootstrapped critic targets are clipped to this range when set.
  std::optional<std::pair<double, double>> target_clip;
  // Fixed linear map applied to [obs || goal] rows; empty means identity.
  Matrix input_transform;

  void validate() const;
  std::size_t actor_input_dim() const { return obs_dim + goal_dim; }
  std::size_t critic_input_dim() const { return obs_dim + goal_dim + action_dim; }
};

struct TrainStats {
  double critic_loss = 0.0;
  double actor_objective = 0.0;
};

/// Actor output for [obs || goal] (mapped by `config.input_transform`), with
/// optional Gaussian / uniform exploration, clamped to [-1, 1].
std::vector<double> policy_action(const Actor& actor, const AgentConfig& config,
                                  std::span<const double> obs, std::span<const double> goal,
                                  bool explore, std::mt19937_64& rng);

/// Deterministic actor-critic agent with lagged target networks.
class Agent {
 public:
  /// Fresh MLP actor (tanh head) and critic (identity head) from `seed`.
  Agent(AgentConfig config, std::uint64_t seed);
  Agent(AgentConfig config, Actor actor, MLP critic);

  const AgentConfig& config() const { return config_; }
  const Actor& actor() const { return actor_; }
  Actor& actor() { return actor_; }
  const MLP& critic() const { return critic_; }
  MLP& critic() { return critic_; }
  const Actor& target_actor() const { return target_actor_; }
  const MLP& target_critic() const { return target_critic_; }

  std::vector<double> select_action(std::span<const double> obs, std::span<const double> goal,
                                    bool explore, std::mt19937_64& rng) const;

  /// Critic regression onto bootstrapped targets, then one actor ascent step
  /// on mean Q(s, pi(s)). Returns the pre-update critic MSE and the mean Q
  /// seen by the actor step.
  TrainStats train_step(std::span<const Transition> batch);
  double update_critic(std::span<const Transition> batch);
  double update_actor(std::span<const Transition> batch);

  /// Critic targets r + gamma * (1 - done) * Q'(s', pi'(s')).
  std::vector<double> critic_targets(std::span<const Transition> batch) const;
  /// Mean Q(s, pi(s)) over the batch using the online networks.
  double mean_q(std::span<const Transition> batch) const;

  void soft_update();

  /// Re-syncs targets to the online networks and resets optimizer state.
  void reset_targets();

 private:
  Matrix policy_inputs(std::span<const Transition> batch, bool next) const;
  void check_batch(std::span<const Transition> batch) const;
  void step_actor_optimizer();
  void step_critic_optimizer();

  AgentConfig config_;
  Actor actor_;
  MLP critic_;
  Actor target_actor_;
  MLP target_critic_;
  std::optional<Adam> actor_adam_;
  std::optional<Adam> critic_adam_;
};

}  // namespace dmfrl

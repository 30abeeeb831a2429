#include "dmfrl/ddpg.hpp"

#include <algorithm>
#include <string>

#include "dmfrl/errors.hpp"

namespace dmfrl {

std::size_t Actor::input_dim() const {
  return std::visit([](const auto& n) { return n.input_dim(); }, net_);
}

std::size_t Actor::output_dim() const {
  return std::visit([](const auto& n) { return n.output_dim(); }, net_);
}

Matrix Actor::forward(const Matrix& input) {
  return std::visit([&](auto& n) { return n.forward(input); }, net_);
}

Matrix Actor::predict(const Matrix& input) const {
  return std::visit([&](const auto& n) { return n.predict(input); }, net_);
}

Matrix Actor::backward(const Matrix& output_grad) {
  return std::visit([&](auto& n) { return n.backward(output_grad); }, net_);
}

std::vector<ParamView> Actor::parameters() {
  return std::visit([](auto& n) { return n.parameters(); }, net_);
}

void Actor::zero_grad() {
  std::visit([](auto& n) { n.zero_grad(); }, net_);
}

std::vector<double> Actor::flat_parameters() const {
  return std::visit([](const auto& n) { return n.flat_parameters(); }, net_);
}

void copy_params(const Actor& src, Actor& dst, double tau) {
  if (src.net_.index() != dst.net_.index()) {
    throw DimensionError("copy_params: actor kinds differ");
  }
  if (src.is_fusion()) {
    copy_params(src.fusion(), dst.fusion(), tau);
  } else {
    copy_params(src.mlp(), dst.mlp(), tau);
  }
}

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adam") return OptimizerKind::adam;
  throw ConfigError("unknown optimizer '" + std::string(name) + "' (expected sgd or adam)");
}

void AgentConfig::validate() const {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("agent.gamma must lie in [0, 1]");
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("agent.tau must lie in (0, 1]");
  if (!(lr_actor > 0.0) || !(lr_critic > 0.0)) {
    throw ConfigError("agent learning rates must be positive");
  }
  if (!(noise_std >= 0.0)) throw ConfigError("agent.noise_std must be non-negative");
  if (!(random_eps >= 0.0 && random_eps <= 1.0)) {
    throw ConfigError("agent.random_eps must lie in [0, 1]");
  }
  if (batch_size == 0) throw ConfigError("agent.batch_size must be positive");
  if (obs_dim == 0 || action_dim == 0) throw ConfigError("agent dimensions must be positive");
  if (input_transform.size() > 0 && (input_transform.rows() != actor_input_dim() ||
                                     input_transform.cols() != actor_input_dim())) {
    throw ConfigError("agent input transform is " + std::to_string(input_transform.rows()) + "x" +
                      std::to_string(input_transform.cols()) + ", expected " +
                      std::to_string(actor_input_dim()) + "x" + std::to_string(actor_input_dim()));
  }
}

namespace {

Matrix transformed(const AgentConfig& config, Matrix inputs) {
  if (config.input_transform.size() == 0) return inputs;
  return matmul(inputs, config.input_transform);
}

std::vector<std::size_t> layer_dims(std::size_t in, const std::vector<std::size_t>& hidden,
                                    std::size_t out) {
  std::vector<std::size_t> dims{in};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(out);
  return dims;
}

}  // namespace

Agent::Agent(AgentConfig config, std::uint64_t seed)
    : Agent(config,
            Actor(MLP(layer_dims(config.actor_input_dim(), config.hidden, config.action_dim),
                      Activation::relu, Activation::tanh, seed)),
            MLP(layer_dims(config.critic_input_dim(), config.hidden, 1), Activation::relu,
                Activation::identity, seed ^ 0x9e3779b97f4a7c15ULL)) {}

Agent::Agent(AgentConfig config, Actor actor, MLP critic)
    : config_(std::move(config)), actor_(std::move(actor)), critic_(std::move(critic)) {
  config_.validate();
  if (actor_.input_dim() != config_.actor_input_dim() ||
      actor_.output_dim() != config_.action_dim) {
    throw DimensionError("actor maps " + std::to_string(actor_.input_dim()) + " -> " +
                         std::to_string(actor_.output_dim()) + ", agent expects " +
                         std::to_string(config_.actor_input_dim()) + " -> " +
                         std::to_string(config_.action_dim));
  }
  if (critic_.input_dim() != config_.critic_input_dim() || critic_.output_dim() != 1) {
    throw DimensionError("critic maps " + std::to_string(critic_.input_dim()) + " -> " +
                         std::to_string(critic_.output_dim()) + ", agent expects " +
                         std::to_string(config_.critic_input_dim()) + " -> 1");
  }
  reset_targets();
}

void Agent::reset_targets() {
  target_actor_ = actor_;
  target_critic_ = critic_;
  actor_adam_.reset();
  critic_adam_.reset();
  if (config_.optimizer == OptimizerKind::adam) {
    actor_adam_.emplace(config_.lr_actor);
    critic_adam_.emplace(config_.lr_critic);
  }
}

std::vector<double> policy_action(const Actor& actor, const AgentConfig& config,
                                  std::span<const double> obs, std::span<const double> goal,
                                  bool explore, std::mt19937_64& rng) {
  if (obs.size() != config.obs_dim || goal.size() != config.goal_dim) {
    throw ArgumentError("select_action: got obs " + std::to_string(obs.size()) + " / goal " +
                        std::to_string(goal.size()) + ", expected " +
                        std::to_string(config.obs_dim) + " / " + std::to_string(config.goal_dim));
  }
  Matrix input(1, config.actor_input_dim());
  auto row = input.row(0);
  std::copy(obs.begin(), obs.end(), row.begin());
  std::copy(goal.begin(), goal.end(), row.begin() + static_cast<std::ptrdiff_t>(obs.size()));
  const Matrix out = actor.predict(transformed(config, std::move(input)));
  std::vector<double> action(out.data().begin(), out.data().end());
  if (explore) {
    if (config.random_eps > 0.0 && std::bernoulli_distribution(config.random_eps)(rng)) {
      std::uniform_real_distribution<double> uniform(-1.0, 1.0);
      for (double& a : action) a = uniform(rng);
    } else if (config.noise_std > 0.0) {
      std::normal_distribution<double> noise(0.0, config.noise_std);
      for (double& a : action) a += noise(rng);
    }
  }
  for (double& a : action) a = std::clamp(a, -1.0, 1.0);
  return action;
}

std::vector<double> Agent::select_action(std::span<const double> obs, std::span<const double> goal,
                                         bool explore, std::mt19937_64& rng) const {
  return policy_action(actor_, config_, obs, goal, explore, rng);
}

void Agent::check_batch(std::span<const Transition> batch) const {
  if (batch.empty()) throw ArgumentError("train_step: empty batch");
  for (const auto& t : batch) {
    if (t.obs.size() != config_.obs_dim || t.next_obs.size() != config_.obs_dim ||
        t.desired_goal.size() != config_.goal_dim || t.action.size() != config_.action_dim) {
      throw DimensionError("train_step: transition dimensions do not match the agent");
    }
  }
}

Matrix Agent::policy_inputs(std::span<const Transition> batch, bool next) const {
  Matrix m(batch.size(), config_.actor_input_dim());
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const auto& obs = next ? batch[r].next_obs : batch[r].obs;
    auto row = m.row(r);
    std::copy(obs.begin(), obs.end(), row.begin());
    std::copy(batch[r].desired_goal.begin(), batch[r].desired_goal.end(),
              row.begin() + static_cast<std::ptrdiff_t>(obs.size()));
  }
  return transformed(config_, std::move(m));
}

std::vector<double> Agent::critic_targets(std::span<const Transition> batch) const {
  check_batch(batch);
  const Matrix next_inputs = policy_inputs(batch, true);
  const Matrix next_actions = target_actor_.predict(next_inputs);
  const Matrix* parts[] = {&next_inputs, &next_actions};
  const Matrix next_q = target_critic_.predict(hconcat(parts));
  std::vector<double> y(batch.size());
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const double bootstrap = batch[r].done ? 0.0 : config_.gamma * next_q(r, 0);
    y[r] = batch[r].reward + bootstrap;
    if (config_.target_clip) {
      y[r] = std::clamp(y[r], config_.target_clip->first, config_.target_clip->second);
    }
  }
  return y;
}

double Agent::mean_q(std::span<const Transition> batch) const {
  check_batch(batch);
  const Matrix inputs = policy_inputs(batch, false);
  const Matrix actions = actor_.predict(inputs);
  const Matrix* parts[] = {&inputs, &actions};
  const Matrix q = critic_.predict(hconcat(parts));
  double sum = 0.0;
  for (double v : q.data()) sum += v;
  return sum / static_cast<double>(batch.size());
}

void Agent::step_critic_optimizer() {
  auto params = critic_.parameters();
  if (critic_adam_) {
    critic_adam_->step(params, config_.max_grad_norm);
  } else {
    sgd_update(params, config_.lr_critic, config_.max_grad_norm);
  }
}

void Agent::step_actor_optimizer() {
  auto params = actor_.parameters();
  if (actor_adam_) {
    actor_adam_->step(params, config_.max_grad_norm);
  } else {
    sgd_update(params, config_.lr_actor, config_.max_grad_norm);
  }
}

double Agent::update_critic(std::span<const Transition> batch) {
  const std::vector<double> y = critic_targets(batch);
  const Matrix inputs = policy_inputs(batch, false);
  Matrix actions(batch.size(), config_.action_dim);
  for (std::size_t r = 0; r < batch.size(); ++r) {
    std::copy(batch[r].action.begin(), batch[r].action.end(), actions.row(r).begin());
  }
  const Matrix* parts[] = {&inputs, &actions};
  const Matrix q = critic_.forward(hconcat(parts));
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  Matrix grad(batch.size(), 1);
  double loss = 0.0;
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const double err = q(r, 0) - y[r];
    loss += err * err;
    grad(r, 0) = 2.0 * err * inv_b;
  }
  critic_.zero_grad();
  critic_.backward(grad);
  step_critic_optimizer();
  return loss * inv_b;
}

double Agent::update_actor(std::span<const Transition> batch) {
  check_batch(batch);
  const Matrix inputs = policy_inputs(batch, false);
  const Matrix actions = actor_.forward(inputs);
  const Matrix* parts[] = {&inputs, &actions};
  const Matrix q = critic_.forward(hconcat(parts));
  const std::size_t b = batch.size();
  const double inv_b = 1.0 / static_cast<double>(b);
  double mean = 0.0;
  for (double v : q.data()) mean += v;
  mean *= inv_b;

  // Minimize -mean Q (+ action penalty); the critic only routes gradients.
  Matrix q_grad(b, 1, -inv_b);
  const Matrix input_grad = critic_.backward(q_grad);
  critic_.zero_grad();
  Matrix action_grad = column_slice(input_grad, config_.actor_input_dim(), config_.action_dim);
  if (config_.action_l2 > 0.0) {
    const double scale = 2.0 * config_.action_l2 * inv_b / static_cast<double>(config_.action_dim);
    auto g = action_grad.data();
    auto a = actions.data();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += scale * a[i];
  }
  actor_.zero_grad();
  actor_.backward(action_grad);
  step_actor_optimizer();
  return mean;
}

TrainStats Agent::train_step(std::span<const Transition> batch) {
  check_batch(batch);
  if (batch.size() != config_.batch_size) {
    throw ArgumentError("train_step: batch of " + std::to_string(batch.size()) +
                        " transitions, configured batch size is " +
                        std::to_string(config_.batch_size));
  }
  TrainStats stats;
  stats.critic_loss = update_critic(batch);
  stats.actor_objective = update_actor(batch);
  return stats;
}

void Agent::soft_update() {
  copy_params(actor_, target_actor_, config_.tau);
  copy_params(critic_, target_critic_, config_.tau);
}

}  // namespace dmfrl

#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "dmfrl/rewards.hpp"

namespace dmfrl {

/// One goal-conditioned environment transition.
struct Transition {
  std::vector<double> obs;
  std::vector<double> action;
  double reward = 0.0;
  std::vector<double> next_obs;
  std::vector<double> achieved_goal;
  std::vector<double> next_achieved_goal;
  std::vector<double> desired_goal;
  bool done = false;
  // Goal-independent reward inputs recorded at collection time
  // (pushing: d_oe, d_es after the step).
  std::vector<double> info;
  // Set by sample_batch when the goal was substituted.
  bool relabeled = false;

  bool operator==(const Transition&) const = default;
};

using Episode = std::vector<Transition>;

/// Recomputes a transition's reward for a substituted goal.
using RewardFn = std::function<double(std::span<const double> next_achieved,
                                      std::span<const double> goal, const Transition& t)>;
/// Success test of an achieved goal against a goal.
using SuccessFn =
    std::function<bool(std::span<const double> achieved, std::span<const double> goal)>;

enum class HerStrategy : std::uint8_t { future };

HerStrategy parse_her_strategy(std::string_view name);

struct HERConfig {
  HerStrategy strategy = HerStrategy::future;
  int k = 4;
  RewardFn reward_fn;
  SuccessFn success_fn;
};

/// HER reward for the pushing world: the goal terms are recomputed from the
/// noiseless achieved/goal distance, d_oe and d_es come from `info`.
RewardFn pushing_reward_fn(RewardMode mode, RewardWeights weights);
SuccessFn goal_success_fn(double eta);

/// FIFO ring of fixed-length episodes with seeded sampling.
class EpisodeStore {
 public:
  EpisodeStore(std::size_t capacity, std::size_t episode_len, std::uint64_t seed);

  void store_episode(Episode episode);
  /// Samples `batch_size` transitions uniformly over (episode, step); each is
  /// relabeled with probability k / (k + 1).
  std::vector<Transition> sample_batch(std::size_t batch_size, const HERConfig& her);

  std::size_t size() const { return episodes_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t episode_len() const { return episode_len_; }
  const std::deque<Episode>& episodes() const { return episodes_; }

 private:
  std::size_t capacity_;
  std::size_t episode_len_;
  std::deque<Episode> episodes_;
  std::mt19937_64 rng_;
};

}  // namespace dmfrl

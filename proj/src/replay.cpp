#include "dmfrl/replay.hpp"

#include <cmath>
#include <string>

#include "dmfrl/errors.hpp"

namespace dmfrl {

namespace {

double euclid(std::span<const double> a, std::span<const double> b) {
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sq += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(sq);
}

}  // namespace

HerStrategy parse_her_strategy(std::string_view name) {
  if (name == "future") return HerStrategy::future;
  throw ConfigError("unknown HER strategy '" + std::string(name) +
                    "' (only 'future' is supported)");
}

RewardFn pushing_reward_fn(RewardMode mode, RewardWeights weights) {
  return [mode, weights = std::move(weights)](std::span<const double> achieved,
                                              std::span<const double> goal, const Transition& t) {
    Distances d;
    d.d_og = euclid(achieved, goal);
    if (t.info.size() >= 2) {
      d.d_oe = t.info[0];
      d.d_es = t.info[1];
    }
    return compute_reward(mode, d, weights);
  };
}

SuccessFn goal_success_fn(double eta) {
  return [eta](std::span<const double> achieved, std::span<const double> goal) {
    return is_success(euclid(achieved, goal), eta);
  };
}

EpisodeStore::EpisodeStore(std::size_t capacity, std::size_t episode_len, std::uint64_t seed)
    : capacity_(capacity), episode_len_(episode_len), rng_(seed) {
  if (capacity == 0) throw ArgumentError("episode store capacity must be positive");
  if (episode_len == 0) throw ArgumentError("episode length must be positive");
}

void EpisodeStore::store_episode(Episode episode) {
  if (episode.size() != episode_len_) {
    throw ArgumentError("episode has " + std::to_string(episode.size()) +
                        " transitions, store expects " + std::to_string(episode_len_));
  }
  if (episodes_.size() == capacity_) episodes_.pop_front();
  episodes_.push_back(std::move(episode));
}

std::vector<Transition> EpisodeStore::sample_batch(std::size_t batch_size, const HERConfig& her) {
  if (episodes_.empty()) throw StateError("sample_batch on an empty episode store");
  if (her.k < 0) throw ArgumentError("HER k must be non-negative");
  const bool can_relabel = her.k > 0;
  if (can_relabel && (!her.reward_fn || !her.success_fn)) {
    throw ArgumentError("HER relabeling needs reward_fn and success_fn");
  }
  std::uniform_int_distribution<std::size_t> pick_episode(0, episodes_.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_step(0, episode_len_ - 1);
  std::bernoulli_distribution relabel(static_cast<double>(her.k) / (her.k + 1.0));

  std::vector<Transition> batch;
  batch.reserve(batch_size);
  for (std::size_t b = 0; b < batch_size; ++b) {
    const Episode& ep = episodes_[pick_episode(rng_)];
    const std::size_t t = pick_step(rng_);
    Transition tr = ep[t];
    tr.relabeled = false;
    if (can_relabel && relabel(rng_)) {
      // "future": goal achieved at a uniformly chosen step t..T-1 (after the move).
      std::uniform_int_distribution<std::size_t> pick_future(t, episode_len_ - 1);
      tr.desired_goal = ep[pick_future(rng_)].next_achieved_goal;
      tr.reward = her.reward_fn(tr.next_achieved_goal, tr.desired_goal, tr);
      tr.done = her.success_fn(tr.next_achieved_goal, tr.desired_goal);
      tr.relabeled = true;
    }
    batch.push_back(std::move(tr));
  }
  return batch;
}

}  // namespace dmfrl

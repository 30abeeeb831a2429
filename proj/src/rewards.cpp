#include "dmfrl/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dmfrl/errors.hpp"

namespace dmfrl {

void RewardWeights::validate() const {
  if (alpha.size() < 2) throw ConfigError("reward weights need at least G_f and O_p weights");
  for (double a : alpha) {
    if (!(a >= 0.0)) throw ConfigError("reward weights must be non-negative");
  }
  if (!(eta > 0.0)) throw ConfigError("reward eta must be positive");
  if (!(mu > 0.0)) throw ConfigError("reward mu must be positive");
}

double sparse_reward(double d_og, double eta) { return is_success(d_og, eta) ? 0.0 : -1.0; }

double mgr_general(double final_goal, std::span<const double> sequential, double prevention,
                   const RewardWeights& w) {
  if (w.alpha.size() != sequential.size() + 2) {
    throw ArgumentError("mgr_general: " + std::to_string(w.alpha.size()) + " weights for " +
                        std::to_string(sequential.size()) + " sequential objectives (expected " +
                        std::to_string(sequential.size() + 2) + ")");
  }
  double r = w.alpha.front() * final_goal;
  for (std::size_t i = 0; i < sequential.size(); ++i) r += w.alpha[i + 1] * sequential[i];
  return r + w.alpha.back() * prevention;
}

double obstacle_term(double d_es, double mu) {
  if (!(d_es < mu)) return 0.0;
  return std::log(std::max(d_es, kMinObstacleDistance)) - std::log(mu);
}

double mgr_push(const Distances& d, const RewardWeights& w) {
  if (w.alpha.size() != 4) {
    throw ArgumentError("mgr_push expects 4 weights (goal, approach, push, obstacle), got " +
                        std::to_string(w.alpha.size()));
  }
  const double goal = d.d_og > w.eta ? -1.0 : 0.0;
  return w.alpha[0] * goal + w.alpha[1] * -d.d_oe + w.alpha[2] * -d.d_og +
         w.alpha[3] * obstacle_term(d.d_es, w.mu);
}

const char* to_string(RewardMode mode) { return mode == RewardMode::sparse ? "sparse" : "mgr"; }

RewardMode parse_reward_mode(std::string_view name) {
  if (name == "sparse") return RewardMode::sparse;
  if (name == "mgr") return RewardMode::mgr;
  throw ConfigError("unknown reward mode '" + std::string(name) + "' (expected sparse or mgr)");
}

double compute_reward(RewardMode mode, const Distances& d, const RewardWeights& w) {
  return mode == RewardMode::sparse ? sparse_reward(d.d_og, w.eta) : mgr_push(d, w);
}

}  // namespace dmfrl

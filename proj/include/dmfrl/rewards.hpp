#pragma once

#include <span>
#include <vector>

#include "dmfrl/pushworld.hpp"

namespace dmfrl {

/// Objective weights and thresholds of the guided reward. `alpha` holds the
/// final-goal weight first, then one weight per sequential objective, then
/// the prevention weight.
struct RewardWeights {
  std::vector<double> alpha{0.3, 0.35, 0.35, 1.0};
  double eta = 0.05;
  double mu = 0.10;

  void validate() const;
};

/// Floor applied to the end-effector/obstacle distance before the logarithm.
inline constexpr double kMinObstacleDistance = 1e-6;

/// 0 on success (d_og <= eta), -1 otherwise.
double sparse_reward(double d_og, double eta);

/// Weighted sum alpha_1 * G_f + sum_i alpha_i * O_i + alpha_{n+1} * O_p.
/// Requires alpha.size() == sequential.size() + 2.
double mgr_general(double final_goal, std::span<const double> sequential, double prevention,
                   const RewardWeights& w);

/// Guided reward for pushing:
///   a1 * -[d_og > eta] + a2 * -d_oe + a3 * -d_og + a4 * [d_es < mu] * (ln d_es - ln mu)
/// An infinite d_es (no obstacle) disables the last term.
double mgr_push(const Distances& d, const RewardWeights& w);

/// The prevention objective alone: [d_es < mu] * (ln max(d_es, floor) - ln mu).
double obstacle_term(double d_es, double mu);

enum class RewardMode : std::uint8_t { sparse, mgr };

const char* to_string(RewardMode mode);
RewardMode parse_reward_mode(std::string_view name);

double compute_reward(RewardMode mode, const Distances& d, const RewardWeights& w);

}  // namespace dmfrl

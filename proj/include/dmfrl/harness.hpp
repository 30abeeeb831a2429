#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "dmfrl/checkpoint.hpp"
#include "dmfrl/config.hpp"
#include "dmfrl/ddpg.hpp"

namespace dmfrl {

struct MetricsRow {
  std::uint64_t seed = 0;
  int episode = 0;
  double success_rate = 0.0;
  double avg_return = 0.0;
  double wall_time_s = 0.0;

  bool operator==(const MetricsRow&) const = default;
};

struct EvalResult {
  double success_rate = 0.0;
  double avg_return = 0.0;
};

struct RunResult {
  Agent agent;
  std::vector<MetricsRow> metrics;
  CheckpointMeta meta;

  Checkpoint actor_checkpoint() const { return Checkpoint::from_actor(agent.actor(), meta); }
  Checkpoint critic_checkpoint() const { return Checkpoint::from_critic(agent.critic(), meta); }
};

/// Stream-splitting seed derivation (splitmix64 of seed and a stream tag).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Sibling path holding the critic of an actor checkpoint.
std::filesystem::path critic_path_for(const std::filesystem::path& actor_path);

/// Builds the initial agent for `config.method`: fresh networks (tfs), a
/// warm start from one actor/critic pair (transfer) or a fusion actor over
/// the first layers of the primitive checkpoints with a fresh critic (dmf*).
Agent build_agent(const ExperimentConfig& config, std::uint64_t seed);

/// Greedy rollouts with noiseless distances. Success means the final
/// object-goal distance is within eta; the return is discounted by
/// `config.eval_gamma` under the configured reward mode.
EvalResult evaluate_policy(const Actor& actor, const ExperimentConfig& config, int n_episodes,
                           std::uint64_t seed);
/// Throws CheckpointKindError for critic checkpoints.
EvalResult evaluate(const Checkpoint& checkpoint, const ExperimentConfig& config, int n_episodes,
                    std::uint64_t seed);

/// Runs `config.episodes` training episodes with HER storage and agent
/// updates, evaluating every `eval_every` episodes.
RunResult train(const ExperimentConfig& config, std::uint64_t seed);

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows);
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_metrics_csv(std::istream& in);
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);

struct BenchmarkCell {
  Method method = Method::tfs;
  RewardMode reward = RewardMode::sparse;
  std::string env = "push-env1";

  std::string label() const;
  bool operator==(const BenchmarkCell&) const = default;
};

struct BenchmarkConfig {
  KeyValueConfig source;
  ExperimentConfig base;
  std::vector<BenchmarkCell> cells;
  std::vector<std::string> primitive_envs{"push-base1", "push-base2", "push-base3"};
  std::vector<std::filesystem::path> primitive_checkpoints;
  int primitive_episodes = 600;
  RewardMode primitive_reward = RewardMode::mgr;
  std::uint64_t primitive_seed = 1000;
  std::vector<int> checkpoints{50, 100, 150, 200};
  unsigned jobs = 1;

  /// Experiment for one cell; primitives are filled from `primitives`.
  ExperimentConfig cell_experiment(const BenchmarkCell& cell,
                                   const std::vector<std::filesystem::path>& primitives) const;
};

/// Reads `benchmark.*` and `primitives.*` keys, then the experiment keys.
BenchmarkConfig benchmark_from_config(const KeyValueConfig& kv);

struct SummaryRow {
  BenchmarkCell cell;
  int episode = 0;
  double mean_success_rate = 0.0;
  double mean_avg_return = 0.0;
  int seeds = 0;
  bool failed = false;
};

struct RunRecord {
  BenchmarkCell cell;
  std::uint64_t seed = 0;
  std::vector<MetricsRow> metrics;
  bool failed = false;
  std::string error;
};

/// Mean over seeds of each cell's metrics at each checkpoint episode.
std::vector<SummaryRow> summarize(const std::vector<BenchmarkCell>& cells,
                                  const std::vector<RunRecord>& runs,
                                  const std::vector<int>& checkpoints);

void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows);
std::string format_summary_table(const std::vector<SummaryRow>& rows,
                                 const std::vector<int>& checkpoints);

struct BenchmarkResult {
  std::vector<RunRecord> runs;
  std::vector<SummaryRow> summary;
  std::vector<std::filesystem::path> primitives;
  bool ok = true;
};

/// Trains primitives (unless given), runs every cell x seed, writes
/// `runs/*.csv`, `summary.csv` and `summary.txt` under `out_dir`.
BenchmarkResult benchmark(const BenchmarkConfig& config, const std::filesystem::path& out_dir,
                          std::ostream* log = nullptr);

}  // namespace dmfrl

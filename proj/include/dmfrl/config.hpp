#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "dmfrl/ddpg.hpp"
#include "dmfrl/fusion.hpp"
#include "dmfrl/pushworld.hpp"
#include "dmfrl/replay.hpp"
#include "dmfrl/rewards.hpp"

namespace dmfrl {

/// Flat `key=value` configuration with `#` comments. Typed getters record
/// which keys were read so that unknown (misspelled) keys can be reported.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text, std::string_view origin = "<string>");
  static KeyValueConfig from_file(const std::filesystem::path& path);

  void set(std::string key, std::string value);
  bool contains(std::string_view key) const;

  std::optional<std::string> get(std::string_view key) const;
  std::string get_string(std::string_view key, std::string_view fallback) const;
  double get_double(std::string_view key, double fallback) const;
  std::int64_t get_int(std::string_view key, std::int64_t fallback) const;
  bool get_bool(std::string_view key, bool fallback) const;
  std::vector<std::string> get_list(std::string_view key) const;

  /// Keys never read by any getter.
  std::vector<std::string> unused_keys() const;

 private:
  std::map<std::string, std::string, std::less<>> values_;
  mutable std::set<std::string, std::less<>> used_;
};

std::vector<std::string> split_list(std::string_view text);

enum class Method : std::uint8_t { tfs, transfer, dmf2, dmf3 };

const char* to_string(Method method);
Method parse_method(std::string_view name);
/// Number of primitive checkpoints a method consumes.
std::size_t required_primitives(Method method);

/// Built-in environment variants: {push,slide}-base{1,2,3} for primitive
/// training and {push,slide}-env{1,2,3} for adaptation. Throws ConfigError
/// for unknown names.
WorldConfig env_variant(std::string_view name);
std::vector<std::string> env_variant_names();

/// Applies `env.*` overrides on top of a variant.
WorldConfig apply_env_overrides(WorldConfig world, const KeyValueConfig& kv);

struct ExperimentConfig {
  std::string env_name = "push-env1";
  WorldConfig world = env_variant("push-env1");
  Method method = Method::tfs;
  RewardMode reward_mode = RewardMode::sparse;
  std::vector<std::filesystem::path> primitive_checkpoints;
  int episodes = 200;
  int eval_every = 50;
  int eval_episodes = 50;
  std::vector<std::uint64_t> seeds{1};
  std::filesystem::path output_path;
  // Optional actor checkpoint (e.g. from `fuse`) to start a tfs run from.
  std::filesystem::path init_actor;

  AgentConfig agent;
  InputFeatures input_features = InputFeatures::relative;
  RewardWeights reward;
  FusionOptions fusion;
  std::size_t replay_capacity = 1000;
  int her_k = 4;
  HerStrategy her_strategy = HerStrategy::future;
  int train_steps_per_episode = 40;
  double eval_gamma = 1.0;
  bool record_wall_time = false;

  /// Throws ConfigError on invalid values.
  void validate_values() const;
  /// validate_values() plus the primitive checkpoint arity of `method`.
  void validate() const;
  /// Agent config with dimensions and input scaling filled in.
  AgentConfig resolved_agent() const;
};

/// Reads every experiment key; `strict` rejects keys nobody consumed.
/// Checkpoint arity is not checked here (see ExperimentConfig::validate).
ExperimentConfig experiment_from_config(const KeyValueConfig& kv, bool strict = true);

}  // namespace dmfrl

// Command-line front end: train, fuse, evaluate, benchmark.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dmfrl/checkpoint.hpp"
#include "dmfrl/config.hpp"
#include "dmfrl/errors.hpp"
#include "dmfrl/harness.hpp"

namespace fs = std::filesystem;
using namespace dmfrl;

namespace {

constexpr const char* kVersion = "dmfrl 0.1.0";

std::uint64_t default_seed() {
  if (const char* env = std::getenv("DMFRL_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw ConfigError(std::string("DMFRL_SEED is not an unsigned integer: ") + env);
    }
  }
  return 1;
}

int run_train(const fs::path& config_path, std::uint64_t seed, const fs::path& out,
              const fs::path& metrics_out) {
  const auto kv = KeyValueConfig::from_file(config_path);
  const ExperimentConfig config = experiment_from_config(kv);
  const RunResult run = train(config, seed);
  save_checkpoint(out, run.actor_checkpoint());
  save_checkpoint(critic_path_for(out), run.critic_checkpoint());
  fs::path metrics = metrics_out;
  if (metrics.empty()) metrics = config.output_path;
  if (metrics.empty()) metrics = fs::path(out.string() + ".csv");
  write_metrics_csv(metrics, run.metrics);
  std::cout << "actor    " << out.string() << "\n"
            << "critic   " << critic_path_for(out).string() << "\n"
            << "metrics  " << metrics.string() << "\n";
  if (!run.metrics.empty()) {
    const auto& last = run.metrics.back();
    std::cout << "episode " << last.episode << ": success_rate " << last.success_rate
              << ", avg_return " << last.avg_return << "\n";
  }
  return 0;
}

int run_fuse(const std::vector<fs::path>& inputs, const fs::path& out, std::uint64_t seed,
             std::size_t head_hidden) {
  if (inputs.size() < 2) throw ConfigError("fuse needs at least 2 input checkpoints");
  std::vector<PrimitiveLayer> prims;
  for (const auto& path : inputs) {
    const auto bytes = read_file_bytes(path);
    PrimitiveLayer p = extract_first_layer(decode_checkpoint(bytes), content_hash(bytes));
    if (!prims.empty()) check_compatible(prims.front(), p);
    prims.push_back(std::move(p));
  }
  FusionOptions opts;
  opts.head_hidden = head_hidden;
  FusionPolicy policy(std::move(prims), opts, derive_seed(seed, 1));
  CheckpointMeta meta{"fused", 0, seed};
  save_checkpoint(out, Checkpoint::from_actor(Actor(policy), meta));
  std::cout << "fused " << policy.num_primitives() << " primitives (d=" << policy.feature_dim()
            << ") into " << out.string() << "\n";
  for (const auto& p : policy.primitives()) std::cout << "  source " << p.source_id << "\n";
  return 0;
}

int run_evaluate(const fs::path& ckpt, const std::string& env, int episodes, std::uint64_t seed,
                 const fs::path& config_path, const std::string& reward) {
  KeyValueConfig kv;
  if (!config_path.empty()) kv = KeyValueConfig::from_file(config_path);
  if (!env.empty()) kv.set("env", env);
  if (!reward.empty()) kv.set("reward", reward);
  const ExperimentConfig config = experiment_from_config(kv, false);
  const EvalResult r = evaluate(load_checkpoint(ckpt), config, episodes, seed);
  std::cout << "env " << config.env_name << ", " << episodes << " episodes, seed " << seed << "\n"
            << "success_rate " << r.success_rate << "\n"
            << "avg_return " << r.avg_return << "\n";
  return 0;
}

int run_benchmark(const fs::path& config_path, const fs::path& out_dir, unsigned jobs) {
  const auto kv = KeyValueConfig::from_file(config_path);
  BenchmarkConfig config = benchmark_from_config(kv);
  if (jobs > 0) config.jobs = jobs;
  const BenchmarkResult result = benchmark(config, out_dir, &std::cerr);
  std::cout << format_summary_table(result.summary, config.checkpoints);
  std::cout << "summary written to " << (out_dir / "summary.csv").string() << "\n";
  return result.ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep model fusion reinforcement learning on a planar pushing world"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  fs::path config_path;
  fs::path out;
  fs::path metrics_out;
  std::uint64_t seed = 0;
  bool seed_given = false;

  auto* train_cmd = app.add_subcommand("train", "Train an agent from a config file");
  train_cmd->add_option("--config", config_path, "key=value config file")->required();
  train_cmd->add_option("--seed", seed, "run seed (default: $DMFRL_SEED or 1)");
  train_cmd->add_option("--out", out, "actor checkpoint path (critic goes to <out>.critic)")
      ->required();
  train_cmd->add_option("--metrics", metrics_out, "metrics CSV path");

  std::vector<fs::path> inputs;
  std::size_t head_hidden = 64;
  auto* fuse_cmd = app.add_subcommand("fuse", "Build a fusion actor from primitive checkpoints");
  fuse_cmd->add_option("--inputs", inputs, "two or more mlp_actor checkpoints")->required();
  fuse_cmd->add_option("--out", out, "output checkpoint")->required();
  fuse_cmd->add_option("--seed", seed, "head initialization seed");
  fuse_cmd->add_option("--head-hidden", head_hidden, "fusion head hidden width");

  fs::path ckpt;
  std::string env;
  std::string reward;
  int episodes = 50;
  auto* eval_cmd = app.add_subcommand("evaluate", "Greedy evaluation of an actor checkpoint");
  eval_cmd->add_option("--ckpt", ckpt, "actor checkpoint")->required();
  eval_cmd->add_option("--env", env, "environment variant, e.g. push-env1");
  eval_cmd->add_option("--episodes", episodes, "evaluation episodes");
  eval_cmd->add_option("--seed", seed, "evaluation seed");
  eval_cmd->add_option("--config", config_path, "optional config file for env/reward settings");
  eval_cmd->add_option("--reward", reward, "reward mode used for returns (sparse or mgr)");

  fs::path out_dir;
  unsigned jobs = 0;
  auto* bench_cmd = app.add_subcommand("benchmark", "Run a method x reward x env x seed matrix");
  bench_cmd->add_option("--config", config_path, "key=value config file")->required();
  bench_cmd->add_option("--out-dir", out_dir, "output directory")->required();
  bench_cmd->add_option("--jobs", jobs, "parallel runs (default: hardware threads)");

  CLI11_PARSE(app, argc, argv);

  try {
    for (auto* cmd : {train_cmd, fuse_cmd, eval_cmd}) {
      if (cmd->parsed() && cmd->count("--seed") > 0) seed_given = true;
    }
    if (!seed_given) seed = default_seed();

    if (train_cmd->parsed()) return run_train(config_path, seed, out, metrics_out);
    if (fuse_cmd->parsed()) return run_fuse(inputs, out, seed, head_hidden);
    if (eval_cmd->parsed()) return run_evaluate(ckpt, env, episodes, seed, config_path, reward);
    if (bench_cmd->parsed()) return run_benchmark(config_path, out_dir, jobs);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

#include "dmfrl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "dmfrl/errors.hpp"

namespace dmfrl {

namespace {

enum Stream : std::uint64_t {
  kInitStream = 1,
  kResetStream = 2,
  kExploreStream = 3,
  kNoiseStream = 4,
  kReplayStream = 5,
  kEvalStream = 6,
};

std::vector<double> to_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return ec == std::errc() ? std::string(buf, ptr) : std::to_string(v);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::filesystem::path critic_path_for(const std::filesystem::path& actor_path) {
  auto p = actor_path;
  p += ".critic";
  return p;
}

Agent build_agent(const ExperimentConfig& config, std::uint64_t seed) {
  config.validate();
  const AgentConfig agent_cfg = config.resolved_agent();
  const std::uint64_t init_seed = derive_seed(seed, kInitStream);
  switch (config.method) {
    case Method::tfs: {
      Agent fresh(agent_cfg, init_seed);
      if (config.init_actor.empty()) return fresh;
      return Agent(agent_cfg, load_checkpoint(config.init_actor).actor(), fresh.critic());
    }
    case Method::transfer: {
      const auto& path = config.primitive_checkpoints.front();
      const Checkpoint actor = load_checkpoint(path);
      const auto critic_path = critic_path_for(path);
      if (!std::filesystem::exists(critic_path)) {
        throw ConfigError("transfer needs the critic checkpoint '" + critic_path.string() + "'");
      }
      const Checkpoint critic = load_checkpoint(critic_path);
      return Agent(agent_cfg, actor.actor(), critic.critic());
    }
    case Method::dmf2:
    case Method::dmf3: {
      std::vector<PrimitiveLayer> prims;
      for (const auto& path : config.primitive_checkpoints) {
        const auto bytes = read_file_bytes(path);
        PrimitiveLayer p = extract_first_layer(decode_checkpoint(bytes), content_hash(bytes));
        if (!prims.empty()) check_compatible(prims.front(), p);
        prims.push_back(std::move(p));
      }
      FusionOptions opts = config.fusion;
      opts.action_dim = agent_cfg.action_dim;
      FusionPolicy policy(std::move(prims), opts, init_seed);
      // Only the policy is fused; the critic starts fresh.
      Agent fresh(agent_cfg, init_seed);
      return Agent(agent_cfg, Actor(std::move(policy)), fresh.critic());
    }
  }
  throw ConfigError("unhandled method");
}

EvalResult evaluate_policy(const Actor& actor, const ExperimentConfig& config, int n_episodes,
                           std::uint64_t seed) {
  if (n_episodes < 1) throw ArgumentError("evaluation needs at least one episode");
  const AgentConfig agent_cfg = config.resolved_agent();
  if (actor.input_dim() != agent_cfg.actor_input_dim() ||
      actor.output_dim() != agent_cfg.action_dim) {
    throw DimensionError("actor maps " + std::to_string(actor.input_dim()) + " -> " +
                         std::to_string(actor.output_dim()) + ", environment needs " +
                         std::to_string(agent_cfg.actor_input_dim()) + " -> " +
                         std::to_string(agent_cfg.action_dim));
  }
  const PushWorld world(config.world);
  std::mt19937_64 unused_rng(seed);
  EvalResult result;
  for (int e = 0; e < n_episodes; ++e) {
    auto [state, obs] = world.reset(derive_seed(derive_seed(seed, kEvalStream), e));
    double ret = 0.0;
    double discount = 1.0;
    Distances last = world.distances(state);
    for (int t = 0; t < config.world.episode_len; ++t) {
      const auto action =
          policy_action(actor, agent_cfg, obs.vector, obs.desired_goal, false, unused_rng);
      const StepResult step = world.step(state, {action[0], action[1]});
      ret += discount * compute_reward(config.reward_mode, step.distances, config.reward);
      discount *= config.eval_gamma;
      state = step.state;
      obs = step.observation;
      last = step.distances;
    }
    if (is_success(last.d_og, config.world.eta)) result.success_rate += 1.0;
    result.avg_return += ret;
  }
  result.success_rate /= n_episodes;
  result.avg_return /= n_episodes;
  return result;
}

EvalResult evaluate(const Checkpoint& checkpoint, const ExperimentConfig& config, int n_episodes,
                    std::uint64_t seed) {
  return evaluate_policy(checkpoint.actor(), config, n_episodes, seed);
}

RunResult train(const ExperimentConfig& config, std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  RunResult run{build_agent(config, seed), {}, {config.env_name, 0, seed}};
  Agent& agent = run.agent;
  const PushWorld world(config.world);
  const std::size_t episode_len = static_cast<std::size_t>(config.world.episode_len);

  EpisodeStore store(config.replay_capacity, episode_len, derive_seed(seed, kReplayStream));
  HERConfig her;
  her.strategy = config.her_strategy;
  her.k = config.her_k;
  her.reward_fn = pushing_reward_fn(config.reward_mode, config.reward);
  her.success_fn = goal_success_fn(config.world.eta);

  std::mt19937_64 explore_rng(derive_seed(seed, kExploreStream));
  std::mt19937_64 noise_rng(derive_seed(seed, kNoiseStream));
  const std::uint64_t reset_base = derive_seed(seed, kResetStream);
  const std::uint64_t eval_seed = derive_seed(seed, kEvalStream);

  for (int episode = 1; episode <= config.episodes; ++episode) {
    auto [state, obs] = world.reset(derive_seed(reset_base, static_cast<std::uint64_t>(episode)));
    Episode transitions;
    transitions.reserve(episode_len);
    for (std::size_t t = 0; t < episode_len; ++t) {
      const auto action = agent.select_action(obs.vector, obs.desired_goal, true, explore_rng);
      const StepResult step = world.step(state, {action[0], action[1]});
      const Distances noisy = world.distances(step.state, true, noise_rng);
      Transition tr;
      tr.obs = to_vec(obs.vector);
      tr.action = action;
      tr.reward = compute_reward(config.reward_mode, noisy, config.reward);
      tr.next_obs = to_vec(step.observation.vector);
      tr.achieved_goal = to_vec(obs.achieved_goal);
      tr.next_achieved_goal = to_vec(step.observation.achieved_goal);
      tr.desired_goal = to_vec(obs.desired_goal);
      // Only success terminates bootstrapping; the time limit does not.
      tr.done = is_success(step.distances.d_og, config.world.eta);
      tr.info = {noisy.d_oe, noisy.d_es};
      transitions.push_back(std::move(tr));
      state = step.state;
      obs = step.observation;
    }
    store.store_episode(std::move(transitions));

    if (config.train_steps_per_episode > 0) {
      for (int k = 0; k < config.train_steps_per_episode; ++k) {
        const auto batch = store.sample_batch(agent.config().batch_size, her);
        agent.train_step(batch);
      }
      agent.soft_update();
    }

    if (episode % config.eval_every == 0) {
      const EvalResult eval =
          evaluate_policy(agent.actor(), config, config.eval_episodes, eval_seed);
      MetricsRow row;
      row.seed = seed;
      row.episode = episode;
      row.success_rate = eval.success_rate;
      row.avg_return = eval.avg_return;
      if (config.record_wall_time) {
        row.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      }
      run.metrics.push_back(row);
    }
  }
  run.meta.episodes = static_cast<std::uint64_t>(config.episodes);
  return run;
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
  out << "seed,episode,success_rate,avg_return,wall_time_s\n";
  for (const auto& r : rows) {
    out << r.seed << ',' << r.episode << ',' << format_double(r.success_rate) << ','
        << format_double(r.avg_return) << ',' << format_double(r.wall_time_s) << '\n';
  }
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write metrics file '" + path.string() + "'");
  write_metrics_csv(out, rows);
}

std::vector<MetricsRow> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "seed,episode,success_rate,avg_return,wall_time_s") {
    throw ConfigError("metrics CSV: missing or unexpected header");
  }
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_list(line);
    if (fields.size() != 5) throw ConfigError("metrics CSV: expected 5 fields in '" + line + "'");
    MetricsRow r;
    try {
      r.seed = std::stoull(fields[0]);
      r.episode = std::stoi(fields[1]);
      r.success_rate = std::stod(fields[2]);
      r.avg_return = std::stod(fields[3]);
      r.wall_time_s = std::stod(fields[4]);
    } catch (const std::exception&) {
      throw ConfigError("metrics CSV: malformed row '" + line + "'");
    }
    rows.push_back(r);
  }
  return rows;
}

std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read metrics file '" + path.string() + "'");
  return read_metrics_csv(in);
}

std::string BenchmarkCell::label() const {
  return std::string(to_string(method)) + "+" + to_string(reward) + "@" + env;
}

ExperimentConfig BenchmarkConfig::cell_experiment(
    const BenchmarkCell& cell, const std::vector<std::filesystem::path>& primitives) const {
  ExperimentConfig c = base;
  c.env_name = cell.env;
  c.world = apply_env_overrides(env_variant(cell.env), source);
  c.method = cell.method;
  c.reward_mode = cell.reward;
  const std::size_t need = required_primitives(cell.method);
  if (primitives.size() < need) {
    throw ConfigError("cell " + cell.label() + " needs " + std::to_string(need) +
                      " primitives, only " + std::to_string(primitives.size()) + " available");
  }
  c.primitive_checkpoints.assign(primitives.begin(),
                                 primitives.begin() + static_cast<std::ptrdiff_t>(need));
  c.validate();
  return c;
}

BenchmarkConfig benchmark_from_config(const KeyValueConfig& kv) {
  BenchmarkConfig b;
  b.source = kv;
  if (auto cells = kv.get("benchmark.cells")) {
    for (const auto& item : split_list(*cells)) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) {
        throw ConfigError("benchmark.cells entries are method:reward, got '" + item + "'");
      }
      b.cells.push_back(
          {parse_method(item.substr(0, colon)), parse_reward_mode(item.substr(colon + 1)), ""});
    }
  } else {
    const auto methods = kv.get_list("benchmark.methods");
    const auto rewards = kv.get_list("benchmark.rewards");
    for (const auto& m : methods.empty() ? std::vector<std::string>{"tfs"} : methods) {
      for (const auto& r : rewards.empty() ? std::vector<std::string>{"sparse"} : rewards) {
        b.cells.push_back({parse_method(m), parse_reward_mode(r), ""});
      }
    }
  }
  auto envs = kv.get_list("benchmark.envs");
  if (envs.empty()) envs.push_back(kv.get_string("env", "push-env1"));
  std::vector<BenchmarkCell> expanded;
  for (const auto& env : envs) {
    env_variant(env);
    for (auto cell : b.cells) {
      cell.env = env;
      expanded.push_back(cell);
    }
  }
  b.cells = std::move(expanded);

  if (auto prim_envs = kv.get_list("primitives.envs"); !prim_envs.empty()) {
    b.primitive_envs = prim_envs;
  }
  for (const auto& p : kv.get_list("primitives.checkpoints"))
    b.primitive_checkpoints.emplace_back(p);
  b.primitive_episodes = static_cast<int>(kv.get_int("primitives.episodes", b.primitive_episodes));
  b.primitive_reward =
      parse_reward_mode(kv.get_string("primitives.reward", to_string(b.primitive_reward)));
  b.primitive_seed = static_cast<std::uint64_t>(
      kv.get_int("primitives.seed", static_cast<std::int64_t>(b.primitive_seed)));
  if (auto cps = kv.get("benchmark.checkpoints")) {
    b.checkpoints.clear();
    for (const auto& s : split_list(*cps)) {
      try {
        b.checkpoints.push_back(std::stoi(s));
      } catch (const std::exception&) {
        throw ConfigError("benchmark.checkpoints: '" + s + "' is not an episode count");
      }
    }
  }
  const auto jobs = kv.get_int("benchmark.jobs", 0);
  b.jobs =
      jobs > 0 ? static_cast<unsigned>(jobs) : std::max(1u, std::thread::hardware_concurrency());
  b.base = experiment_from_config(kv, true);
  return b;
}

std::vector<SummaryRow> summarize(const std::vector<BenchmarkCell>& cells,
                                  const std::vector<RunRecord>& runs,
                                  const std::vector<int>& checkpoints) {
  std::vector<SummaryRow> out;
  for (const auto& cell : cells) {
    bool failed = false;
    for (const auto& run : runs) {
      if (run.cell == cell && run.failed) failed = true;
    }
    for (int episode : checkpoints) {
      SummaryRow row;
      row.cell = cell;
      row.episode = episode;
      row.failed = failed;
      for (const auto& run : runs) {
        if (!(run.cell == cell) || run.failed) continue;
        for (const auto& m : run.metrics) {
          if (m.episode != episode) continue;
          row.mean_success_rate += m.success_rate;
          row.mean_avg_return += m.avg_return;
          ++row.seeds;
        }
      }
      if (row.seeds > 0) {
        row.mean_success_rate /= row.seeds;
        row.mean_avg_return /= row.seeds;
      }
      out.push_back(row);
    }
  }
  return out;
}

void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write summary '" + path.string() + "'");
  out << "method,reward,env,episode,mean_success_rate,mean_avg_return,seeds,status\n";
  for (const auto& r : rows) {
    out << to_string(r.cell.method) << ',' << to_string(r.cell.reward) << ',' << r.cell.env << ','
        << r.episode << ',' << format_double(r.mean_success_rate) << ','
        << format_double(r.mean_avg_return) << ',' << r.seeds << ',' << (r.failed ? "FAILED" : "ok")
        << '\n';
  }
}

std::string format_summary_table(const std::vector<SummaryRow>& rows,
                                 const std::vector<int>& checkpoints) {
  std::ostringstream out;
  out << std::left << std::setw(28) << "cell";
  for (int c : checkpoints) out << std::right << std::setw(12) << c;
  out << std::right << std::setw(8) << "seeds" << '\n';
  std::vector<BenchmarkCell> seen;
  for (const auto& r : rows) {
    if (std::find(seen.begin(), seen.end(), r.cell) != seen.end()) continue;
    seen.push_back(r.cell);
    out << std::left << std::setw(28) << r.cell.label();
    int seeds = 0;
    for (int c : checkpoints) {
      const auto it = std::find_if(rows.begin(), rows.end(), [&](const SummaryRow& s) {
        return s.cell == r.cell && s.episode == c;
      });
      std::ostringstream cell;
      if (it == rows.end() || it->seeds == 0) {
        cell << "-";
      } else {
        cell << std::fixed << std::setprecision(3) << it->mean_success_rate;
        seeds = std::max(seeds, it->seeds);
      }
      out << std::right << std::setw(12) << cell.str();
    }
    out << std::right << std::setw(8) << (r.failed ? std::string("FAILED") : std::to_string(seeds))
        << '\n';
  }
  return out.str();
}

namespace {

// Runs jobs [0, count) on up to `workers` threads.
template <typename Fn>
void parallel_for(std::size_t count, unsigned workers, Fn&& fn) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(count)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> threads;
  for (unsigned w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  }
  for (auto& t : threads) t.join();
}

std::string run_file_name(const BenchmarkCell& cell, std::uint64_t seed) {
  return std::string(to_string(cell.method)) + "_" + to_string(cell.reward) + "_" + cell.env +
         "_seed" + std::to_string(seed) + ".csv";
}

}  // namespace

BenchmarkResult benchmark(const BenchmarkConfig& config, const std::filesystem::path& out_dir,
                          std::ostream* log) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "runs");
  BenchmarkResult result;
  std::mutex log_mutex;
  auto note = [&](const std::string& msg) {
    if (!log) return;
    std::lock_guard lock(log_mutex);
    *log << msg << std::endl;
  };

  std::size_t needed = 0;
  for (const auto& cell : config.cells) needed = std::max(needed, required_primitives(cell.method));

  if (!config.primitive_checkpoints.empty()) {
    result.primitives = config.primitive_checkpoints;
  } else if (needed > 0) {
    fs::create_directories(out_dir / "primitives");
    const std::size_t count = std::min(needed, config.primitive_envs.size());
    result.primitives.resize(count);
    std::vector<std::string> errors(count);
    parallel_for(count, config.jobs, [&](std::size_t i) {
      const auto& env = config.primitive_envs[i];
      try {
        ExperimentConfig pc = config.base;
        pc.env_name = env;
        pc.world = apply_env_overrides(env_variant(env), config.source);
        pc.method = Method::tfs;
        pc.reward_mode = config.primitive_reward;
        pc.primitive_checkpoints.clear();
        pc.episodes = config.primitive_episodes;
        pc.eval_every = std::max(1, config.primitive_episodes);
        const auto seed = config.primitive_seed + i;
        note("training primitive " + env + " (seed " + std::to_string(seed) + ")");
        const RunResult run = train(pc, seed);
        const fs::path path = out_dir / "primitives" / (env + ".ckpt");
        save_checkpoint(path, run.actor_checkpoint());
        save_checkpoint(critic_path_for(path), run.critic_checkpoint());
        write_metrics_csv(out_dir / "primitives" / (env + ".csv"), run.metrics);
        result.primitives[i] = path;
        if (!run.metrics.empty()) {
          note("primitive " + env + " success " + format_double(run.metrics.back().success_rate));
        }
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    });
    for (std::size_t i = 0; i < count; ++i) {
      if (!errors[i].empty()) {
        throw ConfigError("primitive training on " + config.primitive_envs[i] +
                          " failed: " + errors[i]);
      }
    }
  }

  for (const auto& cell : config.cells) {
    for (auto seed : config.base.seeds) result.runs.push_back({cell, seed, {}, false, ""});
  }
  parallel_for(result.runs.size(), config.jobs, [&](std::size_t i) {
    RunRecord& rec = result.runs[i];
    try {
      const ExperimentConfig ec = config.cell_experiment(rec.cell, result.primitives);
      const RunResult run = train(ec, rec.seed);
      rec.metrics = run.metrics;
      write_metrics_csv(out_dir / "runs" / run_file_name(rec.cell, rec.seed), rec.metrics);
      const double last = rec.metrics.empty() ? 0.0 : rec.metrics.back().success_rate;
      note("done " + rec.cell.label() + " seed " + std::to_string(rec.seed) + " final success " +
           format_double(last));
    } catch (const std::exception& e) {
      rec.failed = true;
      rec.error = e.what();
      note("FAILED " + rec.cell.label() + " seed " + std::to_string(rec.seed) + ": " + e.what());
    }
  });

  result.summary = summarize(config.cells, result.runs, config.checkpoints);
  for (const auto& r : result.runs) result.ok = result.ok && !r.failed;
  write_summary_csv(out_dir / "summary.csv", result.summary);
  std::ofstream(out_dir / "summary.txt")
      << format_summary_table(result.summary, config.checkpoints);
  return result;
}

}  // namespace dmfrl

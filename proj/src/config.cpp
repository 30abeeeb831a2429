#include "dmfrl/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "dmfrl/errors.hpp"

namespace dmfrl {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::size_t end = comma == std::string_view::npos ? text.size() : comma;
    const auto item = trim(text.substr(start, end - start));
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

KeyValueConfig KeyValueConfig::parse(std::string_view text, std::string_view origin) {
  KeyValueConfig kv;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos)
      view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(std::string(origin) + ":" + std::to_string(lineno) +
                        ": expected key=value, got '" + std::string(view) + "'");
    }
    const auto key = trim(view.substr(0, eq));
    if (key.empty()) {
      throw ConfigError(std::string(origin) + ":" + std::to_string(lineno) + ": empty key");
    }
    kv.set(std::string(key), std::string(trim(view.substr(eq + 1))));
  }
  return kv;
}

KeyValueConfig KeyValueConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

void KeyValueConfig::set(std::string key, std::string value) {
  values_[std::move(key)] = std::move(value);
}

bool KeyValueConfig::contains(std::string_view key) const { return values_.contains(key); }

std::optional<std::string> KeyValueConfig::get(std::string_view key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  used_.insert(it->first);
  return it->second;
}

std::string KeyValueConfig::get_string(std::string_view key, std::string_view fallback) const {
  return get(key).value_or(std::string(fallback));
}

double KeyValueConfig::get_double(std::string_view key, double fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const double d = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument("trailing characters");
    return d;
  } catch (const std::exception&) {
    throw ConfigError("key '" + std::string(key) + "': expected a number, got '" + *v + "'");
  }
}

std::int64_t KeyValueConfig::get_int(std::string_view key, std::int64_t fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  std::int64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || ptr != v->data() + v->size()) {
    throw ConfigError("key '" + std::string(key) + "': expected an integer, got '" + *v + "'");
  }
  return out;
}

bool KeyValueConfig::get_bool(std::string_view key, bool fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  throw ConfigError("key '" + std::string(key) + "': expected a boolean, got '" + *v + "'");
}

std::vector<std::string> KeyValueConfig::get_list(std::string_view key) const {
  const auto v = get(key);
  return v ? split_list(*v) : std::vector<std::string>{};
}

std::vector<std::string> KeyValueConfig::unused_keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) {
    if (!used_.contains(k)) out.push_back(k);
  }
  return out;
}

const char* to_string(Method method) {
  switch (method) {
    case Method::tfs:
      return "tfs";
    case Method::transfer:
      return "transfer";
    case Method::dmf2:
      return "dmf2";
    case Method::dmf3:
      return "dmf3";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  if (name == "tfs") return Method::tfs;
  if (name == "transfer") return Method::transfer;
  if (name == "dmf2") return Method::dmf2;
  if (name == "dmf3") return Method::dmf3;
  throw ConfigError("unknown method '" + std::string(name) +
                    "' (expected tfs, transfer, dmf2 or dmf3)");
}

std::size_t required_primitives(Method method) {
  switch (method) {
    case Method::tfs:
      return 0;
    case Method::transfer:
      return 1;
    case Method::dmf2:
      return 2;
    case Method::dmf3:
      return 3;
  }
  return 0;
}

WorldConfig env_variant(std::string_view name) {
  const auto dash = name.find('-');
  if (dash == std::string_view::npos) {
    throw ConfigError("unknown env variant '" + std::string(name) + "'");
  }
  WorldConfig w;
  const auto task = name.substr(0, dash);
  const auto variant = name.substr(dash + 1);
  if (task == "push") {
    w.task = Task::push;
  } else if (task == "slide") {
    w.task = Task::slide;
  } else {
    throw ConfigError("unknown env variant '" + std::string(name) + "'");
  }
  if (variant == "base1") {
    w.friction = 0.9;
  } else if (variant == "base2") {
    w.friction = 0.7;
  } else if (variant == "base3") {
    w.friction = 0.9;
    w.object_shape = ObjectShape::cylinder;
  } else if (variant == "env1") {
    w.friction = 0.5;
  } else if (variant == "env2") {
    w.friction = 0.9;
    w.object_shape = ObjectShape::flat_box;
  } else if (variant == "env3") {
    w.friction = 0.9;
    w.obstacle = Vec2{0.0, 0.0};
  } else {
    throw ConfigError("unknown env variant '" + std::string(name) + "'");
  }
  return w;
}

std::vector<std::string> env_variant_names() {
  std::vector<std::string> out;
  for (const char* task : {"push", "slide"}) {
    for (const char* v : {"base1", "base2", "base3", "env1", "env2", "env3"}) {
      out.push_back(std::string(task) + "-" + v);
    }
  }
  return out;
}

WorldConfig apply_env_overrides(WorldConfig w, const KeyValueConfig& kv) {
  w.friction = kv.get_double("env.friction", w.friction);
  if (auto shape = kv.get("env.shape")) w.object_shape = parse_shape(*shape);
  if (auto obstacle = kv.get("env.obstacle")) {
    if (*obstacle == "none") {
      w.obstacle.reset();
    } else {
      const auto parts = split_list(*obstacle);
      if (parts.size() != 2) throw ConfigError("env.obstacle must be 'x,y' or 'none'");
      try {
        w.obstacle = Vec2{std::stod(parts[0]), std::stod(parts[1])};
      } catch (const std::exception&) {
        throw ConfigError("env.obstacle must be 'x,y' or 'none', got '" + *obstacle + "'");
      }
    }
  }
  w.eta = kv.get_double("env.eta", w.eta);
  w.mu = kv.get_double("env.mu", w.mu);
  w.episode_len = static_cast<int>(kv.get_int("env.episode_len", w.episode_len));
  w.noise_std = kv.get_double("env.noise_std", w.noise_std);
  w.max_step = kv.get_double("env.max_step", w.max_step);
  w.spawn_range = kv.get_double("env.spawn_range", w.spawn_range);
  w.validate();
  return w;
}

void ExperimentConfig::validate() const {
  validate_values();
  const std::size_t need = required_primitives(method);
  if (primitive_checkpoints.size() != need) {
    throw ConfigError(std::string("method ") + to_string(method) + " needs exactly " +
                      std::to_string(need) + " primitive checkpoint(s), got " +
                      std::to_string(primitive_checkpoints.size()));
  }
}

void ExperimentConfig::validate_values() const {
  world.validate();
  resolved_agent().validate();
  reward.validate();
  if (!init_actor.empty() && method != Method::tfs) {
    throw ConfigError("init_actor can only be combined with method tfs");
  }
  if (episodes < 0) throw ConfigError("episodes must be non-negative");
  if (eval_every < 1) throw ConfigError("eval_every must be at least 1");
  if (eval_episodes < 1) throw ConfigError("eval_episodes must be at least 1");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (replay_capacity == 0) throw ConfigError("replay.capacity must be positive");
  if (her_k < 0) throw ConfigError("her.k must be non-negative");
  if (train_steps_per_episode < 0) throw ConfigError("train.steps_per_episode must be >= 0");
  if (!(eval_gamma >= 0.0 && eval_gamma <= 1.0)) throw ConfigError("eval.gamma must lie in [0, 1]");
}

AgentConfig ExperimentConfig::resolved_agent() const {
  AgentConfig a = agent;
  a.obs_dim = kObservationDim;
  a.goal_dim = kGoalDim;
  a.action_dim = kActionDim;
  a.input_transform = input_transform(world, input_features);
  return a;
}

namespace {

std::size_t get_count(const KeyValueConfig& kv, std::string_view key, std::size_t fallback) {
  const std::int64_t v = kv.get_int(key, static_cast<std::int64_t>(fallback));
  if (v < 0) throw ConfigError("key '" + std::string(key) + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

}  // namespace

ExperimentConfig experiment_from_config(const KeyValueConfig& kv, bool strict) {
  ExperimentConfig c;
  c.env_name = kv.get_string("env", c.env_name);
  c.world = apply_env_overrides(env_variant(c.env_name), kv);
  if (auto task = kv.get("task"); task && parse_task(*task) != c.world.task) {
    throw ConfigError("task '" + *task + "' does not match env '" + c.env_name + "'");
  }
  c.method = parse_method(kv.get_string("method", to_string(c.method)));
  c.reward_mode = parse_reward_mode(kv.get_string("reward", to_string(c.reward_mode)));
  for (const auto& p : kv.get_list("primitives")) c.primitive_checkpoints.emplace_back(p);
  c.episodes = static_cast<int>(kv.get_int("episodes", c.episodes));
  c.eval_every = static_cast<int>(kv.get_int("eval_every", c.eval_every));
  c.eval_episodes = static_cast<int>(kv.get_int("eval_episodes", c.eval_episodes));
  if (auto seeds = kv.get("seeds")) {
    c.seeds.clear();
    for (const auto& s : split_list(*seeds)) {
      try {
        c.seeds.push_back(std::stoull(s));
      } catch (const std::exception&) {
        throw ConfigError("seeds: '" + s + "' is not an unsigned integer");
      }
    }
  }
  c.output_path = kv.get_string("output", "");
  c.init_actor = kv.get_string("init_actor", "");

  auto& a = c.agent;
  a.gamma = kv.get_double("agent.gamma", a.gamma);
  a.tau = kv.get_double("agent.tau", a.tau);
  a.lr_actor = kv.get_double("agent.lr_actor", a.lr_actor);
  a.lr_critic = kv.get_double("agent.lr_critic", a.lr_critic);
  a.noise_std = kv.get_double("agent.noise_std", a.noise_std);
  a.random_eps = kv.get_double("agent.random_eps", a.random_eps);
  a.batch_size = get_count(kv, "agent.batch_size", a.batch_size);
  if (auto hidden = kv.get("agent.hidden")) {
    a.hidden.clear();
    for (const auto& h : split_list(*hidden)) {
      try {
        a.hidden.push_back(std::stoul(h));
      } catch (const std::exception&) {
        throw ConfigError("agent.hidden: '" + h + "' is not a layer width");
      }
    }
  }
  if (auto v = kv.get("agent.optimizer")) a.optimizer = parse_optimizer(*v);
  if (kv.contains("agent.max_grad_norm"))
    a.max_grad_norm = kv.get_double("agent.max_grad_norm", 1.0);
  a.action_l2 = kv.get_double("agent.action_l2", a.action_l2);
  if (kv.get_bool("agent.clip_target", a.target_clip.has_value())) {
    a.target_clip = std::pair{kv.get_double("agent.clip_target_min", -1.0 / (1.0 - a.gamma)), 0.0};
  } else {
    a.target_clip.reset();
  }
  if (auto v = kv.get("agent.inputs")) c.input_features = parse_input_features(*v);

  auto& r = c.reward;
  r.alpha = {kv.get_double("mgr.alpha1", r.alpha[0]), kv.get_double("mgr.alpha2", r.alpha[1]),
             kv.get_double("mgr.alpha3", r.alpha[2]), kv.get_double("mgr.alpha4", r.alpha[3])};
  r.eta = kv.get_double("mgr.eta", c.world.eta);
  r.mu = kv.get_double("mgr.mu", c.world.mu);

  c.fusion.freeze_primitives = kv.get_bool("fusion.freeze_primitives", c.fusion.freeze_primitives);
  c.fusion.post_activation = kv.get_bool("fusion.post_activation", c.fusion.post_activation);
  c.fusion.head_hidden = get_count(kv, "fusion.head_hidden", c.fusion.head_hidden);
  c.fusion.action_dim = kActionDim;

  c.replay_capacity = get_count(kv, "replay.capacity", c.replay_capacity);
  c.her_k = static_cast<int>(kv.get_int("her.k", c.her_k));
  c.her_strategy = parse_her_strategy(kv.get_string("her.strategy", "future"));
  c.train_steps_per_episode =
      static_cast<int>(kv.get_int("train.steps_per_episode", c.train_steps_per_episode));
  c.eval_gamma = kv.get_double("eval.gamma", c.eval_gamma);
  c.record_wall_time = kv.get_bool("metrics.record_wall_time", c.record_wall_time);

  if (strict) {
    const auto unused = kv.unused_keys();
    if (!unused.empty()) {
      std::string msg = "unknown config key(s):";
      for (const auto& k : unused) msg += " " + k;
      throw ConfigError(msg);
    }
  }
  c.validate_values();
  return c;
}

}  // namespace dmfrl

#include "dmfrl/pushworld.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dmfrl/errors.hpp"

namespace dmfrl {

namespace {

Vec2 operator+(const Vec2& a, const Vec2& b) { return {a[0] + b[0], a[1] + b[1]}; }
Vec2 operator-(const Vec2& a, const Vec2& b) { return {a[0] - b[0], a[1] - b[1]}; }
Vec2 operator*(const Vec2& a, double s) { return {a[0] * s, a[1] * s}; }
double dot(const Vec2& a, const Vec2& b) { return a[0] * b[0] + a[1] * b[1]; }
double norm(const Vec2& a) { return std::hypot(a[0], a[1]); }

Vec2 clamp_to(const Vec2& p, const Bounds& b) {
  return {std::clamp(p[0], b.lo[0], b.hi[0]), std::clamp(p[1], b.lo[1], b.hi[1])};
}

bool inside(const Vec2& p, const Bounds& b) {
  return p[0] >= b.lo[0] && p[0] <= b.hi[0] && p[1] >= b.lo[1] && p[1] <= b.hi[1];
}

// Moves `p` out of the disc (centre, radius) along the centre->p direction.
// `fallback` is used when p sits exactly on the centre.
Vec2 push_out_of_disc(const Vec2& p, const Vec2& centre, double radius, const Vec2& fallback) {
  const Vec2 delta = p - centre;
  const double d = norm(delta);
  if (d >= radius) return p;
  const Vec2 n = d > 1e-12 ? delta * (1.0 / d) : fallback;
  return centre + n * radius;
}

double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a + std::numbers::pi, two_pi);
  if (a < 0.0) a += two_pi;
  return a - std::numbers::pi;
}

}  // namespace

const char* to_string(Task task) {
  switch (task) {
    case Task::push:
      return "push";
    case Task::slide:
      return "slide";
  }
  return "unknown";
}

const char* to_string(ObjectShape shape) {
  switch (shape) {
    case ObjectShape::box:
      return "box";
    case ObjectShape::cylinder:
      return "cylinder";
    case ObjectShape::flat_box:
      return "flat_box";
  }
  return "unknown";
}

Task parse_task(std::string_view name) {
  if (name == "push") return Task::push;
  if (name == "slide") return Task::slide;
  throw ConfigError("unknown task '" + std::string(name) + "' (expected push or slide)");
}

ObjectShape parse_shape(std::string_view name) {
  if (name == "box") return ObjectShape::box;
  if (name == "cylinder") return ObjectShape::cylinder;
  if (name == "flat_box") return ObjectShape::flat_box;
  throw ConfigError("unknown object shape '" + std::string(name) +
                    "' (expected box, cylinder or flat_box)");
}

ShapeParams shape_params(ObjectShape shape) {
  switch (shape) {
    case ObjectShape::box:
      return {0.025, 1.0};
    case ObjectShape::cylinder:
      return {0.02, 1.1};
    case ObjectShape::flat_box:
      return {0.04, 0.75};
  }
  return {0.025, 1.0};
}

void WorldConfig::validate() const {
  if (!(friction > 0.0 && friction <= 1.0)) throw ConfigError("friction must lie in (0, 1]");
  if (!(eta > 0.0)) throw ConfigError("eta must be positive");
  if (!(mu > 0.0)) throw ConfigError("mu must be positive");
  if (episode_len < 1) throw ConfigError("episode_len must be at least 1");
  if (!(noise_std >= 0.0)) throw ConfigError("noise_std must be non-negative");
  if (!(max_step > 0.0)) throw ConfigError("max_step must be positive");
  if (!(workspace.lo[0] < workspace.hi[0] && workspace.lo[1] < workspace.hi[1])) {
    throw ConfigError("workspace bounds are empty");
  }
  if (!(spawn_range > 0.0)) throw ConfigError("spawn_range must be positive");
  if (obstacle && !inside(*obstacle, workspace)) {
    throw ConfigError("obstacle lies outside the workspace");
  }
}

double WorldConfig::contact_radius() const {
  return shape_params(object_shape).radius + contact_margin;
}

double distance(const Vec2& a, const Vec2& b) { return norm(a - b); }

bool is_success(double d_og, double eta) { return d_og <= eta; }

PushWorld::PushWorld(WorldConfig config) : config_(std::move(config)) { config_.validate(); }

std::pair<WorldState, Observation> PushWorld::reset(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  const auto& ws = config_.workspace;
  const Vec2 centre{(ws.lo[0] + ws.hi[0]) / 2.0, (ws.lo[1] + ws.hi[1]) / 2.0};
  Bounds spawn;
  for (int i = 0; i < 2; ++i) {
    spawn.lo[i] = std::max(ws.lo[i], centre[i] - config_.spawn_range);
    spawn.hi[i] = std::min(ws.hi[i], centre[i] + config_.spawn_range);
  }
  std::uniform_real_distribution<double> ux(spawn.lo[0], spawn.hi[0]);
  std::uniform_real_distribution<double> uy(spawn.lo[1], spawn.hi[1]);
  auto sample = [&] { return Vec2{ux(rng), uy(rng)}; };

  const double separation = 2.0 * config_.eta;
  const double obj_radius = shape_params(config_.object_shape).radius;
  auto clear_of_obstacle = [&](const Vec2& p, double margin) {
    return !config_.obstacle || distance(p, *config_.obstacle) >= config_.obstacle_radius + margin;
  };

  constexpr int kMaxAttempts = 10000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    WorldState s;
    s.ee_pos = sample();
    s.obj_pos = sample();
    s.goal_pos = sample();
    if (distance(s.ee_pos, s.obj_pos) < separation || distance(s.ee_pos, s.goal_pos) < separation ||
        distance(s.obj_pos, s.goal_pos) < separation) {
      continue;
    }
    if (!clear_of_obstacle(s.ee_pos, 0.0) || !clear_of_obstacle(s.obj_pos, obj_radius) ||
        !clear_of_obstacle(s.goal_pos, obj_radius)) {
      continue;
    }
    return {s, observe(s)};
  }
  throw ConfigError("workspace too small to place end-effector, object and goal " +
                    std::to_string(separation) + " m apart");
}

StepResult PushWorld::step(const WorldState& state, const Vec2& action) const {
  if (state.step_index >= config_.episode_len) {
    throw StateError("step called on an episode that already ran " +
                     std::to_string(config_.episode_len) + " steps");
  }
  const auto& ws = config_.workspace;
  const ShapeParams shape = shape_params(config_.object_shape);
  const double response = std::min(1.0, config_.friction * shape.friction_multiplier);
  const double contact_r = config_.contact_radius();

  const Vec2 a{std::clamp(action[0], -1.0, 1.0), std::clamp(action[1], -1.0, 1.0)};
  WorldState next = state;
  ++next.step_index;

  Vec2 ee = clamp_to(state.ee_pos + a * config_.max_step, ws);
  if (config_.obstacle) {
    ee = clamp_to(push_out_of_disc(ee, *config_.obstacle, config_.obstacle_radius, {1.0, 0.0}), ws);
  }
  const Vec2 ee_move = ee - state.ee_pos;

  Vec2 obj = state.obj_pos;
  Vec2 obj_vel = config_.task == Task::slide ? state.obj_vel : Vec2{0.0, 0.0};
  const Vec2 to_obj = obj - ee;
  const double gap = norm(to_obj);
  Vec2 normal{1.0, 0.0};
  bool contact = false;
  if (gap < contact_r) {
    contact = true;
    if (gap > 1e-12) {
      normal = to_obj * (1.0 / gap);
    } else if (norm(ee_move) > 1e-12) {
      normal = ee_move * (1.0 / norm(ee_move));
    }
    const Vec2 tangent{-normal[1], normal[0]};
    next.obj_theta = wrap_angle(state.obj_theta + dot(ee_move, tangent) * response / contact_r);
    if (config_.task == Task::push) {
      obj = obj + normal * ((contact_r - gap) * response);
    } else if (dot(ee_move, normal) > 0.0) {
      obj_vel = ee_move * response;
    }
  }

  if (config_.task == Task::slide) {
    obj = obj + obj_vel;
    obj_vel = obj_vel * (1.0 - 0.2 * response);
  }

  // Walls and obstacle stop the object.
  const Vec2 clamped = clamp_to(obj, ws);
  for (int i = 0; i < 2; ++i) {
    if (clamped[i] != obj[i]) obj_vel[i] = 0.0;
  }
  obj = clamped;
  if (config_.obstacle) {
    const Vec2 blocked =
        push_out_of_disc(obj, *config_.obstacle, config_.obstacle_radius + shape.radius, normal);
    if (blocked != obj) obj_vel = {0.0, 0.0};
    obj = clamp_to(blocked, ws);
  }

  // The end-effector cannot penetrate the object's contact disc.
  if (contact || distance(ee, obj) < contact_r) {
    ee = clamp_to(push_out_of_disc(ee, obj, contact_r, normal * -1.0), ws);
  }

  next.ee_vel = ee - state.ee_pos;
  next.ee_pos = ee;
  next.obj_vel = config_.task == Task::push ? obj - state.obj_pos : obj_vel;
  next.obj_pos = obj;

  StepResult result;
  result.state = next;
  result.observation = observe(next);
  result.distances = distances(next);
  result.done =
      next.step_index == config_.episode_len || is_success(result.distances.d_og, config_.eta);
  return result;
}

Observation PushWorld::observe(const WorldState& s) const {
  Observation o;
  const Vec2 obstacle = config_.obstacle.value_or(Vec2{0.0, 0.0});
  o.vector = {s.ee_pos[0],   s.ee_pos[1], s.ee_vel[0],  s.ee_vel[1],  s.obj_pos[0],
              s.obj_pos[1],  s.obj_theta, s.obj_vel[0], s.obj_vel[1], s.goal_pos[0],
              s.goal_pos[1], obstacle[0], obstacle[1]};
  o.achieved_goal = s.obj_pos;
  o.desired_goal = s.goal_pos;
  return o;
}

Distances PushWorld::distances(const WorldState& s) const {
  Distances d;
  d.d_og = distance(s.obj_pos, s.goal_pos);
  d.d_oe = distance(s.obj_pos, s.ee_pos);
  d.d_es = config_.obstacle ? distance(s.ee_pos, *config_.obstacle) : kNoObstacle;
  return d;
}

Distances PushWorld::distances(const WorldState& s, bool noisy, std::mt19937_64& rng) const {
  Distances d = distances(s);
  if (!noisy || config_.noise_std == 0.0) return d;
  std::normal_distribution<double> noise(0.0, config_.noise_std);
  auto perturb = [&](double v) { return std::isfinite(v) ? std::max(0.0, v + noise(rng)) : v; };
  d.d_og = perturb(d.d_og);
  d.d_oe = perturb(d.d_oe);
  d.d_es = perturb(d.d_es);
  return d;
}

const char* to_string(InputFeatures features) {
  switch (features) {
    case InputFeatures::raw:
      return "raw";
    case InputFeatures::scaled:
      return "scaled";
    case InputFeatures::relative:
      return "relative";
  }
  return "unknown";
}

InputFeatures parse_input_features(std::string_view name) {
  if (name == "raw") return InputFeatures::raw;
  if (name == "scaled") return InputFeatures::scaled;
  if (name == "relative") return InputFeatures::relative;
  throw ConfigError("unknown input features '" + std::string(name) +
                    "' (expected raw, scaled or relative)");
}

Matrix input_transform(const WorldConfig& config, InputFeatures features) {
  if (features == InputFeatures::raw) return {};
  const auto& ws = config.workspace;
  const double pos = 2.0 / std::max(ws.hi[0] - ws.lo[0], ws.hi[1] - ws.lo[1]);
  const double vel = 1.0 / config.max_step;
  // Index layout of [obs || goal].
  constexpr std::size_t ee = 0, ee_vel = 2, obj = 4, theta = 6, obj_vel = 7, obstacle = 11,
                        goal = 13, n = kObservationDim + kGoalDim;
  Matrix t(n, n);
  for (std::size_t k = 0; k < 2; ++k) {
    t(ee_vel + k, ee_vel + k) = vel;
    t(obj + k, obj + k) = pos;
    t(obj_vel + k, obj_vel + k) = vel;
    t(obstacle + k, obstacle + k) = pos;
    t(goal + k, goal + k) = pos;
    if (features == InputFeatures::scaled) {
      t(ee + k, ee + k) = pos;
    } else {
      // slot ee: ee - obj; slot 9: goal - ee; slot goal: goal - obj
      t(ee + k, ee + k) = pos;
      t(obj + k, ee + k) = -pos;
      t(goal + k, 9 + k) = pos;
      t(ee + k, 9 + k) = -pos;
      t(obj + k, goal + k) = -pos;
    }
  }
  t(theta, theta) = 1.0 / std::numbers::pi;
  return t;
}

}  // namespace dmfrl

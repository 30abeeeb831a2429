#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "dmfrl/numkit.hpp"

namespace dmfrl {

using Vec2 = std::array<double, 2>;

enum class Task : std::uint8_t { push, slide };
enum class ObjectShape : std::uint8_t { box, cylinder, flat_box };

const char* to_string(Task task);
const char* to_string(ObjectShape shape);
Task parse_task(std::string_view name);
ObjectShape parse_shape(std::string_view name);

struct Bounds {
  Vec2 lo{-0.3, -0.3};
  Vec2 hi{0.3, 0.3};
};

/// Footprint radius and response multiplier of an object shape.
struct ShapeParams {
  double radius;
  double friction_multiplier;
};

ShapeParams shape_params(ObjectShape shape);

struct WorldConfig {
  Task task = Task::push;
  double friction = 0.9;
  ObjectShape object_shape = ObjectShape::box;
  std::optional<Vec2> obstacle;
  double obstacle_radius = 0.03;
  double eta = 0.05;
  double mu = 0.10;
  int episode_len = 50;
  double noise_std = 0.005;
  Bounds workspace;
  double max_step = 0.03;
  double contact_margin = 0.02;
  // End-effector, object and goal spawn within this half-width of the
  // workspace centre.
  double spawn_range = 0.15;

  /// Throws ConfigError on violated invariants.
  void validate() const;
  double contact_radius() const;
};

struct WorldState {
  Vec2 ee_pos{};
  Vec2 ee_vel{};
  Vec2 obj_pos{};
  double obj_theta = 0.0;
  Vec2 obj_vel{};
  Vec2 goal_pos{};
  int step_index = 0;

  bool operator==(const WorldState&) const = default;
};

inline constexpr std::size_t kObservationDim = 13;
inline constexpr std::size_t kGoalDim = 2;
inline constexpr std::size_t kActionDim = 2;

struct Observation {
  std::array<double, kObservationDim> vector{};
  Vec2 achieved_goal{};
  Vec2 desired_goal{};

  bool operator==(const Observation&) const = default;
};

inline constexpr double kNoObstacle = std::numeric_limits<double>::infinity();

struct Distances {
  double d_og = 0.0;
  double d_oe = 0.0;
  double d_es = kNoObstacle;
};

struct StepResult {
  WorldState state;
  Observation observation;
  Distances distances;
  bool done = false;
};

double distance(const Vec2& a, const Vec2& b);

bool is_success(double d_og, double eta);

/// Seeded planar pushing / sliding world. The achieved goal is the object
/// position.
class PushWorld {
 public:
  explicit PushWorld(WorldConfig config);

  const WorldConfig& config() const { return config_; }

  std::pair<WorldState, Observation> reset(std::uint64_t seed) const;
  /// Advances one step. Throws StateError once the episode length is used up.
  StepResult step(const WorldState& state, const Vec2& action) const;

  Observation observe(const WorldState& state) const;
  Distances distances(const WorldState& state, bool noisy, std::mt19937_64& rng) const;
  Distances distances(const WorldState& state) const;

 private:
  WorldConfig config_;
};

/// How network inputs are derived from `[obs || goal]` (15 values).
///   raw      - unchanged
///   scaled   - positions, velocities and angle divided by their ranges
///   relative - scaled, with ee and goal expressed relative to the object
///              (ee - obj, goal - ee, goal - obj) in place of absolute copies
enum class InputFeatures : std::uint8_t { raw, scaled, relative };

const char* to_string(InputFeatures features);
InputFeatures parse_input_features(std::string_view name);

/// Fixed (15 x 15) map T with network input = [obs || goal] T. Empty for raw.
/// The observation's own goal copy is dropped: HER relabels only the
/// separate goal input, so the copy would contradict it.
Matrix input_transform(const WorldConfig& config, InputFeatures features);

}  // namespace dmfrl

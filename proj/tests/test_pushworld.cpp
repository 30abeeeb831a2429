#include <cmath>
#include <random>

#include "dmfrl/config.hpp"
#include "dmfrl/errors.hpp"
#include "dmfrl/pushworld.hpp"
#include "doctest.h"

using namespace dmfrl;

namespace {

WorldState placed(Vec2 ee, Vec2 obj, Vec2 goal) {
  WorldState s;
  s.ee_pos = ee;
  s.obj_pos = obj;
  s.goal_pos = goal;
  return s;
}

bool in_bounds(const Vec2& p, const Bounds& b) {
  return p[0] >= b.lo[0] && p[0] <= b.hi[0] && p[1] >= b.lo[1] && p[1] <= b.hi[1];
}

}  // namespace

TEST_CASE("reset is deterministic and respects separation") {
  const PushWorld world(WorldConfig{});
  const auto [s1, o1] = world.reset(17);
  const auto [s2, o2] = world.reset(17);
  CHECK(s1 == s2);
  CHECK(o1 == o2);
  CHECK(s1.step_index == 0);

  int differing = 0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const auto a = world.reset(2 * i + 1000).first;
    const auto b = world.reset(2 * i + 1001).first;
    if (a.obj_pos != b.obj_pos) ++differing;
    const double sep = 2.0 * world.config().eta;
    CHECK(distance(a.ee_pos, a.obj_pos) >= sep);
    CHECK(distance(a.ee_pos, a.goal_pos) >= sep);
    CHECK(distance(a.obj_pos, a.goal_pos) >= sep);
    CHECK(in_bounds(a.ee_pos, world.config().workspace));
  }
  CHECK(differing == 100);
}

TEST_CASE("reset fails when the workspace cannot fit the separation") {
  WorldConfig c;
  c.workspace = Bounds{{0.0, 0.0}, {0.05, 0.05}};
  c.spawn_range = 0.025;
  const PushWorld world(c);
  CHECK_THROWS_AS(world.reset(1), ConfigError);
}

TEST_CASE("config invariants") {
  WorldConfig c;
  c.eta = 0.0;
  CHECK_THROWS_AS(PushWorld{c}, ConfigError);
  c = WorldConfig{};
  c.episode_len = 0;
  CHECK_THROWS_AS(PushWorld{c}, ConfigError);
  c = WorldConfig{};
  c.noise_std = -1.0;
  CHECK_THROWS_AS(PushWorld{c}, ConfigError);
  c = WorldConfig{};
  c.obstacle = Vec2{2.0, 0.0};
  CHECK_THROWS_AS(PushWorld{c}, ConfigError);
}

TEST_CASE("distances: sentinel, 3-4-5, noise") {
  WorldConfig c;
  c.workspace = Bounds{{-5.0, -5.0}, {5.0, 5.0}};
  const PushWorld world(c);
  WorldState s = placed({1.0, 1.0}, {0.0, 0.0}, {3.0, 4.0});
  Distances d = world.distances(s);
  CHECK(d.d_og == 5.0);
  CHECK(std::isinf(d.d_es));

  s.goal_pos = s.obj_pos;
  CHECK(world.distances(s).d_og == 0.0);

  WorldConfig quiet = c;
  quiet.noise_std = 0.0;
  std::mt19937_64 rng(1);
  const PushWorld q(quiet);
  const Distances n = q.distances(s, true, rng);
  CHECK(n.d_og == 0.0);
  CHECK(n.d_oe == q.distances(s).d_oe);

  // Noisy distances stay non-negative and the sentinel stays infinite.
  for (int i = 0; i < 200; ++i) {
    const Distances nd = world.distances(s, true, rng);
    CHECK(nd.d_og >= 0.0);
    CHECK(std::isinf(nd.d_es));
  }
}

TEST_CASE("is_success boundary") {
  CHECK(is_success(0.0, 0.05));
  CHECK(is_success(0.05, 0.05));
  CHECK_FALSE(is_success(0.05 + 1e-9, 0.05));
}

TEST_CASE("step: zero action without contact leaves the object alone") {
  const PushWorld world(WorldConfig{});
  WorldState s = placed({-0.2, -0.2}, {0.1, 0.1}, {-0.1, 0.1});
  for (int t = 0; t < 50; ++t) {
    const StepResult r = world.step(s, {0.0, 0.0});
    CHECK(r.state.obj_pos == s.obj_pos);
    s = r.state;
  }
  CHECK(s.step_index == 50);
  CHECK_THROWS_AS(world.step(s, {0.0, 0.0}), StateError);
}

TEST_CASE("step: ee moves by clamped action times max_step") {
  const PushWorld world(WorldConfig{});
  const WorldState s = placed({0.0, 0.0}, {0.2, 0.2}, {-0.2, 0.2});
  const StepResult r = world.step(s, {5.0, -0.5});
  CHECK(r.state.ee_pos[0] == doctest::Approx(0.03));
  CHECK(r.state.ee_pos[1] == doctest::Approx(-0.015));
  CHECK(r.state.ee_vel[0] == doctest::Approx(0.03));
  CHECK(r.observation.vector.size() == kObservationDim);
}

TEST_CASE("push displacement grows with friction") {
  auto displacement = [](double friction) {
    WorldConfig c;
    c.friction = friction;
    const PushWorld world(c);
    const WorldState s = placed({0.0, 0.0}, {0.05, 0.0}, {0.2, 0.2});
    return distance(world.step(s, {1.0, 0.0}).state.obj_pos, s.obj_pos);
  };
  const double hi = displacement(0.9);
  const double lo = displacement(0.5);
  CHECK(lo > 0.0);
  CHECK(hi > lo);
}

TEST_CASE("push moves the object along the contact normal") {
  const PushWorld world(WorldConfig{});
  const WorldState s = placed({0.0, 0.0}, {0.03, 0.04}, {0.2, 0.2});
  const StepResult r = world.step(s, {0.0, 0.0});
  // Gap 0.05 > contact radius 0.045? box radius 0.025 + 0.02 margin.
  CHECK(r.state.obj_pos == s.obj_pos);
  const WorldState close = placed({0.0, 0.0}, {0.024, 0.032}, {0.2, 0.2});  // gap 0.04
  const StepResult p = world.step(close, {0.0, 0.0});
  const double dx = p.state.obj_pos[0] - close.obj_pos[0];
  const double dy = p.state.obj_pos[1] - close.obj_pos[1];
  CHECK(dx > 0.0);
  CHECK(dy / dx == doctest::Approx(0.04 / 0.03));
  // overlap 0.005 scaled by friction 0.9
  CHECK(std::hypot(dx, dy) == doctest::Approx(0.005 * 0.9));
}

TEST_CASE("slide: one impulse then geometric decay") {
  WorldConfig c = env_variant("slide-base1");
  c.workspace = Bounds{{-5.0, -5.0}, {5.0, 5.0}};
  const PushWorld world(c);
  WorldState s = placed({0.0, 0.0}, {0.06, 0.0}, {3.0, 3.0});
  s = world.step(s, {1.0, 0.0}).state;  // ee reaches 0.03, gap 0.03 < 0.045
  const double response =
      std::min(1.0, c.friction * shape_params(c.object_shape).friction_multiplier);
  const double decay = 1.0 - 0.2 * response;
  const double v0 = 0.03 * response;
  CHECK(s.obj_pos[0] == doctest::Approx(0.06 + v0));
  CHECK(s.obj_vel[0] == doctest::Approx(v0 * decay));

  // Move the ee away so there is no further contact, then idle.
  WorldState idle = s;
  idle.ee_pos = {-4.0, -4.0};
  double speed = idle.obj_vel[0];
  const double x1 = idle.obj_pos[0];
  for (int k = 0; k < 40; ++k) {
    const WorldState next = world.step(idle, {0.0, 0.0}).state;
    CHECK(next.obj_vel[0] == doctest::Approx(speed * decay).epsilon(1e-12));
    CHECK(next.obj_vel[0] < speed);
    speed = next.obj_vel[0];
    idle = next;
  }
  // Closed form: x_inf = x1 + v1 / (1 - decay) with v1 the velocity after the impulse step.
  const double limit = x1 + s.obj_vel[0] / (1.0 - decay);
  CHECK(idle.obj_pos[0] < limit);
  CHECK(limit - idle.obj_pos[0] ==
        doctest::Approx(s.obj_vel[0] * std::pow(decay, 40) / (1.0 - decay)).epsilon(1e-9));
}

TEST_CASE("positions stay inside the workspace under random actions") {
  for (const auto& name : env_variant_names()) {
    const PushWorld world(env_variant(name));
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int ep = 0; ep < 5; ++ep) {
      WorldState s = world.reset(rng()).first;
      for (int t = 0; t < world.config().episode_len; ++t) {
        const StepResult r = world.step(s, {u(rng), u(rng)});
        s = r.state;
        CHECK(in_bounds(s.ee_pos, world.config().workspace));
        CHECK(in_bounds(s.obj_pos, world.config().workspace));
        CHECK(r.observation.vector.size() == kObservationDim);
      }
    }
  }
}

TEST_CASE("obstacle blocks ee and object, done on success") {
  WorldConfig c = env_variant("push-env3");
  const PushWorld world(c);
  WorldState s = placed({-0.1, 0.0}, {0.15, 0.15}, {-0.15, 0.15});
  for (int t = 0; t < 10; ++t) s = world.step(s, {1.0, 0.0}).state;
  CHECK(distance(s.ee_pos, *c.obstacle) >= c.obstacle_radius - 1e-12);

  WorldState near = placed({0.2, 0.2}, {0.1, 0.1}, {0.1, 0.13});
  const StepResult r = world.step(near, {0.0, 0.0});
  CHECK(r.done);
  CHECK(world.distances(near).d_es == doctest::Approx(std::hypot(0.2, 0.2)));
}

TEST_CASE("trajectories replay bit-identically") {
  const PushWorld world(env_variant("slide-env2"));
  auto rollout = [&] {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<WorldState> states;
    WorldState s = world.reset(3).first;
    for (int t = 0; t < 50; ++t) {
      s = world.step(s, {u(rng), u(rng)}).state;
      states.push_back(s);
    }
    return states;
  };
  CHECK(rollout() == rollout());
}

TEST_CASE("observation layout") {
  WorldConfig c = env_variant("push-env3");
  const PushWorld world(c);
  WorldState s = placed({0.01, 0.02}, {0.1, 0.11}, {-0.1, -0.12});
  s.obj_theta = 0.3;
  const Observation o = world.observe(s);
  CHECK(o.vector[0] == 0.01);
  CHECK(o.vector[4] == 0.1);
  CHECK(o.vector[6] == 0.3);
  CHECK(o.vector[9] == -0.1);
  CHECK(o.vector[11] == (*c.obstacle)[0]);
  CHECK(o.achieved_goal == s.obj_pos);
  CHECK(o.desired_goal == s.goal_pos);
}

TEST_CASE("input transforms") {
  const WorldConfig c = env_variant("push-env3");
  CHECK(input_transform(c, InputFeatures::raw).size() == 0);
  std::vector<double> x(15);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.01 * static_cast<double>(i + 1);
  const double pos = 1.0 / 0.3;
  const Matrix rel = matmul(Matrix::row_vector(x), input_transform(c, InputFeatures::relative));
  CHECK(rel(0, 0) == doctest::Approx((x[0] - x[4]) * pos));
  CHECK(rel(0, 9) == doctest::Approx((x[13] - x[0]) * pos));
  CHECK(rel(0, 10) == doctest::Approx((x[14] - x[1]) * pos));
  CHECK(rel(0, 13) == doctest::Approx((x[13] - x[4]) * pos));
  CHECK(rel(0, 2) == doctest::Approx(x[2] / c.max_step));
  const Matrix sc = matmul(Matrix::row_vector(x), input_transform(c, InputFeatures::scaled));
  CHECK(sc(0, 0) == doctest::Approx(x[0] * pos));
  CHECK(sc(0, 9) == 0.0);  // observation goal copy is dropped
  CHECK(parse_input_features("relative") == InputFeatures::relative);
  CHECK_THROWS_AS(parse_input_features("whitened"), ConfigError);
}

#include "dmfrl/config.hpp"
#include "dmfrl/errors.hpp"
#include "doctest.h"

using namespace dmfrl;

TEST_CASE("key=value parsing with comments and whitespace") {
  const auto kv = KeyValueConfig::parse(
      "# experiment\n"
      "env = push-env2   # trailing comment\n"
      "\n"
      "agent.gamma=0.9\n"
      "seeds = 1, 2 ,3\n");
  CHECK(kv.get_string("env", "") == "push-env2");
  CHECK(kv.get_double("agent.gamma", 0.0) == 0.9);
  CHECK(kv.get_list("seeds") == std::vector<std::string>{"1", "2", "3"});
  CHECK_FALSE(kv.contains("missing"));
  CHECK(kv.get_int("missing", 7) == 7);
  CHECK_THROWS_AS(KeyValueConfig::parse("novalue\n"), ConfigError);
  CHECK_THROWS_AS(KeyValueConfig::parse("=3\n"), ConfigError);
}

TEST_CASE("typed getters reject malformed values") {
  const auto kv = KeyValueConfig::parse("a=1.5x\nb=2.5\nc=maybe\n");
  CHECK_THROWS_AS(kv.get_double("a", 0.0), ConfigError);
  CHECK_THROWS_AS(kv.get_int("b", 0), ConfigError);
  CHECK_THROWS_AS(kv.get_bool("c", false), ConfigError);
}

TEST_CASE("experiment defaults") {
  const ExperimentConfig c = experiment_from_config(KeyValueConfig{});
  CHECK(c.env_name == "push-env1");
  CHECK(c.world.friction == 0.5);
  CHECK(c.method == Method::tfs);
  CHECK(c.reward_mode == RewardMode::sparse);
  CHECK(c.eval_episodes == 50);
  CHECK(c.replay_capacity == 1000);
  CHECK(c.her_k == 4);
  CHECK(c.agent.gamma == 0.98);
  CHECK(c.agent.tau == 0.05);
  CHECK(c.agent.batch_size == 128);
  CHECK(c.train_steps_per_episode == 40);
  CHECK(c.reward.alpha == std::vector<double>{0.3, 0.35, 0.35, 1.0});
  CHECK(c.fusion.freeze_primitives);
  CHECK(c.fusion.post_activation);
  CHECK(c.world.episode_len == 50);
  CHECK(c.world.eta == 0.05);
  CHECK(c.world.mu == 0.10);
  CHECK(c.world.noise_std == 0.005);
  CHECK(c.world.max_step == 0.03);
}

TEST_CASE("experiment keys are read") {
  const auto kv = KeyValueConfig::parse(
      "env=slide-env3\nmethod=dmf2\nreward=mgr\nprimitives=a.ckpt,b.ckpt\nepisodes=20\n"
      "eval_every=5\neval_episodes=3\nseeds=4,5\nagent.hidden=32,16\nagent.optimizer=sgd\n"
      "mgr.alpha1=0.5\nfusion.freeze_primitives=false\nher.k=2\nreplay.capacity=7\n"
      "env.friction=0.4\nenv.obstacle=0.1,0.1\ntrain.steps_per_episode=3\n");
  const ExperimentConfig c = experiment_from_config(kv);
  CHECK(c.world.task == Task::slide);
  CHECK(c.world.friction == 0.4);
  CHECK(c.world.obstacle == Vec2{0.1, 0.1});
  CHECK(c.method == Method::dmf2);
  CHECK(c.reward_mode == RewardMode::mgr);
  CHECK(c.primitive_checkpoints.size() == 2);
  CHECK(c.seeds == std::vector<std::uint64_t>{4, 5});
  CHECK(c.agent.hidden == std::vector<std::size_t>{32, 16});
  CHECK(c.agent.optimizer == OptimizerKind::sgd);
  CHECK(c.reward.alpha[0] == 0.5);
  CHECK_FALSE(c.fusion.freeze_primitives);
  CHECK(c.her_k == 2);
  CHECK(c.replay_capacity == 7);
  CHECK(c.train_steps_per_episode == 3);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("arity and value errors") {
  auto cfg = [](const char* text) { return experiment_from_config(KeyValueConfig::parse(text)); };
  CHECK_THROWS_AS(cfg("method=dmf3\nprimitives=a,b\n").validate(), ConfigError);
  CHECK_THROWS_AS(cfg("method=tfs\nprimitives=a\n").validate(), ConfigError);
  CHECK_THROWS_AS(cfg("method=transfer\n").validate(), ConfigError);
  CHECK_THROWS_AS(cfg("env=push-env9\n"), ConfigError);
  CHECK_THROWS_AS(cfg("env=lift-env1\n"), ConfigError);
  CHECK_THROWS_AS(cfg("agnet.gamma=0.9\n"), ConfigError);  // unknown key in strict mode
  CHECK_THROWS_AS(cfg("agent.gamma=1.5\n"), ConfigError);
  CHECK_THROWS_AS(cfg("agent.batch_size=-1\n"), ConfigError);
  CHECK_THROWS_AS(cfg("episodes=-1\n"), ConfigError);
  CHECK_THROWS_AS(cfg("eval_every=0\n"), ConfigError);
  CHECK_THROWS_AS(cfg("env.obstacle=3,3\n"), ConfigError);
  CHECK_THROWS_AS(cfg("task=slide\nenv=push-env1\n"), ConfigError);
  CHECK_THROWS_AS(cfg("method=dmf2\ninit_actor=x.ckpt\n"), ConfigError);
  CHECK_NOTHROW(experiment_from_config(KeyValueConfig::parse("agnet.gamma=0.9\n"), false));
}

TEST_CASE("env variants") {
  CHECK(env_variant_names().size() == 12);
  for (const auto& name : env_variant_names()) CHECK_NOTHROW(env_variant(name).validate());
  CHECK(env_variant("push-base1").friction == 0.9);
  CHECK(env_variant("push-base2").friction == 0.7);
  CHECK(env_variant("push-base3").object_shape == ObjectShape::cylinder);
  CHECK(env_variant("push-env1").friction == 0.5);
  CHECK(env_variant("push-env2").object_shape == ObjectShape::flat_box);
  CHECK(env_variant("push-env3").obstacle.has_value());
  CHECK(env_variant("slide-env1").task == Task::slide);
  const auto kv = KeyValueConfig::parse("env.obstacle=none\n");
  CHECK_FALSE(apply_env_overrides(env_variant("push-env3"), kv).obstacle.has_value());
}

TEST_CASE("method names") {
  for (Method m : {Method::tfs, Method::transfer, Method::dmf2, Method::dmf3}) {
    CHECK(parse_method(to_string(m)) == m);
  }
  CHECK(required_primitives(Method::dmf3) == 3);
  CHECK_THROWS_AS(parse_method("dmf4"), ConfigError);
}

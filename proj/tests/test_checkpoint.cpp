#include <cstring>
#include <filesystem>
#include <random>

#include "dmfrl/checkpoint.hpp"
#include "dmfrl/errors.hpp"
#include "doctest.h"

using namespace dmfrl;
namespace fs = std::filesystem;

namespace {

Checkpoint mlp_checkpoint() {
  return Checkpoint::from_actor(Actor(MLP({15, 8, 8, 2}, Activation::relu, Activation::tanh, 11)),
                                CheckpointMeta{"push-base1", 300, 1000});
}

Checkpoint fusion_checkpoint() {
  std::vector<PrimitiveLayer> prims;
  for (int i = 0; i < 3; ++i) {
    MLP actor({15, 8, 8, 2}, Activation::relu, Activation::tanh, 20 + i);
    prims.push_back(extract_first_layer(actor, "fnv1a64:000000000000000" + std::to_string(i)));
  }
  FusionOptions opts;
  opts.head_hidden = 12;
  return Checkpoint::from_actor(Actor(FusionPolicy(prims, opts, 5)), CheckpointMeta{"fused", 0, 5});
}

void put_u64(std::vector<std::uint8_t>& b, std::size_t at, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

// The u64 parameter count sits right before the trailing f64 block.
std::size_t count_offset(const Checkpoint& c, const std::vector<std::uint8_t>& bytes) {
  return bytes.size() - 8 * c.flat_parameters().size() - 8;
}

struct TempDir {
  fs::path path;
  TempDir()
      : path(fs::temp_directory_path() / ("dmfrl_ckpt_" + std::to_string(std::random_device{}()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("round trip is bit exact for every kind") {
  TempDir dir;
  const Checkpoint critic = Checkpoint::from_critic(
      MLP({17, 8, 1}, Activation::relu, Activation::identity, 3), CheckpointMeta{"x", 1, 2});
  for (const Checkpoint& c : {mlp_checkpoint(), fusion_checkpoint(), critic}) {
    const auto bytes = encode_checkpoint(c);
    const Checkpoint back = decode_checkpoint(bytes);
    CHECK(back.kind == c.kind);
    CHECK(back.meta == c.meta);
    CHECK(back.flat_parameters() == c.flat_parameters());
    CHECK(encode_checkpoint(back) == bytes);

    const fs::path file = dir.path / "c.ckpt";
    save_checkpoint(file, c);
    CHECK(read_file_bytes(file) == bytes);
    CHECK(load_checkpoint(file).flat_parameters() == c.flat_parameters());
    CHECK(file_hash(file) == content_hash(bytes));
  }
  const Checkpoint f = decode_checkpoint(encode_checkpoint(fusion_checkpoint()));
  const auto& policy = std::get<FusionPolicy>(f.network);
  CHECK(policy.num_primitives() == 3);
  CHECK(policy.primitives()[2].source_id == "fnv1a64:0000000000000002");
  CHECK(policy.options().head_hidden == 12);
}

TEST_CASE("header layout") {
  const auto bytes = encode_checkpoint(mlp_checkpoint());
  CHECK(std::memcmp(bytes.data(), "DMF1", 4) == 0);
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 0);
  CHECK(bytes[8] == static_cast<std::uint8_t>(CheckpointKind::mlp_actor));
}

TEST_CASE("corruptions raise named errors") {
  const Checkpoint c = mlp_checkpoint();
  const auto good = encode_checkpoint(c);

  auto bad_magic = good;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(bad_magic), CheckpointMagicError);

  auto bad_version = good;
  bad_version[4] = 9;
  CHECK_THROWS_AS(decode_checkpoint(bad_version), CheckpointVersionError);

  auto bad_kind = good;
  bad_kind[8] = 7;
  CHECK_THROWS_AS(decode_checkpoint(bad_kind), CheckpointKindError);

  for (std::size_t keep : {std::size_t{0}, std::size_t{3}, std::size_t{20}, good.size() - 1}) {
    const std::vector<std::uint8_t> cut(good.begin(),
                                        good.begin() + static_cast<std::ptrdiff_t>(keep));
    CHECK_THROWS_AS(decode_checkpoint(cut), CheckpointTruncatedError);
  }

  auto off_by_one = good;
  const std::size_t expected = c.flat_parameters().size();
  put_u64(off_by_one, count_offset(c, good), expected + 1);
  try {
    decode_checkpoint(off_by_one);
    FAIL("expected CheckpointCountError");
  } catch (const CheckpointCountError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(std::to_string(expected)) != std::string::npos);
    CHECK(msg.find(std::to_string(expected + 1)) != std::string::npos);
  }

  auto trailing = good;
  trailing.push_back(0);
  CHECK_THROWS_AS(decode_checkpoint(trailing), CheckpointCountError);

  // All named errors share the CheckpointError base.
  CHECK_THROWS_AS(decode_checkpoint(bad_magic), CheckpointError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/dir/x.ckpt"), CheckpointIoError);
}

TEST_CASE("random byte flips never crash") {
  const auto good = encode_checkpoint(fusion_checkpoint());
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> pos(0, good.size() - 1);
  for (int i = 0; i < 500; ++i) {
    auto bytes = good;
    bytes[pos(rng)] ^= static_cast<std::uint8_t>(1 + rng() % 255);
    try {
      decode_checkpoint(bytes);
    } catch (const CheckpointError&) {
    }
  }
}

TEST_CASE("kind checks") {
  const Checkpoint critic = Checkpoint::from_critic(
      MLP({17, 8, 1}, Activation::relu, Activation::identity, 3), CheckpointMeta{});
  CHECK_FALSE(critic.is_actor());
  CHECK_THROWS_AS(critic.actor(), CheckpointKindError);
  CHECK_THROWS_AS(mlp_checkpoint().critic(), CheckpointKindError);
  CHECK_THROWS_AS(extract_first_layer(critic, "c"), CheckpointKindError);
  CHECK_THROWS_AS(extract_first_layer(fusion_checkpoint(), "f"), CheckpointKindError);
  const PrimitiveLayer p = extract_first_layer(mlp_checkpoint(), "id");
  CHECK(p.weight == mlp_checkpoint().actor().mlp().layers()[0].weight);
}

TEST_CASE("content hash") {
  const std::vector<std::uint8_t> empty;
  // FNV-1a 64 offset basis for the empty input.
  CHECK(content_hash(empty) == "fnv1a64:cbf29ce484222325");
  const std::vector<std::uint8_t> a{'a'};
  CHECK(content_hash(a) == "fnv1a64:af63dc4c8601ec8c");
}

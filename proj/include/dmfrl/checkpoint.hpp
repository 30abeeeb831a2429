#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "dmfrl/ddpg.hpp"
#include "dmfrl/fusion.hpp"
#include "dmfrl/numkit.hpp"

namespace dmfrl {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class CheckpointIoError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class CheckpointTruncatedError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class CheckpointMagicError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class CheckpointVersionError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class CheckpointCountError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class CheckpointKindError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};
class CheckpointFormatError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

inline constexpr char kCheckpointMagic[4] = {'D', 'M', 'F', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class CheckpointKind : std::uint8_t { mlp_actor = 0, fusion_actor = 1, critic = 2 };

const char* to_string(CheckpointKind kind);

struct CheckpointMeta {
  std::string env_name;
  std::uint64_t episodes = 0;
  std::uint64_t seed = 0;

  bool operator==(const CheckpointMeta&) const = default;
};

struct Checkpoint {
  CheckpointKind kind = CheckpointKind::mlp_actor;
  std::variant<MLP, FusionPolicy> network;
  CheckpointMeta meta;

  static Checkpoint from_actor(const Actor& actor, CheckpointMeta meta);
  static Checkpoint from_critic(const MLP& critic, CheckpointMeta meta);

  bool is_actor() const { return kind != CheckpointKind::critic; }
  /// Throws CheckpointKindError for critic checkpoints.
  Actor actor() const;
  /// Throws CheckpointKindError unless this is a critic checkpoint.
  const MLP& critic() const;
  std::vector<double> flat_parameters() const;
};

/// Layout (all integers and reals little-endian):
///   "DMF1" | u32 version | u8 kind | architecture | metadata | u64 count | count x f64
/// MLP architecture: u32 width count, u64 widths, u8 activation per layer.
/// Fusion architecture: u32 n, u64 d, u64 input dim, u8 post_activation,
///   u8 freeze_primitives, n source ids, head MLP architecture.
/// Strings are u32 length + bytes. Metadata: env name, u64 episodes, u64 seed.
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

/// "fnv1a64:<16 hex digits>" over the bytes.
std::string content_hash(std::span<const std::uint8_t> bytes);
std::string file_hash(const std::filesystem::path& path);

/// First layer of an MLP actor checkpoint. Throws CheckpointKindError for
/// other kinds.
PrimitiveLayer extract_first_layer(const Checkpoint& checkpoint, std::string source_id);

}  // namespace dmfrl

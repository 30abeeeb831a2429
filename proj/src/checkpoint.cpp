#include "dmfrl/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

namespace dmfrl {

namespace {

constexpr std::uint64_t kMaxWidth = 1u << 20;
constexpr std::uint32_t kMaxLayers = 1024;
constexpr std::uint32_t kMaxString = 1u << 16;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::span<const std::uint8_t> bytes(std::size_t n, const char* what) {
    if (in_.size() - pos_ < n) {
      throw CheckpointTruncatedError("checkpoint truncated while reading " + std::string(what) +
                                     " at byte " + std::to_string(pos_) + " (need " +
                                     std::to_string(n) + ", have " +
                                     std::to_string(in_.size() - pos_) + ")");
    }
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint8_t u8(const char* what) { return bytes(1, what)[0]; }
  std::uint32_t u32(const char* what) {
    auto b = bytes(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64(const char* what) {
    auto b = bytes(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  double f64(const char* what) { return std::bit_cast<double>(u64(what)); }
  std::string str(const char* what) {
    const std::uint32_t n = u32(what);
    if (n > kMaxString) {
      throw CheckpointFormatError(std::string(what) + " length " + std::to_string(n) +
                                  " exceeds limit");
    }
    auto b = bytes(n, what);
    return {b.begin(), b.end()};
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

void write_mlp_arch(Writer& w, const MLP& net) {
  const auto& dims = net.layer_dims();
  w.u32(static_cast<std::uint32_t>(dims.size()));
  for (auto d : dims) w.u64(d);
  for (const auto& layer : net.layers()) w.u8(static_cast<std::uint8_t>(layer.activation));
}

// Rejects architectures whose parameters cannot fit in the remaining bytes,
// before anything is allocated for them.
void require_param_bytes(const Reader& r, std::uint64_t params, std::uint64_t already = 0) {
  const std::uint64_t available = r.remaining() / 8;
  if (params > available || already > available - params) {
    throw CheckpointTruncatedError("truncated checkpoint: architecture needs " +
                                   std::to_string(params + already) + " parameters, only " +
                                   std::to_string(r.remaining()) + " bytes remain");
  }
}

MLP read_mlp_arch(Reader& r, std::uint64_t reserved = 0) {
  const std::uint32_t count = r.u32("layer count");
  if (count < 2 || count > kMaxLayers) {
    throw CheckpointFormatError("invalid layer width count " + std::to_string(count));
  }
  std::vector<std::size_t> dims;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint64_t d = r.u64("layer width");
    if (d == 0 || d > kMaxWidth) {
      throw CheckpointFormatError("invalid layer width " + std::to_string(d));
    }
    dims.push_back(static_cast<std::size_t>(d));
  }
  std::vector<Activation> acts;
  for (std::uint32_t i = 0; i + 1 < count; ++i) {
    const std::uint8_t a = r.u8("activation");
    if (a > static_cast<std::uint8_t>(Activation::tanh)) {
      throw CheckpointFormatError("unknown activation tag " + std::to_string(a));
    }
    acts.push_back(static_cast<Activation>(a));
  }
  std::uint64_t params = 0;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) params += dims[i] * dims[i + 1] + dims[i + 1];
  require_param_bytes(r, params, reserved);
  return MLP(dims, acts);
}

}  // namespace

const char* to_string(CheckpointKind kind) {
  switch (kind) {
    case CheckpointKind::mlp_actor:
      return "mlp_actor";
    case CheckpointKind::fusion_actor:
      return "fusion_actor";
    case CheckpointKind::critic:
      return "critic";
  }
  return "unknown";
}

Checkpoint Checkpoint::from_actor(const Actor& actor, CheckpointMeta meta) {
  Checkpoint c;
  c.meta = std::move(meta);
  if (actor.is_fusion()) {
    c.kind = CheckpointKind::fusion_actor;
    c.network = actor.fusion();
  } else {
    c.kind = CheckpointKind::mlp_actor;
    c.network = actor.mlp();
  }
  return c;
}

Checkpoint Checkpoint::from_critic(const MLP& critic, CheckpointMeta meta) {
  Checkpoint c;
  c.kind = CheckpointKind::critic;
  c.network = critic;
  c.meta = std::move(meta);
  return c;
}

Actor Checkpoint::actor() const {
  switch (kind) {
    case CheckpointKind::mlp_actor:
      return Actor(std::get<MLP>(network));
    case CheckpointKind::fusion_actor:
      return Actor(std::get<FusionPolicy>(network));
    case CheckpointKind::critic:
      break;
  }
  throw CheckpointKindError("expected an actor checkpoint, got a critic checkpoint");
}

const MLP& Checkpoint::critic() const {
  if (kind != CheckpointKind::critic) {
    throw CheckpointKindError(std::string("expected a critic checkpoint, got ") + to_string(kind));
  }
  return std::get<MLP>(network);
}

std::vector<double> Checkpoint::flat_parameters() const {
  return std::visit([](const auto& n) { return n.flat_parameters(); }, network);
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c) {
  const bool fusion = c.kind == CheckpointKind::fusion_actor;
  if (fusion != std::holds_alternative<FusionPolicy>(c.network)) {
    throw CheckpointKindError(std::string("checkpoint kind ") + to_string(c.kind) +
                              " does not match the stored network");
  }
  Writer w;
  w.bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.u32(kCheckpointVersion);
  w.u8(static_cast<std::uint8_t>(c.kind));
  if (fusion) {
    const auto& f = std::get<FusionPolicy>(c.network);
    w.u32(static_cast<std::uint32_t>(f.num_primitives()));
    w.u64(f.feature_dim());
    w.u64(f.input_dim());
    w.u8(f.options().post_activation ? 1 : 0);
    w.u8(f.options().freeze_primitives ? 1 : 0);
    for (const auto& p : f.primitives()) w.str(p.source_id);
    write_mlp_arch(w, f.head());
  } else {
    write_mlp_arch(w, std::get<MLP>(c.network));
  }
  w.str(c.meta.env_name);
  w.u64(c.meta.episodes);
  w.u64(c.meta.seed);
  const std::vector<double> params = c.flat_parameters();
  w.u64(params.size());
  for (double v : params) w.f64(v);
  return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const auto magic = r.bytes(4, "magic");
  if (std::memcmp(magic.data(), kCheckpointMagic, 4) != 0) {
    throw CheckpointMagicError("not a checkpoint: bad magic (expected \"DMF1\")");
  }
  const std::uint32_t version = r.u32("format version");
  if (version != kCheckpointVersion) {
    throw CheckpointVersionError("unsupported checkpoint format version " +
                                 std::to_string(version) +
                                 " (supported: " + std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint8_t kind_tag = r.u8("kind");
  if (kind_tag > static_cast<std::uint8_t>(CheckpointKind::critic)) {
    throw CheckpointKindError("unknown checkpoint kind tag " + std::to_string(kind_tag));
  }
  Checkpoint c;
  c.kind = static_cast<CheckpointKind>(kind_tag);
  if (c.kind == CheckpointKind::fusion_actor) {
    const std::uint32_t n = r.u32("primitive count");
    const std::uint64_t d = r.u64("feature width");
    const std::uint64_t in = r.u64("input width");
    if (n < 2 || n > kMaxLayers || d == 0 || d > kMaxWidth || in == 0 || in > kMaxWidth) {
      throw CheckpointFormatError("invalid fusion descriptor (n=" + std::to_string(n) + ", d=" +
                                  std::to_string(d) + ", input=" + std::to_string(in) + ")");
    }
    const std::uint64_t fixed = n * (in * d + d) + n * d * d + d;
    require_param_bytes(r, fixed);
    FusionOptions opts;
    opts.post_activation = r.u8("post_activation flag") != 0;
    opts.freeze_primitives = r.u8("freeze flag") != 0;
    std::vector<PrimitiveLayer> prims;
    for (std::uint32_t i = 0; i < n; ++i) {
      PrimitiveLayer p;
      p.source_id = r.str("source id");
      p.weight = Matrix(in, d);
      p.bias.assign(d, 0.0);
      prims.push_back(std::move(p));
    }
    MLP head = read_mlp_arch(r, fixed);
    opts.head_hidden = head.layer_dims().size() > 2 ? head.layer_dims()[1] : 0;
    try {
      c.network = FusionPolicy(std::move(prims), Matrix(n * d, d), std::vector<double>(d, 0.0),
                               std::move(head), opts);
    } catch (const std::invalid_argument& e) {
      throw CheckpointFormatError(std::string("inconsistent fusion architecture: ") + e.what());
    }
  } else {
    c.network = read_mlp_arch(r);
  }
  c.meta.env_name = r.str("env name");
  c.meta.episodes = r.u64("episode count");
  c.meta.seed = r.u64("seed");

  const std::uint64_t count = r.u64("parameter count");
  const std::size_t expected =
      std::visit([](const auto& n) { return n.parameter_count(); }, c.network);
  if (count != expected) {
    throw CheckpointCountError("parameter count mismatch: architecture expects " +
                               std::to_string(expected) + ", file declares " +
                               std::to_string(count));
  }
  std::vector<double> params(expected);
  for (double& v : params) v = r.f64("parameters");
  if (r.remaining() != 0) {
    throw CheckpointCountError("parameter count mismatch: " + std::to_string(r.remaining()) +
                               " unexpected trailing bytes after " + std::to_string(expected) +
                               " parameters");
  }
  std::visit([&](auto& n) { n.set_flat_parameters(params); }, c.network);
  return c;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointIoError("cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const auto bytes = encode_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointIoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointIoError("failed writing '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file_bytes(path));
}

std::string content_hash(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string file_hash(const std::filesystem::path& path) {
  return content_hash(read_file_bytes(path));
}

PrimitiveLayer extract_first_layer(const Checkpoint& checkpoint, std::string source_id) {
  if (checkpoint.kind != CheckpointKind::mlp_actor) {
    throw CheckpointKindError(
        std::string("primitive extraction needs an mlp_actor checkpoint, got ") +
        to_string(checkpoint.kind));
  }
  return extract_first_layer(std::get<MLP>(checkpoint.network), std::move(source_id));
}

}  // namespace dmfrl

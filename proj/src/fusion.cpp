#include "dmfrl/fusion.hpp"

#include <algorithm>
#include <string>

#include "dmfrl/errors.hpp"

namespace dmfrl {

namespace {

std::string dims_str(std::size_t in, std::size_t d) {
  return "(input " + std::to_string(in) + ", features " + std::to_string(d) + ")";
}

void add_into(std::span<double> dst, std::span<const double> src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void add_column_sums(std::span<double> dst, const Matrix& m) {
  for (std::size_t r = 0; r < m.rows(); ++r) add_into(dst, m.row(r));
}

}  // namespace

Matrix PrimitiveLayer::features(const Matrix& input, bool post_activation) const {
  Matrix z = matmul(input, weight);
  for (std::size_t r = 0; r < z.rows(); ++r) {
    auto row = z.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bias[c];
    if (post_activation) apply_activation(Activation::relu, row);
  }
  return z;
}

PrimitiveLayer extract_first_layer(const MLP& actor, std::string source_id) {
  if (actor.num_layers() < 2) {
    throw DimensionError("extract_first_layer: actor needs at least one hidden layer, has " +
                         std::to_string(actor.num_layers()) + " layer(s)");
  }
  const DenseLayer& first = actor.layers().front();
  return PrimitiveLayer{first.weight, first.bias, std::move(source_id)};
}

void check_compatible(const PrimitiveLayer& reference, const PrimitiveLayer& candidate) {
  if (reference.input_dim() != candidate.input_dim() ||
      reference.feature_dim() != candidate.feature_dim()) {
    throw DimensionError("primitive '" + candidate.source_id + "' " +
                         dims_str(candidate.input_dim(), candidate.feature_dim()) +
                         " is incompatible with '" + reference.source_id + "' " +
                         dims_str(reference.input_dim(), reference.feature_dim()));
  }
}

Matrix fuse_features(std::span<const Matrix> features, const Matrix& fc_weight,
                     std::span<const double> fc_bias) {
  if (features.empty()) throw DimensionError("fuse_features: no features");
  const std::size_t batch = features.front().rows();
  const std::size_t d = features.front().cols();
  for (const Matrix& h : features) {
    if (h.rows() != batch || h.cols() != d) {
      throw DimensionError("fuse_features: feature of shape (" + std::to_string(h.rows()) + " x " +
                           std::to_string(h.cols()) + "), expected (" + std::to_string(batch) +
                           " x " + std::to_string(d) + ")");
    }
  }
  const std::size_t n = features.size();
  if (fc_weight.rows() != n * d || fc_weight.cols() != d || fc_bias.size() != d) {
    throw DimensionError("fuse_features: W_fc (" + std::to_string(fc_weight.rows()) + " x " +
                         std::to_string(fc_weight.cols()) + "), b_fc " +
                         std::to_string(fc_bias.size()) + " for n=" + std::to_string(n) +
                         ", d=" + std::to_string(d));
  }

  std::vector<const Matrix*> parts;
  for (const Matrix& h : features) parts.push_back(&h);
  const Matrix concat = hconcat(parts);
  const Matrix linear = matmul(concat, fc_weight);

  Matrix out(batch, 3 * d);
  for (std::size_t r = 0; r < batch; ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < d; ++c) {
      double sum = 0.0;
      double prod = 1.0;
      for (const Matrix& h : features) {
        sum += h(r, c);
        prod *= h(r, c);
      }
      row[c] = sum;
      row[d + c] = prod;
      row[2 * d + c] = linear(r, c) + fc_bias[c];
    }
  }
  return out;
}

std::vector<double> fuse_features(std::span<const std::vector<double>> features,
                                  const Matrix& fc_weight, std::span<const double> fc_bias) {
  std::vector<Matrix> rows;
  rows.reserve(features.size());
  for (const auto& h : features) rows.push_back(Matrix::row_vector(h));
  const Matrix fused = fuse_features(rows, fc_weight, fc_bias);
  return {fused.data().begin(), fused.data().end()};
}

Matrix average_stacking(std::size_t n, std::size_t d) {
  Matrix w(n * d, d);
  const double share = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < d; ++c) w(i * d + c, c) = share;
  }
  return w;
}

FusionPolicy::FusionPolicy(std::vector<PrimitiveLayer> primitives, FusionOptions options,
                           std::uint64_t seed)
    : primitives_(std::move(primitives)), options_(options) {
  if (primitives_.size() < 2) {
    throw ArgumentError("a fusion policy needs at least 2 primitives, got " +
                        std::to_string(primitives_.size()));
  }
  const std::size_t d = primitives_.front().feature_dim();
  fc_weight_ = average_stacking(primitives_.size(), d);
  fc_bias_.assign(d, 0.0);
  head_ = MLP({3 * d, options_.head_hidden, options_.action_dim}, Activation::relu,
              Activation::tanh, seed);
  validate();
  allocate_grads();
}

FusionPolicy::FusionPolicy(std::vector<PrimitiveLayer> primitives, Matrix fc_weight,
                           std::vector<double> fc_bias, MLP head, FusionOptions options)
    : primitives_(std::move(primitives)),
      fc_weight_(std::move(fc_weight)),
      fc_bias_(std::move(fc_bias)),
      head_(std::move(head)),
      options_(options) {
  if (primitives_.size() < 2) {
    throw ArgumentError("a fusion policy needs at least 2 primitives, got " +
                        std::to_string(primitives_.size()));
  }
  options_.action_dim = head_.output_dim();
  validate();
  allocate_grads();
}

void FusionPolicy::validate() const {
  const PrimitiveLayer& ref = primitives_.front();
  for (const auto& p : primitives_) {
    check_compatible(ref, p);
    if (p.bias.size() != p.feature_dim()) {
      throw DimensionError("primitive '" + p.source_id + "' bias length " +
                           std::to_string(p.bias.size()) + " != feature width " +
                           std::to_string(p.feature_dim()));
    }
  }
  const std::size_t n = primitives_.size();
  const std::size_t d = ref.feature_dim();
  if (fc_weight_.rows() != n * d || fc_weight_.cols() != d || fc_bias_.size() != d) {
    throw DimensionError("W_fc must be (" + std::to_string(n * d) + " x " + std::to_string(d) +
                         "), got (" + std::to_string(fc_weight_.rows()) + " x " +
                         std::to_string(fc_weight_.cols()) + ")");
  }
  if (head_.input_dim() != 3 * d) {
    throw DimensionError("fusion head input must be 3d = " + std::to_string(3 * d) + ", got " +
                         std::to_string(head_.input_dim()));
  }
}

void FusionPolicy::allocate_grads() {
  const std::size_t d = feature_dim();
  fc_weight_grad_ = Matrix(primitives_.size() * d, d);
  fc_bias_grad_.assign(d, 0.0);
  primitive_weight_grads_.clear();
  primitive_bias_grads_.clear();
  if (!options_.freeze_primitives) {
    for (const auto& p : primitives_) {
      primitive_weight_grads_.emplace_back(p.input_dim(), d);
      primitive_bias_grads_.emplace_back(d, 0.0);
    }
  }
}

void FusionPolicy::check_input(const Matrix& input) const {
  if (input.cols() != input_dim()) {
    throw ArgumentError("fusion policy input width: expected " + std::to_string(input_dim()) +
                        ", got " + std::to_string(input.cols()));
  }
}

std::vector<Matrix> FusionPolicy::primitive_features(const Matrix& input,
                                                     std::vector<Matrix>* pre) const {
  std::vector<Matrix> features;
  features.reserve(primitives_.size());
  for (const auto& p : primitives_) {
    Matrix z = p.features(input, false);
    Matrix h = z;
    if (options_.post_activation) apply_activation(Activation::relu, h.data());
    if (pre) pre->push_back(std::move(z));
    features.push_back(std::move(h));
  }
  return features;
}

Matrix FusionPolicy::forward(const Matrix& obs_goal) {
  check_input(obs_goal);
  cached_pre_.clear();
  cached_features_ = primitive_features(obs_goal, &cached_pre_);
  std::vector<const Matrix*> parts;
  for (const Matrix& h : cached_features_) parts.push_back(&h);
  cached_concat_ = hconcat(parts);
  cached_input_ = obs_goal;
  has_cache_ = true;
  return head_.forward(fuse_features(cached_features_, fc_weight_, fc_bias_));
}

Matrix FusionPolicy::predict(const Matrix& obs_goal) const {
  check_input(obs_goal);
  const auto features = primitive_features(obs_goal, nullptr);
  return head_.predict(fuse_features(features, fc_weight_, fc_bias_));
}

Matrix FusionPolicy::backward(const Matrix& action_grad) {
  if (!has_cache_) throw StateError("FusionPolicy::backward called before forward");
  const std::size_t n = primitives_.size();
  const std::size_t d = feature_dim();
  const std::size_t batch = cached_input_.rows();

  const Matrix fused_grad = head_.backward(action_grad);
  const Matrix linear_grad = column_slice(fused_grad, 2 * d, d);

  const Matrix wg = matmul_at_b(cached_concat_, linear_grad);
  add_into(fc_weight_grad_.data(), wg.data());
  add_column_sums(fc_bias_grad_, linear_grad);
  const Matrix concat_grad = matmul_a_bt(linear_grad, fc_weight_);

  std::vector<Matrix> feature_grads(n, Matrix(batch, d));
  std::vector<double> prefix(n);
  std::vector<double> suffix(n);
  for (std::size_t r = 0; r < batch; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      const double g_sum = fused_grad(r, c);
      const double g_prod = fused_grad(r, d + c);
      // Product of all features except the i-th, without division.
      double acc = 1.0;
      for (std::size_t i = 0; i < n; ++i) {
        prefix[i] = acc;
        acc *= cached_features_[i](r, c);
      }
      acc = 1.0;
      for (std::size_t i = n; i-- > 0;) {
        suffix[i] = acc;
        acc *= cached_features_[i](r, c);
      }
      for (std::size_t i = 0; i < n; ++i) {
        feature_grads[i](r, c) = g_sum + g_prod * prefix[i] * suffix[i] + concat_grad(r, i * d + c);
      }
    }
  }

  Matrix input_grad(batch, input_dim());
  for (std::size_t i = 0; i < n; ++i) {
    Matrix& g = feature_grads[i];
    if (options_.post_activation) {
      auto pre = cached_pre_[i].data();
      auto gd = g.data();
      for (std::size_t k = 0; k < gd.size(); ++k) {
        if (pre[k] <= 0.0) gd[k] = 0.0;
      }
    }
    if (!options_.freeze_primitives) {
      const Matrix pw = matmul_at_b(cached_input_, g);
      add_into(primitive_weight_grads_[i].data(), pw.data());
      add_column_sums(primitive_bias_grads_[i], g);
    }
    const Matrix ig = matmul_a_bt(g, primitives_[i].weight);
    add_into(input_grad.data(), ig.data());
  }
  return input_grad;
}

std::vector<ParamView> FusionPolicy::parameters() {
  std::vector<ParamView> out;
  if (!options_.freeze_primitives) {
    for (std::size_t i = 0; i < primitives_.size(); ++i) {
      out.push_back({primitives_[i].weight.data(), primitive_weight_grads_[i].data()});
      out.push_back({primitives_[i].bias, primitive_bias_grads_[i]});
    }
  }
  out.push_back({fc_weight_.data(), fc_weight_grad_.data()});
  out.push_back({fc_bias_, fc_bias_grad_});
  for (const auto& p : head_.parameters()) out.push_back(p);
  return out;
}

void FusionPolicy::zero_grad() {
  auto params = parameters();
  zero_grads(params);
}

std::size_t FusionPolicy::parameter_count() const {
  std::size_t count = 0;
  for (const auto& p : primitives_) count += p.weight.size() + p.bias.size();
  return count + fc_weight_.size() + fc_bias_.size() + head_.parameter_count();
}

std::vector<double> FusionPolicy::flat_parameters() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto& p : primitives_) {
    out.insert(out.end(), p.weight.data().begin(), p.weight.data().end());
    out.insert(out.end(), p.bias.begin(), p.bias.end());
  }
  out.insert(out.end(), fc_weight_.data().begin(), fc_weight_.data().end());
  out.insert(out.end(), fc_bias_.begin(), fc_bias_.end());
  const auto head = head_.flat_parameters();
  out.insert(out.end(), head.begin(), head.end());
  return out;
}

void FusionPolicy::set_flat_parameters(std::span<const double> values) {
  if (values.size() != parameter_count()) {
    throw DimensionError("fusion parameter count: expected " + std::to_string(parameter_count()) +
                         ", got " + std::to_string(values.size()));
  }
  auto it = values.begin();
  auto take = [&it](std::span<double> dst) {
    std::copy(it, it + static_cast<std::ptrdiff_t>(dst.size()), dst.begin());
    it += static_cast<std::ptrdiff_t>(dst.size());
  };
  for (auto& p : primitives_) {
    take(p.weight.data());
    take(p.bias);
  }
  take(fc_weight_.data());
  take(fc_bias_);
  head_.set_flat_parameters(values.subspan(static_cast<std::size_t>(it - values.begin())));
  has_cache_ = false;
}

bool FusionPolicy::same_architecture(const FusionPolicy& other) const {
  return primitives_.size() == other.primitives_.size() && feature_dim() == other.feature_dim() &&
         input_dim() == other.input_dim() &&
         options_.post_activation == other.options_.post_activation &&
         head_.same_architecture(other.head_);
}

void copy_params(const FusionPolicy& src, FusionPolicy& dst, double tau) {
  if (!src.same_architecture(dst))
    throw DimensionError("copy_params: fusion architecture mismatch");
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw ArgumentError("copy_params: tau must lie in [0, 1], got " + std::to_string(tau));
  }
  auto blend = [tau](std::span<const double> s, std::span<double> d) {
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = tau * s[i] + (1.0 - tau) * d[i];
  };
  if (!dst.options_.freeze_primitives) {
    for (std::size_t i = 0; i < src.primitives_.size(); ++i) {
      blend(src.primitives_[i].weight.data(), dst.primitives_[i].weight.data());
      blend(src.primitives_[i].bias, dst.primitives_[i].bias);
    }
  }
  blend(src.fc_weight_.data(), dst.fc_weight_.data());
  blend(src.fc_bias_, dst.fc_bias_);
  copy_params(src.head_, dst.head_, tau);
}

}  // namespace dmfrl

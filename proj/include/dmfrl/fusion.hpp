#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dmfrl/numkit.hpp"

namespace dmfrl {

/// First layer of a previously trained policy, reused as a feature extractor.
struct PrimitiveLayer {
  Matrix weight;  // (input_dim, d)
  std::vector<double> bias;
  std::string source_id;

  std::size_t input_dim() const { return weight.rows(); }
  std::size_t feature_dim() const { return weight.cols(); }

  /// x W + b, then relu when `post_activation`.
  Matrix features(const Matrix& input, bool post_activation = true) const;

  bool operator==(const PrimitiveLayer&) const = default;
};

/// Copies the first dense layer of `actor`. Throws DimensionError if the
/// actor has no hidden layer.
PrimitiveLayer extract_first_layer(const MLP& actor, std::string source_id);

/// Throws DimensionError naming both shapes unless `candidate` has the same
/// input and feature width as `reference`.
void check_compatible(const PrimitiveLayer& reference, const PrimitiveLayer& candidate);

/// Fused feature for a batch of per-primitive features h_1..h_n (each
/// batch x d):
///
///   h_f = (h_1 + ... + h_n) || (h_1 * ... * h_n) || ([h_1 || ... || h_n] W_fc + b_fc)
///
/// W_fc is (n*d, d) and b_fc has length d, so h_f always has width 3d.
Matrix fuse_features(std::span<const Matrix> features, const Matrix& fc_weight,
                     std::span<const double> fc_bias);

/// Single-sample convenience overload.
std::vector<double> fuse_features(std::span<const std::vector<double>> features,
                                  const Matrix& fc_weight, std::span<const double> fc_bias);

/// (n*d, d) matrix whose d x d blocks are identity / n, so the linear path
/// starts as the mean feature.
Matrix average_stacking(std::size_t n, std::size_t d);

struct FusionOptions {
  bool freeze_primitives = true;
  bool post_activation = true;
  std::size_t head_hidden = 64;
  std::size_t action_dim = 2;
};

/// Policy built on the fused first-layer features of n >= 2 primitives.
///
/// Trainable parameters are W_fc, b_fc and the head MLP (3d -> hidden ->
/// action, tanh output). Primitive layers join the trainable set only when
/// `freeze_primitives` is off.
class FusionPolicy {
 public:
  FusionPolicy() = default;
  /// W_fc = average stacking, b_fc = 0, head initialized from `seed`.
  FusionPolicy(std::vector<PrimitiveLayer> primitives, FusionOptions options, std::uint64_t seed);
  FusionPolicy(std::vector<PrimitiveLayer> primitives, Matrix fc_weight,
               std::vector<double> fc_bias, MLP head, FusionOptions options);

  std::size_t num_primitives() const { return primitives_.size(); }
  std::size_t feature_dim() const { return primitives_.front().feature_dim(); }
  std::size_t input_dim() const { return primitives_.front().input_dim(); }
  std::size_t output_dim() const { return head_.output_dim(); }

  const std::vector<PrimitiveLayer>& primitives() const { return primitives_; }
  const Matrix& fc_weight() const { return fc_weight_; }
  const std::vector<double>& fc_bias() const { return fc_bias_; }
  const MLP& head() const { return head_; }
  MLP& head() { return head_; }
  const FusionOptions& options() const { return options_; }

  Matrix forward(const Matrix& obs_goal);
  Matrix predict(const Matrix& obs_goal) const;
  /// Accumulates gradients of trainable parameters, returns d/d(obs_goal).
  Matrix backward(const Matrix& action_grad);

  std::vector<ParamView> parameters();
  void zero_grad();

  const Matrix& fc_weight_grad() const { return fc_weight_grad_; }
  const std::vector<double>& fc_bias_grad() const { return fc_bias_grad_; }

  /// Every parameter in declared order: each primitive (weight, bias), then
  /// W_fc, b_fc, then the head.
  std::size_t parameter_count() const;
  std::vector<double> flat_parameters() const;
  void set_flat_parameters(std::span<const double> values);

  bool same_architecture(const FusionPolicy& other) const;

  /// dst <- tau * src + (1 - tau) * dst over the trainable parameters.
  friend void copy_params(const FusionPolicy& src, FusionPolicy& dst, double tau);

 private:
  void validate() const;
  void allocate_grads();
  void check_input(const Matrix& input) const;
  std::vector<Matrix> primitive_features(const Matrix& input, std::vector<Matrix>* pre) const;

  std::vector<PrimitiveLayer> primitives_;
  Matrix fc_weight_;
  std::vector<double> fc_bias_;
  MLP head_;
  FusionOptions options_;

  Matrix fc_weight_grad_;
  std::vector<double> fc_bias_grad_;
  std::vector<Matrix> primitive_weight_grads_;
  std::vector<std::vector<double>> primitive_bias_grads_;

  Matrix cached_input_;
  std::vector<Matrix> cached_pre_;
  std::vector<Matrix> cached_features_;
  Matrix cached_concat_;
  bool has_cache_ = false;
};

}  // namespace dmfrl

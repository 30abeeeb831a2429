#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace dmfrl {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix row_vector(std::span<const double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  void fill(double value);

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// out = a * b
Matrix matmul(const Matrix& a, const Matrix& b);
// out = a^T * b
Matrix matmul_at_b(const Matrix& a, const Matrix& b);
// out = a * b^T
Matrix matmul_a_bt(const Matrix& a, const Matrix& b);

/// Concatenate matrices with equal row counts side by side.
Matrix hconcat(std::span<const Matrix* const> parts);
/// Copy columns [first, first + count) into a new matrix.
Matrix column_slice(const Matrix& m, std::size_t first, std::size_t count);

enum class Activation : std::uint8_t { identity = 0, relu = 1, tanh = 2 };

const char* to_string(Activation act);

/// Applies `act` in place.
void apply_activation(Activation act, std::span<double> values);
/// Multiplies `grad` in place by the activation derivative, expressed through
/// the activation's output.
void activation_backward(Activation act, std::span<const double> output, std::span<double> grad);

/// A trainable parameter block and its gradient buffer.
struct ParamView {
  std::span<double> value;
  std::span<double> grad;
};

double grad_norm(std::span<const ParamView> params);
void zero_grads(std::span<const ParamView> params);

/// Plain gradient descent. Grads are zeroed afterwards. When `max_grad_norm`
/// is set, the joint gradient is rescaled to at most that L2 norm first.
void sgd_update(std::span<const ParamView> params, double learning_rate,
                std::optional<double> max_grad_norm = std::nullopt);

/// Adam with bias correction. State is bound to the parameter layout seen on
/// the first step.
class Adam {
 public:
  explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                double epsilon = 1e-8);

  void step(std::span<const ParamView> params, std::optional<double> max_grad_norm = std::nullopt);

  double learning_rate() const { return lr_; }

 private:
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

struct DenseLayer {
  Matrix weight;  // (in, out)
  std::vector<double> bias;
  Activation activation = Activation::identity;
  Matrix weight_grad;
  std::vector<double> bias_grad;
};

/// Fully connected network y = act(x W + b) per layer, with cached forward
/// state for reverse-mode gradients.
class MLP {
 public:
  MLP() = default;
  /// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)] from `seed`.
  MLP(std::vector<std::size_t> layer_dims, Activation hidden, Activation output,
      std::uint64_t seed);
  /// Zero-initialized parameters with an explicit activation per layer.
  MLP(std::vector<std::size_t> layer_dims, std::vector<Activation> activations);

  const std::vector<std::size_t>& layer_dims() const { return dims_; }
  std::size_t input_dim() const { return dims_.front(); }
  std::size_t output_dim() const { return dims_.back(); }
  std::size_t num_layers() const { return layers_.size(); }

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  /// Batch forward (rows are samples). Caches activations for backward.
  Matrix forward(const Matrix& input);
  /// Same as forward without touching the cache.
  Matrix predict(const Matrix& input) const;
  /// Accumulates parameter gradients and returns d(loss)/d(input).
  Matrix backward(const Matrix& output_grad);

  void zero_grad();
  void sgd_step(double learning_rate, std::optional<double> max_grad_norm = std::nullopt);

  std::vector<ParamView> parameters();
  std::size_t parameter_count() const;
  /// Parameters in declared order: per layer, weight (row-major) then bias.
  std::vector<double> flat_parameters() const;
  void set_flat_parameters(std::span<const double> values);

  bool same_architecture(const MLP& other) const;

 private:
  void check_input(const Matrix& input) const;

  std::vector<std::size_t> dims_;
  std::vector<DenseLayer> layers_;
  std::vector<Matrix> cached_inputs_;
  std::vector<Matrix> cached_outputs_;
  bool has_cache_ = false;
};

/// dst <- tau * src + (1 - tau) * dst for every parameter.
void copy_params(const MLP& src, MLP& dst, double tau);

}  // namespace dmfrl

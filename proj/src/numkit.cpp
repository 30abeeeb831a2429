#include "dmfrl/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "dmfrl/errors.hpp"

namespace dmfrl {

namespace {

std::string shape_str(std::size_t r, std::size_t c) {
  return "(" + std::to_string(r) + " x " + std::to_string(c) + ")";
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw DimensionError("matrix data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_str(rows, cols));
  }
}

Matrix Matrix::row_vector(std::span<const double> values) {
  return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

void Matrix::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + shape_str(a.rows(), a.cols()) + " * " +
                         shape_str(b.rows(), b.cols()));
  }
  Matrix out(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* o = out.row(i).data();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* brow = b.row(k).data();
      for (std::size_t j = 0; j < n; ++j) o[j] += aik * brow[j];
    }
  }
  return out;
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("matmul_at_b: " + shape_str(a.rows(), a.cols()) + "^T * " +
                         shape_str(b.rows(), b.cols()));
  }
  Matrix out(a.cols(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double* arow = a.row(r).data();
    const double* brow = b.row(r).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double ari = arow[i];
      if (ari == 0.0) continue;
      double* o = out.row(i).data();
      for (std::size_t j = 0; j < n; ++j) o[j] += ari * brow[j];
    }
  }
  return out;
}

Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("matmul_a_bt: " + shape_str(a.rows(), a.cols()) + " * " +
                         shape_str(b.rows(), b.cols()) + "^T");
  }
  Matrix out(a.rows(), b.rows());
  const std::size_t k = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* arow = a.row(i).data();
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* brow = b.row(j).data();
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) acc += arow[t] * brow[t];
      out(i, j) = acc;
    }
  }
  return out;
}

Matrix hconcat(std::span<const Matrix* const> parts) {
  if (parts.empty()) return {};
  const std::size_t rows = parts.front()->rows();
  std::size_t cols = 0;
  for (const Matrix* p : parts) {
    if (p->rows() != rows) {
      throw DimensionError("hconcat: row count " + std::to_string(p->rows()) +
                           " != " + std::to_string(rows));
    }
    cols += p->cols();
  }
  Matrix out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    auto dst = out.row(r).begin();
    for (const Matrix* p : parts) dst = std::copy(p->row(r).begin(), p->row(r).end(), dst);
  }
  return out;
}

Matrix column_slice(const Matrix& m, std::size_t first, std::size_t count) {
  if (first + count > m.cols()) {
    throw DimensionError("column_slice: columns [" + std::to_string(first) + ", " +
                         std::to_string(first + count) + ") out of " + std::to_string(m.cols()));
  }
  Matrix out(m.rows(), count);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto src = m.row(r).subspan(first, count);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

const char* to_string(Activation act) {
  switch (act) {
    case Activation::identity:
      return "identity";
    case Activation::relu:
      return "relu";
    case Activation::tanh:
      return "tanh";
  }
  return "unknown";
}

void apply_activation(Activation act, std::span<double> values) {
  switch (act) {
    case Activation::identity:
      break;
    case Activation::relu:
      for (double& v : values) v = v > 0.0 ? v : 0.0;
      break;
    case Activation::tanh:
      for (double& v : values) v = std::tanh(v);
      break;
  }
}

void activation_backward(Activation act, std::span<const double> output, std::span<double> grad) {
  switch (act) {
    case Activation::identity:
      break;
    case Activation::relu:
      for (std::size_t i = 0; i < grad.size(); ++i) {
        if (output[i] <= 0.0) grad[i] = 0.0;
      }
      break;
    case Activation::tanh:
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= 1.0 - output[i] * output[i];
      break;
  }
}

double grad_norm(std::span<const ParamView> params) {
  double sq = 0.0;
  for (const auto& p : params) {
    for (double g : p.grad) sq += g * g;
  }
  return std::sqrt(sq);
}

void zero_grads(std::span<const ParamView> params) {
  for (const auto& p : params) std::fill(p.grad.begin(), p.grad.end(), 0.0);
}

namespace {

double clip_scale(std::span<const ParamView> params, std::optional<double> max_grad_norm) {
  if (!max_grad_norm) return 1.0;
  const double norm = grad_norm(params);
  return norm > *max_grad_norm ? *max_grad_norm / norm : 1.0;
}

}  // namespace

void sgd_update(std::span<const ParamView> params, double learning_rate,
                std::optional<double> max_grad_norm) {
  if (!(learning_rate >= 0.0)) {
    throw ArgumentError("learning rate must be non-negative, got " + std::to_string(learning_rate));
  }
  const double scale = clip_scale(params, max_grad_norm);
  for (const auto& p : params) {
    for (std::size_t i = 0; i < p.value.size(); ++i)
      p.value[i] -= learning_rate * scale * p.grad[i];
  }
  zero_grads(params);
}

Adam::Adam(double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
  if (!(learning_rate > 0.0)) {
    throw ArgumentError("learning rate must be positive, got " + std::to_string(learning_rate));
  }
}

void Adam::step(std::span<const ParamView> params, std::optional<double> max_grad_norm) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.value.size(), 0.0);
      v_.emplace_back(p.value.size(), 0.0);
    }
  }
  if (m_.size() != params.size()) {
    throw DimensionError("Adam: parameter block count changed from " + std::to_string(m_.size()) +
                         " to " + std::to_string(params.size()));
  }
  ++t_;
  const double scale = clip_scale(params, max_grad_norm);
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto& m = m_[b];
    auto& v = v_[b];
    const auto& p = params[b];
    if (m.size() != p.value.size()) {
      throw DimensionError("Adam: parameter block " + std::to_string(b) + " resized");
    }
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double g = p.grad[i] * scale;
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      p.value[i] -= lr_ * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
    }
  }
  zero_grads(params);
}

MLP::MLP(std::vector<std::size_t> layer_dims, std::vector<Activation> activations)
    : dims_(std::move(layer_dims)) {
  if (dims_.size() < 2) throw ArgumentError("MLP needs at least an input and an output width");
  if (activations.size() != dims_.size() - 1) {
    throw DimensionError("MLP: " + std::to_string(activations.size()) + " activations for " +
                         std::to_string(dims_.size() - 1) + " layers");
  }
  for (std::size_t k = 0; k + 1 < dims_.size(); ++k) {
    if (dims_[k] == 0 || dims_[k + 1] == 0) throw ArgumentError("MLP layer width must be positive");
    DenseLayer layer;
    layer.weight = Matrix(dims_[k], dims_[k + 1]);
    layer.bias.assign(dims_[k + 1], 0.0);
    layer.activation = activations[k];
    layer.weight_grad = Matrix(dims_[k], dims_[k + 1]);
    layer.bias_grad.assign(dims_[k + 1], 0.0);
    layers_.push_back(std::move(layer));
  }
}

MLP::MLP(std::vector<std::size_t> layer_dims, Activation hidden, Activation output,
         std::uint64_t seed)
    : MLP(layer_dims, [&] {
        std::vector<Activation> acts(layer_dims.size() > 1 ? layer_dims.size() - 1 : 0, hidden);
        if (!acts.empty()) acts.back() = output;
        return acts;
      }()) {
  std::mt19937_64 rng(seed);
  for (auto& layer : layers_) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.rows()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& w : layer.weight.data()) w = dist(rng);
    for (double& b : layer.bias) b = dist(rng);
  }
}

void MLP::check_input(const Matrix& input) const {
  if (layers_.empty()) throw StateError("MLP has no layers");
  if (input.cols() != dims_.front()) {
    throw DimensionError("MLP input width: expected " + std::to_string(dims_.front()) + ", got " +
                         std::to_string(input.cols()));
  }
}

namespace {

Matrix dense_forward(const DenseLayer& layer, const Matrix& x) {
  Matrix y = matmul(x, layer.weight);
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += layer.bias[c];
    apply_activation(layer.activation, row);
  }
  return y;
}

}  // namespace

Matrix MLP::forward(const Matrix& input) {
  check_input(input);
  cached_inputs_.resize(layers_.size());
  cached_outputs_.resize(layers_.size());
  const Matrix* x = &input;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    cached_inputs_[k] = *x;
    cached_outputs_[k] = dense_forward(layers_[k], *x);
    x = &cached_outputs_[k];
  }
  has_cache_ = true;
  return cached_outputs_.back();
}

Matrix MLP::predict(const Matrix& input) const {
  check_input(input);
  Matrix x = input;
  for (const auto& layer : layers_) x = dense_forward(layer, x);
  return x;
}

Matrix MLP::backward(const Matrix& output_grad) {
  if (!has_cache_) throw StateError("MLP::backward called before forward");
  const Matrix& out = cached_outputs_.back();
  if (output_grad.rows() != out.rows() || output_grad.cols() != out.cols()) {
    throw DimensionError("MLP::backward: output grad " +
                         shape_str(output_grad.rows(), output_grad.cols()) + " vs output " +
                         shape_str(out.rows(), out.cols()));
  }
  Matrix grad = output_grad;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    auto& layer = layers_[k];
    activation_backward(layer.activation, cached_outputs_[k].data(), grad.data());
    Matrix wg = matmul_at_b(cached_inputs_[k], grad);
    auto wdst = layer.weight_grad.data();
    auto wsrc = wg.data();
    for (std::size_t i = 0; i < wdst.size(); ++i) wdst[i] += wsrc[i];
    for (std::size_t r = 0; r < grad.rows(); ++r) {
      auto row = grad.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) layer.bias_grad[c] += row[c];
    }
    grad = matmul_a_bt(grad, layer.weight);
  }
  return grad;
}

void MLP::zero_grad() {
  for (auto& layer : layers_) {
    layer.weight_grad.fill(0.0);
    std::fill(layer.bias_grad.begin(), layer.bias_grad.end(), 0.0);
  }
}

void MLP::sgd_step(double learning_rate, std::optional<double> max_grad_norm) {
  auto params = parameters();
  sgd_update(params, learning_rate, max_grad_norm);
}

std::vector<ParamView> MLP::parameters() {
  std::vector<ParamView> out;
  out.reserve(layers_.size() * 2);
  for (auto& layer : layers_) {
    out.push_back({layer.weight.data(), layer.weight_grad.data()});
    out.push_back({layer.bias, layer.bias_grad});
  }
  return out;
}

std::size_t MLP::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.weight.size() + layer.bias.size();
  return n;
}

std::vector<double> MLP::flat_parameters() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto& layer : layers_) {
    out.insert(out.end(), layer.weight.data().begin(), layer.weight.data().end());
    out.insert(out.end(), layer.bias.begin(), layer.bias.end());
  }
  return out;
}

void MLP::set_flat_parameters(std::span<const double> values) {
  if (values.size() != parameter_count()) {
    throw DimensionError("MLP parameter count: expected " + std::to_string(parameter_count()) +
                         ", got " + std::to_string(values.size()));
  }
  auto it = values.begin();
  for (auto& layer : layers_) {
    auto w = layer.weight.data();
    std::copy(it, it + static_cast<std::ptrdiff_t>(w.size()), w.begin());
    it += static_cast<std::ptrdiff_t>(w.size());
    std::copy(it, it + static_cast<std::ptrdiff_t>(layer.bias.size()), layer.bias.begin());
    it += static_cast<std::ptrdiff_t>(layer.bias.size());
  }
  has_cache_ = false;
}

bool MLP::same_architecture(const MLP& other) const {
  if (dims_ != other.dims_) return false;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    if (layers_[k].activation != other.layers_[k].activation) return false;
  }
  return true;
}

void copy_params(const MLP& src, MLP& dst, double tau) {
  if (!src.same_architecture(dst)) {
    throw DimensionError("copy_params: architecture mismatch");
  }
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw ArgumentError("copy_params: tau must lie in [0, 1], got " + std::to_string(tau));
  }
  for (std::size_t k = 0; k < src.num_layers(); ++k) {
    const auto& s = src.layers()[k];
    auto& d = dst.layers()[k];
    auto sw = s.weight.data();
    auto dw = d.weight.data();
    for (std::size_t i = 0; i < dw.size(); ++i) dw[i] = tau * sw[i] + (1.0 - tau) * dw[i];
    for (std::size_t i = 0; i < d.bias.size(); ++i) {
      d.bias[i] = tau * s.bias[i] + (1.0 - tau) * d.bias[i];
    }
  }
}

}  // namespace dmfrl

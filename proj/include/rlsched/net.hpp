#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "rlsched/errors.hpp"
#include "rlsched/rng.hpp"

namespace rlsched {

enum class HiddenActivation : std::uint8_t { relu = 0 };
enum class OutputActivation : std::uint8_t { softmax = 0, linear = 1 };

// Feed-forward topology: layer_sizes = {input, hidden..., output}. Parameters
// are flattened in canonical order, per layer the row-major weight matrix
// (out x in) followed by the bias vector.
struct NetSpec {
  std::vector<int> layer_sizes;
  HiddenActivation hidden_activation = HiddenActivation::relu;
  OutputActivation output_activation = OutputActivation::softmax;

  bool operator==(const NetSpec&) const = default;

  void validate() const {
    if (layer_sizes.size() < 2)
      throw ContractError("NetSpec needs at least input and output sizes");
    for (const int s : layer_sizes)
      if (s < 1) throw ContractError("NetSpec layer sizes must be positive");
  }

  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }
  std::size_t num_layers() const { return layer_sizes.size() - 1; }

  std::size_t param_count() const {
    std::size_t count = 0;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
      count += static_cast<std::size_t>(layer_sizes[l + 1]) *
                   static_cast<std::size_t>(layer_sizes[l]) +
               static_cast<std::size_t>(layer_sizes[l + 1]);
    return count;
  }

  std::size_t weight_offset(std::size_t layer) const {
    std::size_t pos = 0;
    for (std::size_t l = 0; l < layer; ++l)
      pos += static_cast<std::size_t>(layer_sizes[l + 1]) *
                 static_cast<std::size_t>(layer_sizes[l]) +
             static_cast<std::size_t>(layer_sizes[l + 1]);
    return pos;
  }

  std::size_t bias_offset(std::size_t layer) const {
    return weight_offset(layer) + static_cast<std::size_t>(layer_sizes[layer + 1]) *
                                      static_cast<std::size_t>(layer_sizes[layer]);
  }
};

using ParamVector = std::vector<double>;
using GradVector = std::vector<double>;

namespace detail {

using RowMajorMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<const RowMajorMatrix> weight_view(const NetSpec& spec,
                                                    const ParamVector& params,
                                                    std::size_t layer) {
  return {params.data() + spec.weight_offset(layer), spec.layer_sizes[layer + 1],
          spec.layer_sizes[layer]};
}

inline Eigen::Map<RowMajorMatrix> weight_view(const NetSpec& spec, ParamVector& params,
                                              std::size_t layer) {
  return {params.data() + spec.weight_offset(layer), spec.layer_sizes[layer + 1],
          spec.layer_sizes[layer]};
}

inline Eigen::Map<const Eigen::VectorXd> bias_view(const NetSpec& spec,
                                                   const ParamVector& params,
                                                   std::size_t layer) {
  return {params.data() + spec.bias_offset(layer), spec.layer_sizes[layer + 1]};
}

inline Eigen::Map<Eigen::VectorXd> bias_view(const NetSpec& spec, ParamVector& params,
                                             std::size_t layer) {
  return {params.data() + spec.bias_offset(layer), spec.layer_sizes[layer + 1]};
}

inline Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const double peak = logits.col(c).maxCoeff();
    out.col(c) = (logits.col(c).array() - peak).exp();
    out.col(c) /= out.col(c).sum();
  }
  return out;
}

}  // namespace detail

// Weights drawn uniformly from [-1/sqrt(fan_in), 1/sqrt(fan_in)] in canonical
// order; biases start at zero.
inline ParamVector init_params(const NetSpec& spec, std::uint64_t seed) {
  spec.validate();
  ParamVector params(spec.param_count(), 0.0);
  Rng rng(seed);
  std::size_t pos = 0;
  for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
    const int fan_in = spec.layer_sizes[l];
    const int fan_out = spec.layer_sizes[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (int k = 0; k < fan_out * fan_in; ++k) params[pos++] = rng.uniform(-bound, bound);
    pos += static_cast<std::size_t>(fan_out);
  }
  return params;
}

// Activation record from a forward pass; activations[0] is the input batch
// and activations[num_layers] the output.
struct Tape {
  std::vector<Eigen::MatrixXd> activations;
};

// Batched forward pass, one sample per column.
inline Eigen::MatrixXd forward(const NetSpec& spec, const ParamVector& params,
                               const Eigen::MatrixXd& input, Tape* tape = nullptr) {
  spec.validate();
  if (input.rows() != spec.input_size())
    throw ContractError("forward: input rows do not match spec input size");
  if (params.size() != spec.param_count())
    throw ContractError("forward: parameter vector does not match spec");
  if (tape) {
    tape->activations.clear();
    tape->activations.push_back(input);
  }
  Eigen::MatrixXd a = input;
  const std::size_t layers = spec.num_layers();
  for (std::size_t l = 0; l < layers; ++l) {
    // Copy the mapped weights into Eigen-owned (aligned) storage before the
    // product: kernel results on unaligned views depend on the runtime heap
    // pointer, which would break bit-level reproducibility.
    const detail::RowMajorMatrix w = detail::weight_view(spec, params, l);
    Eigen::MatrixXd z(w.rows(), a.cols());
    z.noalias() = w * a;
    z.colwise() += detail::bias_view(spec, params, l);
    if (l + 1 < layers)
      a = z.cwiseMax(0.0);
    else if (spec.output_activation == OutputActivation::softmax)
      a = detail::softmax_columns(z);
    else
      a = std::move(z);
    if (tape) tape->activations.push_back(a);
  }
  return a;
}

inline std::vector<double> forward(const NetSpec& spec, const ParamVector& params,
                                   std::span<const double> input, Tape* tape = nullptr) {
  const Eigen::Map<const Eigen::VectorXd> x(input.data(),
                                            static_cast<Eigen::Index>(input.size()));
  const Eigen::MatrixXd y = forward(spec, params, Eigen::MatrixXd(x), tape);
  return {y.data(), y.data() + y.size()};
}

namespace detail {

// Backward pass for the scalar sum over batch columns of
// <output_col, output_grad_col>. Fills parameter gradients in canonical order
// when param_grad is non-null and input gradients when input_grad is non-null.
inline void backward_impl(const NetSpec& spec, const ParamVector& params, const Tape& tape,
                          const Eigen::MatrixXd& output_grad, GradVector* param_grad,
                          Eigen::MatrixXd* input_grad) {
  const std::size_t layers = spec.num_layers();
  if (tape.activations.size() != layers + 1)
    throw ContractError("backward: tape does not match spec");
  if (output_grad.rows() != spec.output_size() ||
      output_grad.cols() != tape.activations[0].cols())
    throw ContractError("backward: output_grad shape mismatch");
  if (param_grad) param_grad->assign(spec.param_count(), 0.0);

  const Eigen::MatrixXd& y = tape.activations[layers];
  Eigen::MatrixXd gz;
  if (spec.output_activation == OutputActivation::softmax) {
    // Softmax Jacobian-vector product: gz = y .* (g - <y, g> per column).
    const Eigen::RowVectorXd dots = (y.array() * output_grad.array()).colwise().sum();
    gz = (y.array() * (output_grad.rowwise() - dots).array()).matrix();
  } else {
    gz = output_grad;
  }

  // Products and reductions run on Eigen-owned buffers only; the unaligned
  // parameter views are touched by plain elementwise copies, which keeps the
  // arithmetic independent of heap pointer alignment.
  for (std::size_t l = layers; l-- > 0;) {
    const Eigen::MatrixXd& a_prev = tape.activations[l];
    if (param_grad) {
      const RowMajorMatrix gw = gz * a_prev.transpose();
      const Eigen::VectorXd gb = gz.rowwise().sum();
      weight_view(spec, *param_grad, l) = gw;
      bias_view(spec, *param_grad, l) = gb;
    }
    if (l > 0 || input_grad) {
      const RowMajorMatrix w = weight_view(spec, params, l);
      Eigen::MatrixXd ga = w.transpose() * gz;
      if (l > 0)
        gz = (a_prev.array() > 0.0).select(ga, 0.0);
      else
        *input_grad = std::move(ga);
    }
  }
}

}  // namespace detail

struct BackwardResult {
  GradVector param_grad;
  Eigen::MatrixXd input_grad;
};

inline BackwardResult backward(const NetSpec& spec, const ParamVector& params,
                               const Tape& tape, const Eigen::MatrixXd& output_grad) {
  BackwardResult result;
  detail::backward_impl(spec, params, tape, output_grad, &result.param_grad,
                        &result.input_grad);
  return result;
}

inline GradVector backward_params(const NetSpec& spec, const ParamVector& params,
                                  const Tape& tape, const Eigen::MatrixXd& output_grad) {
  GradVector grad;
  detail::backward_impl(spec, params, tape, output_grad, &grad, nullptr);
  return grad;
}

inline Eigen::MatrixXd backward_input(const NetSpec& spec, const ParamVector& params,
                                      const Tape& tape, const Eigen::MatrixXd& output_grad) {
  Eigen::MatrixXd input_grad;
  detail::backward_impl(spec, params, tape, output_grad, nullptr, &input_grad);
  return input_grad;
}

inline std::pair<GradVector, std::vector<double>> backward(const NetSpec& spec,
                                                           const ParamVector& params,
                                                           const Tape& tape,
                                                           std::span<const double> output_grad) {
  const Eigen::Map<const Eigen::VectorXd> g(output_grad.data(),
                                            static_cast<Eigen::Index>(output_grad.size()));
  auto result = backward(spec, params, tape, Eigen::MatrixXd(g));
  return {std::move(result.param_grad),
          std::vector<double>(result.input_grad.data(),
                              result.input_grad.data() + result.input_grad.size())};
}

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::int64_t step_count = 0;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

inline AdamState make_adam(std::size_t num_params, double learning_rate) {
  AdamState adam;
  adam.first_moment.assign(num_params, 0.0);
  adam.second_moment.assign(num_params, 0.0);
  adam.learning_rate = learning_rate;
  return adam;
}

// Standard Adam update with bias correction. Written as a scalar loop; each
// element's arithmetic is then identical regardless of buffer alignment.
inline void adam_step(ParamVector& params, const GradVector& grad, AdamState& adam) {
  if (grad.size() != params.size() || adam.first_moment.size() != params.size() ||
      adam.second_moment.size() != params.size())
    throw ContractError("adam_step: length mismatch");
  adam.step_count += 1;
  const double c1 = 1.0 - std::pow(adam.beta1, static_cast<double>(adam.step_count));
  const double c2 = 1.0 - std::pow(adam.beta2, static_cast<double>(adam.step_count));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    double& m = adam.first_moment[i];
    double& v = adam.second_moment[i];
    m = adam.beta1 * m + (1.0 - adam.beta1) * g;
    v = adam.beta2 * v + (1.0 - adam.beta2) * (g * g);
    params[i] -= adam.learning_rate * (m / c1) / (std::sqrt(v / c2) + adam.epsilon);
  }
}

// Empirical Fisher diagonal: mean of elementwise squared gradient samples.
inline std::vector<double> estimate_fisher(std::span<const GradVector> samples) {
  if (samples.empty()) throw ContractError("estimate_fisher needs at least one sample");
  const std::size_t n = samples[0].size();
  std::vector<double> fisher(n, 0.0);
  for (const GradVector& g : samples) {
    if (g.size() != n) throw ContractError("estimate_fisher: sample length mismatch");
    for (std::size_t i = 0; i < n; ++i) fisher[i] += g[i] * g[i];
  }
  const double inv = 1.0 / static_cast<double>(samples.size());
  for (double& f : fisher) f *= inv;
  return fisher;
}

}  // namespace rlsched

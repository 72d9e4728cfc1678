#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "dyno/tensor.hpp"

// Forward kernels with exact FLOP accounting.
//
// Convention table (all counts are exact integers):
//   multiply-accumulate        2 FLOPs
//   bias add                   1 / element
//   relu                       1 / element
//   softmax over n             4n - 1   (n subtract, n exp, n-1 add, n div)
//   sigmoid over n             3n       (exp, add, div per element)
//   embedding lookup           0        (memory move)
//   pairwise box IoU           14       (see boxes.hpp)
//   control flow (argmax picks, threshold tests, routing) is not metered;
//   only tensor arithmetic is.

namespace dyno {

using flops_t = std::uint64_t;

inline constexpr flops_t dense_flops(std::size_t in, std::size_t out, bool bias) {
  return 2ULL * in * out + (bias ? out : 0ULL);
}
inline constexpr flops_t relu_flops(std::size_t n) { return n; }
inline constexpr flops_t softmax_flops(std::size_t n) { return 4ULL * n - 1; }
inline constexpr flops_t sigmoid_flops(std::size_t n) { return 3ULL * n; }

// Floor added inside log() so perfect predictions stay finite.
inline constexpr double kCrossEntropyFloor = 1e-12;

struct ForwardResult {
  Tensor output;
  flops_t flops = 0;
};

// output = W*x (+ b). W is (out_dim x in_dim), x a vector of length in_dim.
inline ForwardResult dense_forward(const LayerSpec& layer, const Tensor& weights,
                                   const Tensor* bias, const Tensor& input) {
  layer.validate();
  if (layer.kind != LayerSpec::Kind::Dense)
    throw std::invalid_argument("dense_forward: layer '" + layer.name + "' is not dense");
  if (weights.shape.size() != 2 || weights.rows() != layer.out_dim ||
      weights.cols() != layer.in_dim)
    throw std::invalid_argument("dense_forward: layer '" + layer.name + "' expects weights (" +
                                std::to_string(layer.out_dim) + "x" +
                                std::to_string(layer.in_dim) + "), got " + shape_str(weights));
  if (!input.is_vector() || input.numel() != layer.in_dim)
    throw std::invalid_argument("dense_forward: layer '" + layer.name + "' expects input length " +
                                std::to_string(layer.in_dim) + ", got " + shape_str(input));
  if (layer.has_bias) {
    if (bias == nullptr || !bias->is_vector() || bias->numel() != layer.out_dim)
      throw std::invalid_argument("dense_forward: layer '" + layer.name + "' expects bias length " +
                                  std::to_string(layer.out_dim));
  }

  Tensor out({layer.out_dim});
  for (std::size_t r = 0; r < layer.out_dim; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < layer.in_dim; ++c) acc += weights.at2(r, c) * input.at(c);
    if (layer.has_bias) acc += bias->at(r);
    out.at(r) = acc;
  }
  return {std::move(out), dense_flops(layer.in_dim, layer.out_dim, layer.has_bias)};
}

inline ForwardResult relu_forward(const Tensor& input) {
  if (input.numel() == 0) throw std::invalid_argument("relu: empty input");
  Tensor out = input;
  for (double& v : out.data) v = std::max(0.0, v);
  return {std::move(out), relu_flops(input.numel())};
}

// Max-subtracted softmax. Output sums to 1 within 1e-12 and is strictly
// positive for finite inputs.
inline ForwardResult softmax_forward(const Tensor& input) {
  if (input.numel() == 0) throw std::invalid_argument("softmax: empty input");
  Tensor out = input;
  double mx = out.data[0];
  for (double v : out.data) mx = std::max(mx, v);
  double sum = 0.0;
  for (double& v : out.data) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : out.data) v /= sum;
  return {std::move(out), softmax_flops(input.numel())};
}

inline ForwardResult activation_forward(LayerSpec::Kind kind, const Tensor& input) {
  if (kind == LayerSpec::Kind::Relu) return relu_forward(input);
  if (kind == LayerSpec::Kind::Softmax) return softmax_forward(input);
  throw std::invalid_argument("activation_forward: kind must be relu or softmax");
}

inline ForwardResult sigmoid_forward(const Tensor& input) {
  if (input.numel() == 0) throw std::invalid_argument("sigmoid: empty input");
  Tensor out = input;
  for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  return {std::move(out), sigmoid_flops(input.numel())};
}

// -ln(probs[target] + floor); non-negative for probability vectors.
inline double cross_entropy(const Tensor& probs, std::size_t target_index) {
  if (!probs.is_vector() || probs.numel() == 0)
    throw std::invalid_argument("cross_entropy: probs must be a nonempty vector");
  if (target_index >= probs.numel())
    throw std::invalid_argument("cross_entropy: target index " + std::to_string(target_index) +
                                " out of range for " + std::to_string(probs.numel()) + " classes");
  return -std::log(probs.at(target_index) + kCrossEntropyFloor);
}

// Lowest index wins ties.
inline std::size_t argmax(const Tensor& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.numel(); ++i)
    if (v.at(i) > v.at(best)) best = i;
  return best;
}

inline double max_value(const Tensor& v) { return v.at(argmax(v)); }

// p <- p - lr * g, elementwise over matched tensor lists.
inline void sgd_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, double lr) {
  if (lr <= 0.0) throw std::invalid_argument("sgd_step: lr must be > 0");
  if (params.size() != grads.size())
    throw std::invalid_argument("sgd_step: params/grads count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].same_shape(grads[i]))
      throw std::invalid_argument("sgd_step: shape mismatch at parameter " + std::to_string(i));
    for (std::size_t j = 0; j < params[i].numel(); ++j)
      params[i].at(j) -= lr * grads[i].at(j);
  }
}

}  // namespace dyno

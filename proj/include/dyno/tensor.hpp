#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace dyno {

// Dense double-precision array, row-major. The substrate for model
// parameters, inputs and gradients.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
    data.assign(numel_of(shape), 0.0);
  }

  Tensor(std::vector<std::size_t> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {
    if (numel_of(shape) != data.size())
      throw std::invalid_argument("Tensor: shape/data size mismatch");
  }

  static std::size_t numel_of(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t d : s) {
      if (d == 0) throw std::invalid_argument("Tensor: zero dimension");
      n *= d;
    }
    return n;
  }

  static Tensor vector(std::vector<double> d) {
    std::size_t n = d.size();
    return Tensor({n}, std::move(d));
  }

  static Tensor zeros(std::vector<std::size_t> s) { return Tensor(std::move(s)); }

  std::size_t numel() const { return data.size(); }
  bool is_vector() const { return shape.size() == 1; }
  bool is_scalar() const { return data.size() == 1; }

  std::size_t rows() const { return shape.at(0); }
  std::size_t cols() const { return shape.at(1); }

  double& at(std::size_t i) { return data[i]; }
  double at(std::size_t i) const { return data[i]; }
  double& at2(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at2(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape == b.shape && a.data == b.data;
  }
};

inline std::string shape_str(const Tensor& t) {
  std::string s = "(";
  for (std::size_t i = 0; i < t.shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(t.shape[i]);
  }
  return s + ")";
}

// Declarative layer description. Dense layers carry explicit dimensions;
// activations must preserve them.
struct LayerSpec {
  enum class Kind { Dense, Relu, Softmax, EmbeddingLookup };

  Kind kind = Kind::Dense;
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  bool has_bias = true;
  std::string name;

  void validate() const {
    switch (kind) {
      case Kind::Dense:
        if (in_dim < 1 || out_dim < 1)
          throw std::invalid_argument("LayerSpec '" + name +
                                      "': dense requires in_dim, out_dim >= 1");
        break;
      case Kind::Relu:
      case Kind::Softmax:
        if (in_dim != out_dim)
          throw std::invalid_argument("LayerSpec '" + name +
                                      "': activation requires in_dim == out_dim");
        break;
      case Kind::EmbeddingLookup:
        if (in_dim < 1 || out_dim < 1)
          throw std::invalid_argument("LayerSpec '" + name +
                                      "': embedding requires vocab, dim >= 1");
        break;
    }
  }
};

}  // namespace dyno

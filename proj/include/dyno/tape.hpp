#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dyno/kernels.hpp"
#include "dyno/tensor.hpp"

// Reverse-mode autodiff over a flat operation tape. Forward math goes through
// the same kernels the inference engines use, so replaying a tape reproduces
// recorded values bit-exactly.

namespace dyno {

struct ValueId {
  std::int32_t v = -1;
  bool valid() const { return v >= 0; }
};

class Tape;

// Gradients of one scalar output with respect to every recorded value.
class GradMap {
 public:
  const Tensor& at(ValueId id) const { return grads_.at(static_cast<std::size_t>(id.v)); }

 private:
  friend class Tape;
  std::vector<Tensor> grads_;
};

class Tape {
  enum class Op {
    Leaf,
    MatVec,
    Add,
    Relu,
    Softmax,
    Sigmoid,
    Pick,
    MaxElem,
    Sum,
    Scale,
    AddConst,
    Concat,
    Gather,
    CrossEntropy,
    SoftCrossEntropy,
  };

  struct Node {
    Op op;
    std::vector<std::int32_t> parents;
    Tensor value;
    std::size_t index = 0;             // Pick target / recorded argmax
    double c = 0.0;                    // Scale / AddConst constant
    std::vector<std::size_t> indices;  // Gather
    std::vector<double> soft;          // SoftCrossEntropy target distribution
  };

 public:
  ValueId leaf(Tensor t) { return push({Op::Leaf, {}, std::move(t)}); }

  // y = W*x with W a (out x in) matrix leaf and x a vector.
  ValueId matvec(ValueId w, ValueId x) {
    const Tensor& W = val(w);
    const Tensor& X = val(x);
    if (W.shape.size() != 2 || !X.is_vector() || W.cols() != X.numel())
      throw std::invalid_argument("tape matvec: shapes " + shape_str(W) + " * " + shape_str(X));
    LayerSpec ls{LayerSpec::Kind::Dense, W.cols(), W.rows(), false, "tape"};
    auto fwd = dense_forward(ls, W, nullptr, X);
    flops_ += fwd.flops;
    return push({Op::MatVec, {w.v, x.v}, std::move(fwd.output)});
  }

  ValueId add(ValueId a, ValueId b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (!A.same_shape(B))
      throw std::invalid_argument("tape add: shape mismatch " + shape_str(A) + " vs " + shape_str(B));
    Tensor out = A;
    for (std::size_t i = 0; i < out.numel(); ++i) out.at(i) += B.at(i);
    flops_ += A.numel();
    return push({Op::Add, {a.v, b.v}, std::move(out)});
  }

  ValueId relu(ValueId x) {
    auto fwd = relu_forward(val(x));
    flops_ += fwd.flops;
    return push({Op::Relu, {x.v}, std::move(fwd.output)});
  }

  ValueId softmax(ValueId x) {
    auto fwd = softmax_forward(val(x));
    flops_ += fwd.flops;
    return push({Op::Softmax, {x.v}, std::move(fwd.output)});
  }

  ValueId sigmoid(ValueId x) {
    auto fwd = sigmoid_forward(val(x));
    flops_ += fwd.flops;
    return push({Op::Sigmoid, {x.v}, std::move(fwd.output)});
  }

  ValueId pick(ValueId x, std::size_t i) {
    const Tensor& X = val(x);
    if (i >= X.numel()) throw std::invalid_argument("tape pick: index out of range");
    Node n{Op::Pick, {x.v}, Tensor::vector({X.at(i)})};
    n.index = i;
    return push(std::move(n));
  }

  // Scalar max; gradient flows to the recorded argmax (lowest index on ties).
  ValueId max_element(ValueId x) {
    const Tensor& X = val(x);
    std::size_t i = argmax(X);
    Node n{Op::MaxElem, {x.v}, Tensor::vector({X.at(i)})};
    n.index = i;
    return push(std::move(n));
  }

  ValueId sum(ValueId x) {
    const Tensor& X = val(x);
    double s = 0.0;
    for (double v : X.data) s += v;
    flops_ += X.numel() >= 1 ? X.numel() - 1 : 0;
    return push({Op::Sum, {x.v}, Tensor::vector({s})});
  }

  ValueId scale(ValueId x, double c) {
    Tensor out = val(x);
    for (double& v : out.data) v *= c;
    flops_ += out.numel();
    Node n{Op::Scale, {x.v}, std::move(out)};
    n.c = c;
    return push(std::move(n));
  }

  ValueId add_const(ValueId x, double c) {
    Tensor out = val(x);
    for (double& v : out.data) v += c;
    flops_ += out.numel();
    Node n{Op::AddConst, {x.v}, std::move(out)};
    n.c = c;
    return push(std::move(n));
  }

  ValueId neg(ValueId x) { return scale(x, -1.0); }

  ValueId concat(const std::vector<ValueId>& parts) {
    if (parts.empty()) throw std::invalid_argument("tape concat: empty");
    std::vector<double> out;
    std::vector<std::int32_t> ps;
    for (ValueId p : parts) {
      const Tensor& t = val(p);
      out.insert(out.end(), t.data.begin(), t.data.end());
      ps.push_back(p.v);
    }
    return push({Op::Concat, std::move(ps), Tensor::vector(std::move(out))});
  }

  ValueId gather(ValueId x, std::vector<std::size_t> idx) {
    const Tensor& X = val(x);
    std::vector<double> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) {
      if (i >= X.numel()) throw std::invalid_argument("tape gather: index out of range");
      out.push_back(X.at(i));
    }
    Node n{Op::Gather, {x.v}, Tensor::vector(std::move(out))};
    n.indices = std::move(idx);
    return push(std::move(n));
  }

  ValueId cross_entropy(ValueId probs, std::size_t target) {
    double loss = dyno::cross_entropy(val(probs), target);
    flops_ += 3;
    Node n{Op::CrossEntropy, {probs.v}, Tensor::vector({loss})};
    n.index = target;
    return push(std::move(n));
  }

  // -sum_i q_i * ln(p_i + floor) for a fixed target distribution q.
  ValueId soft_cross_entropy(ValueId probs, std::vector<double> q) {
    const Tensor& P = val(probs);
    if (q.size() != P.numel())
      throw std::invalid_argument("tape soft_cross_entropy: target size mismatch");
    double loss = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i)
      loss -= q[i] * std::log(P.at(i) + kCrossEntropyFloor);
    flops_ += 4 * P.numel();
    Node n{Op::SoftCrossEntropy, {probs.v}, Tensor::vector({loss})};
    n.soft = std::move(q);
    return push(std::move(n));
  }

  const Tensor& val(ValueId id) const {
    if (!id.valid() || static_cast<std::size_t>(id.v) >= nodes_.size())
      throw std::invalid_argument("tape: invalid value id");
    return nodes_[static_cast<std::size_t>(id.v)].value;
  }

  double scalar(ValueId id) const {
    const Tensor& t = val(id);
    if (!t.is_scalar()) throw std::logic_error("tape scalar: value is not scalar");
    return t.at(0);
  }

  flops_t flops() const { return flops_; }
  std::size_t size() const { return nodes_.size(); }

  // Gradients of a scalar output with respect to every recorded value.
  GradMap reverse_grad(ValueId output) const {
    if (!output.valid() || static_cast<std::size_t>(output.v) >= nodes_.size())
      throw std::invalid_argument("reverse_grad: invalid output id");
    if (!nodes_[static_cast<std::size_t>(output.v)].value.is_scalar())
      throw std::logic_error("reverse_grad: output must be scalar");

    GradMap gm;
    gm.grads_.reserve(nodes_.size());
    for (const Node& n : nodes_) gm.grads_.push_back(Tensor::zeros(n.value.shape));
    gm.grads_[static_cast<std::size_t>(output.v)].at(0) = 1.0;

    for (std::size_t k = nodes_.size(); k-- > 0;) {
      const Node& n = nodes_[k];
      const Tensor& g = gm.grads_[k];
      bool live = false;
      for (double v : g.data)
        if (v != 0.0) {
          live = true;
          break;
        }
      if (!live) continue;

      switch (n.op) {
        case Op::Leaf:
          break;
        case Op::MatVec: {
          const Tensor& W = nodes_[n.parents[0]].value;
          const Tensor& X = nodes_[n.parents[1]].value;
          Tensor& dW = gm.grads_[n.parents[0]];
          Tensor& dX = gm.grads_[n.parents[1]];
          for (std::size_t r = 0; r < W.rows(); ++r)
            for (std::size_t c = 0; c < W.cols(); ++c) {
              dW.at2(r, c) += g.at(r) * X.at(c);
              dX.at(c) += g.at(r) * W.at2(r, c);
            }
          break;
        }
        case Op::Add: {
          for (int p = 0; p < 2; ++p) {
            Tensor& d = gm.grads_[n.parents[p]];
            for (std::size_t i = 0; i < g.numel(); ++i) d.at(i) += g.at(i);
          }
          break;
        }
        case Op::Relu: {
          const Tensor& X = nodes_[n.parents[0]].value;
          Tensor& d = gm.grads_[n.parents[0]];
          // Subgradient 0 at exactly 0.
          for (std::size_t i = 0; i < g.numel(); ++i)
            if (X.at(i) > 0.0) d.at(i) += g.at(i);
          break;
        }
        case Op::Softmax: {
          const Tensor& Y = n.value;
          Tensor& d = gm.grads_[n.parents[0]];
          double dot = 0.0;
          for (std::size_t i = 0; i < g.numel(); ++i) dot += g.at(i) * Y.at(i);
          for (std::size_t i = 0; i < g.numel(); ++i) d.at(i) += Y.at(i) * (g.at(i) - dot);
          break;
        }
        case Op::Sigmoid: {
          const Tensor& Y = n.value;
          Tensor& d = gm.grads_[n.parents[0]];
          for (std::size_t i = 0; i < g.numel(); ++i)
            d.at(i) += g.at(i) * Y.at(i) * (1.0 - Y.at(i));
          break;
        }
        case Op::Pick:
        case Op::MaxElem: {
          gm.grads_[n.parents[0]].at(n.index) += g.at(0);
          break;
        }
        case Op::Sum: {
          Tensor& d = gm.grads_[n.parents[0]];
          for (std::size_t i = 0; i < d.numel(); ++i) d.at(i) += g.at(0);
          break;
        }
        case Op::Scale: {
          Tensor& d = gm.grads_[n.parents[0]];
          for (std::size_t i = 0; i < g.numel(); ++i) d.at(i) += n.c * g.at(i);
          break;
        }
        case Op::AddConst: {
          Tensor& d = gm.grads_[n.parents[0]];
          for (std::size_t i = 0; i < g.numel(); ++i) d.at(i) += g.at(i);
          break;
        }
        case Op::Concat: {
          std::size_t off = 0;
          for (std::int32_t pv : n.parents) {
            Tensor& d = gm.grads_[pv];
            for (std::size_t i = 0; i < d.numel(); ++i) d.at(i) += g.at(off + i);
            off += d.numel();
          }
          break;
        }
        case Op::Gather: {
          Tensor& d = gm.grads_[n.parents[0]];
          for (std::size_t j = 0; j < n.indices.size(); ++j) d.at(n.indices[j]) += g.at(j);
          break;
        }
        case Op::CrossEntropy: {
          const Tensor& P = nodes_[n.parents[0]].value;
          gm.grads_[n.parents[0]].at(n.index) +=
              g.at(0) * (-1.0 / (P.at(n.index) + kCrossEntropyFloor));
          break;
        }
        case Op::SoftCrossEntropy: {
          const Tensor& P = nodes_[n.parents[0]].value;
          Tensor& d = gm.grads_[n.parents[0]];
          for (std::size_t i = 0; i < n.soft.size(); ++i)
            d.at(i) += g.at(0) * (-n.soft[i] / (P.at(i) + kCrossEntropyFloor));
          break;
        }
      }
    }
    return gm;
  }

  // Recompute every node from the leaves and compare bit-exactly against the
  // recorded values.
  bool replay_matches() const {
    std::vector<Tensor> re;
    re.reserve(nodes_.size());
    for (const Node& n : nodes_) {
      Tensor out;
      switch (n.op) {
        case Op::Leaf:
          out = n.value;
          break;
        case Op::MatVec: {
          const Tensor& W = re[n.parents[0]];
          const Tensor& X = re[n.parents[1]];
          LayerSpec ls{LayerSpec::Kind::Dense, W.cols(), W.rows(), false, "replay"};
          out = dense_forward(ls, W, nullptr, X).output;
          break;
        }
        case Op::Add: {
          out = re[n.parents[0]];
          const Tensor& B = re[n.parents[1]];
          for (std::size_t i = 0; i < out.numel(); ++i) out.at(i) += B.at(i);
          break;
        }
        case Op::Relu:
          out = relu_forward(re[n.parents[0]]).output;
          break;
        case Op::Softmax:
          out = softmax_forward(re[n.parents[0]]).output;
          break;
        case Op::Sigmoid:
          out = sigmoid_forward(re[n.parents[0]]).output;
          break;
        case Op::Pick:
          out = Tensor::vector({re[n.parents[0]].at(n.index)});
          break;
        case Op::MaxElem:
          out = Tensor::vector({max_value(re[n.parents[0]])});
          break;
        case Op::Sum: {
          double s = 0.0;
          for (double v : re[n.parents[0]].data) s += v;
          out = Tensor::vector({s});
          break;
        }
        case Op::Scale: {
          out = re[n.parents[0]];
          for (double& v : out.data) v *= n.c;
          break;
        }
        case Op::AddConst: {
          out = re[n.parents[0]];
          for (double& v : out.data) v += n.c;
          break;
        }
        case Op::Concat: {
          std::vector<double> d;
          for (std::int32_t pv : n.parents)
            d.insert(d.end(), re[pv].data.begin(), re[pv].data.end());
          out = Tensor::vector(std::move(d));
          break;
        }
        case Op::Gather: {
          std::vector<double> d;
          for (std::size_t i : n.indices) d.push_back(re[n.parents[0]].at(i));
          out = Tensor::vector(std::move(d));
          break;
        }
        case Op::CrossEntropy:
          out = Tensor::vector({dyno::cross_entropy(re[n.parents[0]], n.index)});
          break;
        case Op::SoftCrossEntropy: {
          double loss = 0.0;
          const Tensor& P = re[n.parents[0]];
          for (std::size_t i = 0; i < n.soft.size(); ++i)
            loss -= n.soft[i] * std::log(P.at(i) + kCrossEntropyFloor);
          out = Tensor::vector({loss});
          break;
        }
      }
      if (!(out == n.value)) return false;
      re.push_back(std::move(out));
    }
    return true;
  }

 private:
  ValueId push(Node n) {
    if (!n.value.all_finite())
      throw std::runtime_error("tape: non-finite value produced by operation");
    nodes_.push_back(std::move(n));
    return ValueId{static_cast<std::int32_t>(nodes_.size() - 1)};
  }

  std::vector<Node> nodes_;
  flops_t flops_ = 0;
};

}  // namespace dyno

#pragma once

// Tape-based reverse-mode differentiation. Gradients are emitted as ordinary
// nodes on the same tape, so any scalar function of a gradient can itself be
// differentiated (double backprop).

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gplab/error.hpp"
#include "gplab/tensor.hpp"

namespace gplab::ad {

enum class Op : std::uint8_t {
  Leaf,
  Constant,
  StopGradient,
  Add,
  Sub,
  Mul,
  Scale,      // x * a
  AddScalar,  // x + a
  MatMul,     // op(A) op(B); a = transpose A, b = transpose B
  Permute,    // attr = permutation
  Reshape,    // attr = new shape
  BroadcastTo,
  SumTo,
  Pow,        // x^a
  Sqrt,
  Exp,
  Log,
  MaxScalar,  // max(x, a)
  Relu,
  LeakyRelu,  // slope a
  Tanh,
  Softplus,
  Sigmoid,
  Softmax,    // over the last axis
  StepMask,   // x > a ? 1 : b; zero derivative
  Conv1d,           // x[B,C,L], w[O,C,K] -> [B,O,L-K+1]
  Conv1dInputGrad,  // g[B,O,L-K+1], w[O,C,K] -> [B,C,L]
  Conv1dWeightGrad, // x[B,C,L], g[B,O,L-K+1] -> [O,C,K]
  Concat,     // attr[0] = axis
  Slice,      // attr = {axis, begin, end}
  Pad,        // attr = {axis, before, after}
  RowNorm,    // sqrt(sum over last axis of x^2 + a)
};

const char* op_name(Op op);

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class NodeRef {
 public:
  NodeRef() = default;
  NodeRef(Tape* tape, std::uint32_t index) : tape_(tape), index_(index) {}

  bool valid() const noexcept { return tape_ != nullptr; }
  Tape& tape() const;
  std::size_t index() const noexcept { return index_; }
  const Shape& shape() const;
  const Tensor& value() const;

  friend bool operator==(const NodeRef& a, const NodeRef& b) {
    return a.tape_ == b.tape_ && a.index_ == b.index_;
  }

 private:
  Tape* tape_ = nullptr;
  std::uint32_t index_ = 0;
};

struct Node {
  Op op = Op::Constant;
  std::vector<std::uint32_t> inputs;
  double a = 0.0;
  double b = 0.0;
  Shape attr;
  std::string name;  // leaves only
  Tensor value;
};

class UnboundLeafError : public Error {
 public:
  using Error::Error;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = delete;
  Tape& operator=(Tape&&) = delete;

  // Named input that can be rebound by eval_forward and differentiated against.
  NodeRef leaf(std::string name, Tensor value);
  NodeRef constant(Tensor value);
  NodeRef scalar(double v) { return constant(Tensor::scalar(v)); }

  std::size_t size() const noexcept { return nodes_.size(); }
  const Node& node(std::size_t i) const { return nodes_.at(i); }
  const Node& node(NodeRef r) const { return nodes_[r.index()]; }

  // Appends an operation node and evaluates it eagerly. Throws NonFiniteError
  // if the result contains NaN/Inf.
  NodeRef push(Node node);

  // Rebinds the named leaves that `output` depends on and replays every
  // ancestor of `output` in tape order. Leaves not in `bindings` are an error.
  Tensor eval_forward(const std::map<std::string, Tensor>& bindings, NodeRef output);

  // Reverse-mode gradient of a rank-0 node. The returned nodes live on this
  // tape; wrt nodes that `output` does not depend on get a zero constant.
  std::vector<NodeRef> grad(NodeRef output, std::span<const NodeRef> wrt);
  NodeRef grad(NodeRef output, NodeRef wrt);

 private:
  void check(NodeRef r) const;
  std::vector<Node> nodes_;
  std::map<std::string, std::uint32_t> leaf_index_;
};

inline Tape& NodeRef::tape() const { return *tape_; }
inline const Shape& NodeRef::shape() const { return tape_->node(index_).value.shape(); }
inline const Tensor& NodeRef::value() const { return tape_->node(index_).value; }

// ---- primitive ops -------------------------------------------------------
// Binary elementwise ops broadcast numpy-style.

NodeRef add(NodeRef a, NodeRef b);
NodeRef sub(NodeRef a, NodeRef b);
NodeRef mul(NodeRef a, NodeRef b);
NodeRef div(NodeRef a, NodeRef b);
NodeRef scale(NodeRef x, double c);
NodeRef add_scalar(NodeRef x, double c);
NodeRef neg(NodeRef x);

NodeRef matmul(NodeRef a, NodeRef b, bool transpose_a = false, bool transpose_b = false);
NodeRef permute(NodeRef x, Shape perm);
NodeRef transpose(NodeRef x);  // rank 2
NodeRef reshape(NodeRef x, Shape shape);
NodeRef broadcast_to(NodeRef x, Shape shape);
NodeRef sum_to(NodeRef x, Shape shape);

NodeRef sum(NodeRef x);   // -> []
NodeRef mean(NodeRef x);  // -> []
// Sum / mean over the last axis, keeping it as size 1.
NodeRef sum_last(NodeRef x);
NodeRef mean_last(NodeRef x);

NodeRef pow(NodeRef x, double p);
NodeRef square(NodeRef x);
NodeRef sqrt(NodeRef x);
NodeRef exp(NodeRef x);
NodeRef log(NodeRef x);
NodeRef maximum(NodeRef x, double c);
NodeRef minimum(NodeRef x, double c);
NodeRef clamp(NodeRef x, double lo, double hi);
NodeRef relu(NodeRef x);
NodeRef leaky_relu(NodeRef x, double slope);
NodeRef tanh(NodeRef x);
NodeRef softplus(NodeRef x);
NodeRef sigmoid(NodeRef x);
NodeRef softmax(NodeRef x);
NodeRef step_mask(NodeRef x, double threshold, double below);
NodeRef stop_gradient(NodeRef x);

NodeRef conv1d(NodeRef x, NodeRef w);
NodeRef conv1d_input_grad(NodeRef g, NodeRef w, std::size_t length);
NodeRef conv1d_weight_grad(NodeRef x, NodeRef g, std::size_t kernel);

NodeRef concat(std::span<const NodeRef> parts, std::size_t axis);
NodeRef slice(NodeRef x, std::size_t axis, std::size_t begin, std::size_t end);
NodeRef pad(NodeRef x, std::size_t axis, std::size_t before, std::size_t after);

inline constexpr double kNormEpsilon = 1e-12;
// L2 norm over the last axis: sqrt(sum x^2 + eps). Drops the last axis.
NodeRef row_norm(NodeRef x, double eps = kNormEpsilon);

// Layer-norm core: (x - mean) / sqrt(var + eps) over the last axis, population variance.
NodeRef normalize_last(NodeRef x, double eps);

inline NodeRef operator+(NodeRef a, NodeRef b) { return add(a, b); }
inline NodeRef operator-(NodeRef a, NodeRef b) { return sub(a, b); }
inline NodeRef operator*(NodeRef a, NodeRef b) { return mul(a, b); }
inline NodeRef operator/(NodeRef a, NodeRef b) { return div(a, b); }
inline NodeRef operator-(NodeRef a) { return neg(a); }
inline NodeRef operator*(NodeRef a, double c) { return scale(a, c); }
inline NodeRef operator*(double c, NodeRef a) { return scale(a, c); }
inline NodeRef operator+(NodeRef a, double c) { return add_scalar(a, c); }
inline NodeRef operator+(double c, NodeRef a) { return add_scalar(a, c); }
inline NodeRef operator-(NodeRef a, double c) { return add_scalar(a, -c); }
inline NodeRef operator-(double c, NodeRef a) { return add_scalar(neg(a), c); }

Shape broadcast_shape(const Shape& a, const Shape& b);

}  // namespace gplab::ad

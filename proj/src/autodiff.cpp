#include "gplab/autodiff.hpp"

#include <algorithm>
#include <numeric>

#include "autodiff_internal.hpp"

namespace gplab::ad {

const char* op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::Constant: return "constant";
    case Op::StopGradient: return "stop_gradient";
    case Op::Add: return "add";
    case Op::Sub: return "sub";
    case Op::Mul: return "mul";
    case Op::Scale: return "scale";
    case Op::AddScalar: return "add_scalar";
    case Op::MatMul: return "matmul";
    case Op::Permute: return "permute";
    case Op::Reshape: return "reshape";
    case Op::BroadcastTo: return "broadcast_to";
    case Op::SumTo: return "sum_to";
    case Op::Pow: return "pow";
    case Op::Sqrt: return "sqrt";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::MaxScalar: return "maximum";
    case Op::Relu: return "relu";
    case Op::LeakyRelu: return "leaky_relu";
    case Op::Tanh: return "tanh";
    case Op::Softplus: return "softplus";
    case Op::Sigmoid: return "sigmoid";
    case Op::Softmax: return "softmax";
    case Op::StepMask: return "step_mask";
    case Op::Conv1d: return "conv1d";
    case Op::Conv1dInputGrad: return "conv1d_input_grad";
    case Op::Conv1dWeightGrad: return "conv1d_weight_grad";
    case Op::Concat: return "concat";
    case Op::Slice: return "slice";
    case Op::Pad: return "pad";
    case Op::RowNorm: return "row_norm";
  }
  return "?";
}

// ---- tape ----------------------------------------------------------------

NodeRef Tape::leaf(std::string name, Tensor value) {
  if (leaf_index_.contains(name)) throw Error("duplicate leaf name '" + name + "'");
  Node n;
  n.op = Op::Leaf;
  n.name = name;
  n.value = std::move(value);
  const auto bad = n.value.first_non_finite();
  if (bad != n.value.size()) {
    throw NonFiniteError("non-finite value bound to leaf '" + name + "'", nodes_.size());
  }
  leaf_index_.emplace(std::move(name), static_cast<std::uint32_t>(nodes_.size()));
  nodes_.push_back(std::move(n));
  return NodeRef(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

NodeRef Tape::constant(Tensor value) {
  Node n;
  n.op = Op::Constant;
  n.value = std::move(value);
  if (!n.value.all_finite()) throw NonFiniteError("non-finite constant", nodes_.size());
  nodes_.push_back(std::move(n));
  return NodeRef(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

NodeRef Tape::push(Node node) {
  const std::size_t idx = nodes_.size();
  for (auto i : node.inputs) {
    if (i >= idx) throw Error("node input does not precede it on the tape");
  }
  node.value = detail::compute(node, nodes_);
  if (!node.value.all_finite()) {
    throw NonFiniteError(std::string("non-finite value produced by node ") + std::to_string(idx) +
                             " (" + op_name(node.op) + ")",
                         idx);
  }
  nodes_.push_back(std::move(node));
  return NodeRef(this, static_cast<std::uint32_t>(idx));
}

void Tape::check(NodeRef r) const {
  if (&r.tape() != this || r.index() >= nodes_.size()) {
    throw Error("node reference does not belong to this tape");
  }
}

Tensor Tape::eval_forward(const std::map<std::string, Tensor>& bindings, NodeRef output) {
  check(output);
  const std::size_t end = output.index() + 1;
  std::vector<char> needed(end, 0);
  needed[end - 1] = 1;
  for (std::size_t i = end; i-- > 0;) {
    if (!needed[i]) continue;
    for (auto j : nodes_[i].inputs) needed[j] = 1;
  }
  for (std::size_t i = 0; i < end; ++i) {
    if (!needed[i]) continue;
    Node& n = nodes_[i];
    if (n.op == Op::Constant) continue;
    if (n.op == Op::Leaf) {
      const auto it = bindings.find(n.name);
      if (it == bindings.end()) throw UnboundLeafError("leaf '" + n.name + "' is not bound");
      if (it->second.shape() != n.value.shape()) {
        throw ShapeError("leaf '" + n.name + "' bound with shape " +
                         shape_str(it->second.shape()) + ", recorded " +
                         shape_str(n.value.shape()));
      }
      if (!it->second.all_finite()) {
        throw NonFiniteError("non-finite value bound to leaf '" + n.name + "'", i);
      }
      n.value = it->second;
      continue;
    }
    n.value = detail::compute(n, nodes_);
    if (!n.value.all_finite()) {
      throw NonFiniteError(std::string("non-finite value produced by node ") + std::to_string(i) +
                               " (" + op_name(n.op) + ")",
                           i);
    }
  }
  return nodes_[end - 1].value;
}

namespace {

bool has_zero_derivative(Op op) {
  return op == Op::Leaf || op == Op::Constant || op == Op::StopGradient || op == Op::StepMask;
}

Shape inverse_permutation(const Shape& perm) {
  Shape inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = i;
  return inv;
}

// Adjoint contributions of node `self` (with adjoint `g`) to each of its inputs.
// Entries for inputs that are not needed may be left invalid.
std::vector<NodeRef> vjp(Tape& tape, NodeRef self, NodeRef g, const std::vector<char>& need) {
  // Copy what we need from the node; pushing nodes may reallocate the tape.
  const Node& n = tape.node(self);
  const std::vector<std::uint32_t> ins = n.inputs;
  std::vector<NodeRef> out(ins.size());
  auto input = [&](std::size_t i) { return NodeRef(&tape, ins[i]); };
  auto wants = [&](std::size_t i) { return need[ins[i]] != 0; };
  const Op op = n.op;
  const double a = n.a;
  const double b = n.b;
  const Shape attr = n.attr;

  switch (op) {
    case Op::Leaf:
    case Op::Constant:
    case Op::StopGradient:
    case Op::StepMask:
      break;
    case Op::Add:
      out[0] = g;
      out[1] = g;
      break;
    case Op::Sub:
      out[0] = g;
      if (wants(1)) out[1] = neg(g);
      break;
    case Op::Mul:
      if (wants(0)) out[0] = mul(g, input(1));
      if (wants(1)) out[1] = mul(g, input(0));
      break;
    case Op::Scale:
      out[0] = scale(g, a);
      break;
    case Op::AddScalar:
      out[0] = g;
      break;
    case Op::MatMul: {
      const bool ta = a != 0.0, tb = b != 0.0;
      const NodeRef A = input(0), B = input(1);
      if (wants(0)) out[0] = ta ? matmul(B, g, tb, true) : matmul(g, B, false, !tb);
      if (wants(1)) out[1] = tb ? matmul(g, A, true, ta) : matmul(A, g, !ta, false);
      break;
    }
    case Op::Permute:
      out[0] = permute(g, inverse_permutation(attr));
      break;
    case Op::Reshape:
      out[0] = reshape(g, input(0).shape());
      break;
    case Op::BroadcastTo:
      out[0] = sum_to(g, input(0).shape());
      break;
    case Op::SumTo:
      out[0] = broadcast_to(g, input(0).shape());
      break;
    case Op::Pow:
      if (a == 0.0) break;
      if (a == 1.0) {
        out[0] = g;
      } else if (a == 2.0) {
        out[0] = mul(g, scale(input(0), 2.0));
      } else {
        out[0] = mul(g, scale(pow(input(0), a - 1.0), a));
      }
      break;
    case Op::Sqrt:
      out[0] = mul(g, scale(pow(self, -1.0), 0.5));
      break;
    case Op::Exp:
      out[0] = mul(g, self);
      break;
    case Op::Log:
      out[0] = mul(g, pow(input(0), -1.0));
      break;
    case Op::MaxScalar:
      out[0] = mul(g, step_mask(input(0), a, 0.0));
      break;
    case Op::Relu:
      out[0] = mul(g, step_mask(input(0), 0.0, 0.0));
      break;
    case Op::LeakyRelu:
      out[0] = mul(g, step_mask(input(0), 0.0, a));
      break;
    case Op::Tanh:
      out[0] = mul(g, add_scalar(neg(square(self)), 1.0));
      break;
    case Op::Softplus:
      out[0] = mul(g, sigmoid(input(0)));
      break;
    case Op::Sigmoid:
      out[0] = mul(g, mul(self, add_scalar(neg(self), 1.0)));
      break;
    case Op::Softmax: {
      const NodeRef gy = mul(g, self);
      out[0] = sub(gy, mul(self, sum_last(gy)));
      break;
    }
    case Op::Conv1d: {
      const NodeRef x = input(0), w = input(1);
      if (wants(0)) out[0] = conv1d_input_grad(g, w, x.shape()[2]);
      if (wants(1)) out[1] = conv1d_weight_grad(x, g, w.shape()[2]);
      break;
    }
    case Op::Conv1dInputGrad: {
      const NodeRef go = input(0), w = input(1);
      if (wants(0)) out[0] = conv1d(g, w);
      if (wants(1)) out[1] = conv1d_weight_grad(g, go, w.shape()[2]);
      break;
    }
    case Op::Conv1dWeightGrad: {
      const NodeRef x = input(0), go = input(1);
      if (wants(0)) out[0] = conv1d_input_grad(go, g, x.shape()[2]);
      if (wants(1)) out[1] = conv1d(x, g);
      break;
    }
    case Op::Concat: {
      const std::size_t axis = attr[0];
      std::size_t at = 0;
      for (std::size_t i = 0; i < out.size(); ++i) {
        const std::size_t len = input(i).shape()[axis];
        if (wants(i)) out[i] = slice(g, axis, at, at + len);
        at += len;
      }
      break;
    }
    case Op::Slice: {
      const std::size_t axis = attr[0];
      const std::size_t len = input(0).shape()[axis];
      out[0] = pad(g, axis, attr[1], len - attr[2]);
      break;
    }
    case Op::Pad: {
      const std::size_t axis = attr[0];
      const std::size_t len = input(0).shape()[axis];
      out[0] = slice(g, axis, attr[1], attr[1] + len);
      break;
    }
    case Op::RowNorm: {
      Shape keep = self.shape();
      keep.push_back(1);
      out[0] = mul(input(0), reshape(div(g, self), keep));
      break;
    }
  }
  return out;
}

}  // namespace

std::vector<NodeRef> Tape::grad(NodeRef output, std::span<const NodeRef> wrt) {
  check(output);
  if (!output.shape().empty()) {
    throw ShapeError("grad of non-scalar output with shape " + shape_str(output.shape()));
  }
  for (const auto& w : wrt) check(w);

  const std::size_t end = output.index() + 1;
  // need[i]: i depends on some wrt node (through differentiable ops) and
  // output depends on i.
  std::vector<char> is_wrt(nodes_.size(), 0);
  for (const auto& w : wrt) is_wrt[w.index()] = 1;
  std::vector<char> need(end, 0);
  for (std::size_t i = 0; i < end; ++i) {
    if (is_wrt[i]) {
      need[i] = 1;
      continue;
    }
    if (has_zero_derivative(nodes_[i].op)) continue;
    for (auto j : nodes_[i].inputs) {
      if (need[j]) {
        need[i] = 1;
        break;
      }
    }
  }
  std::vector<char> ancestor(end, 0);
  ancestor[end - 1] = 1;
  for (std::size_t i = end; i-- > 0;) {
    if (!ancestor[i]) continue;
    for (auto j : nodes_[i].inputs) ancestor[j] = 1;
  }
  for (std::size_t i = 0; i < end; ++i) need[i] = need[i] && ancestor[i];

  std::vector<NodeRef> adj(end);
  if (need[end - 1]) adj[end - 1] = scalar(1.0);
  for (std::size_t i = end; i-- > 0;) {
    if (!need[i] || !adj[i].valid() || has_zero_derivative(nodes_[i].op)) continue;
    const auto contribs = vjp(*this, NodeRef(this, static_cast<std::uint32_t>(i)), adj[i], need);
    const auto inputs = nodes_[i].inputs;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      const auto j = inputs[k];
      if (!need[j] || !contribs[k].valid()) continue;
      adj[j] = adj[j].valid() ? add(adj[j], contribs[k]) : contribs[k];
    }
  }

  std::vector<NodeRef> result;
  result.reserve(wrt.size());
  for (const auto& w : wrt) {
    const std::size_t i = w.index();
    if (i < end && adj[i].valid()) {
      result.push_back(adj[i]);
    } else {
      result.push_back(constant(Tensor(w.shape())));
    }
  }
  return result;
}

NodeRef Tape::grad(NodeRef output, NodeRef wrt) {
  const NodeRef w[1] = {wrt};
  return grad(output, std::span<const NodeRef>(w, 1))[0];
}

// ---- op constructors -----------------------------------------------------

namespace {

Tape& same_tape(NodeRef a, NodeRef b) {
  if (!a.valid() || !b.valid() || &a.tape() != &b.tape()) {
    throw Error("operands live on different tapes");
  }
  return a.tape();
}

NodeRef unary(Op op, NodeRef x, double a = 0.0, double b = 0.0) {
  Node n;
  n.op = op;
  n.inputs = {static_cast<std::uint32_t>(x.index())};
  n.a = a;
  n.b = b;
  return x.tape().push(std::move(n));
}

NodeRef with_attr(Op op, NodeRef x, Shape attr) {
  Node n;
  n.op = op;
  n.inputs = {static_cast<std::uint32_t>(x.index())};
  n.attr = std::move(attr);
  return x.tape().push(std::move(n));
}

NodeRef binary(Op op, NodeRef a, NodeRef b) {
  Tape& t = same_tape(a, b);
  const Shape s = broadcast_shape(a.shape(), b.shape());
  if (a.shape() != s) a = broadcast_to(a, s);
  if (b.shape() != s) b = broadcast_to(b, s);
  Node n;
  n.op = op;
  n.inputs = {static_cast<std::uint32_t>(a.index()), static_cast<std::uint32_t>(b.index())};
  return t.push(std::move(n));
}

// True if `small` broadcasts to `big` under numpy rules.
bool broadcastable(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  const std::size_t lead = big.size() - small.size();
  for (std::size_t i = 0; i < small.size(); ++i) {
    if (small[i] != 1 && small[i] != big[lead + i]) return false;
  }
  return true;
}

}  // namespace

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t r = std::max(a.size(), b.size());
  Shape s(r, 1);
  for (std::size_t i = 0; i < r; ++i) {
    const std::size_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
    const std::size_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw ShapeError("shapes " + shape_str(a) + " and " + shape_str(b) + " do not broadcast");
    }
    s[i] = da == 1 ? db : da;
  }
  return s;
}

NodeRef add(NodeRef a, NodeRef b) { return binary(Op::Add, a, b); }
NodeRef sub(NodeRef a, NodeRef b) { return binary(Op::Sub, a, b); }
NodeRef mul(NodeRef a, NodeRef b) { return binary(Op::Mul, a, b); }
NodeRef div(NodeRef a, NodeRef b) { return mul(a, pow(b, -1.0)); }
NodeRef scale(NodeRef x, double c) { return unary(Op::Scale, x, c); }
NodeRef add_scalar(NodeRef x, double c) { return unary(Op::AddScalar, x, c); }
NodeRef neg(NodeRef x) { return scale(x, -1.0); }

NodeRef matmul(NodeRef a, NodeRef b, bool transpose_a, bool transpose_b) {
  Tape& t = same_tape(a, b);
  if (a.shape().size() != 2 || b.shape().size() != 2) {
    throw ShapeError("matmul needs rank-2 operands, got " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  const std::size_t ka = transpose_a ? a.shape()[0] : a.shape()[1];
  const std::size_t kb = transpose_b ? b.shape()[1] : b.shape()[0];
  if (ka != kb) {
    throw ShapeError("matmul inner dimensions differ: " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  Node n;
  n.op = Op::MatMul;
  n.inputs = {static_cast<std::uint32_t>(a.index()), static_cast<std::uint32_t>(b.index())};
  n.a = transpose_a ? 1.0 : 0.0;
  n.b = transpose_b ? 1.0 : 0.0;
  return t.push(std::move(n));
}

NodeRef permute(NodeRef x, Shape perm) {
  const std::size_t r = x.shape().size();
  Shape sorted = perm;
  std::sort(sorted.begin(), sorted.end());
  Shape iota(r);
  std::iota(iota.begin(), iota.end(), std::size_t{0});
  if (sorted != iota) throw ShapeError("invalid permutation for rank " + std::to_string(r));
  return with_attr(Op::Permute, x, std::move(perm));
}

NodeRef transpose(NodeRef x) {
  if (x.shape().size() != 2) throw ShapeError("transpose needs rank 2");
  return permute(x, Shape{1, 0});
}

NodeRef reshape(NodeRef x, Shape shape) {
  if (shape_size(shape) != shape_size(x.shape())) {
    throw ShapeError("cannot reshape " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  if (shape == x.shape()) return x;
  return with_attr(Op::Reshape, x, std::move(shape));
}

NodeRef broadcast_to(NodeRef x, Shape shape) {
  if (!broadcastable(x.shape(), shape)) {
    throw ShapeError("cannot broadcast " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  if (shape == x.shape()) return x;
  return with_attr(Op::BroadcastTo, x, std::move(shape));
}

NodeRef sum_to(NodeRef x, Shape shape) {
  if (!broadcastable(shape, x.shape())) {
    throw ShapeError("cannot reduce " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  if (shape == x.shape()) return x;
  return with_attr(Op::SumTo, x, std::move(shape));
}

NodeRef sum(NodeRef x) {
  if (x.shape().empty()) return x;
  return with_attr(Op::SumTo, x, Shape{});
}

NodeRef mean(NodeRef x) {
  const std::size_t n = shape_size(x.shape());
  if (n == 0) throw ShapeError("mean of empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(n));
}

NodeRef sum_last(NodeRef x) {
  if (x.shape().empty()) throw ShapeError("sum_last on a scalar");
  Shape s = x.shape();
  s.back() = 1;
  return sum_to(x, std::move(s));
}

NodeRef mean_last(NodeRef x) {
  const std::size_t d = x.shape().empty() ? 0 : x.shape().back();
  if (d == 0) throw ShapeError("mean_last over an empty axis");
  return scale(sum_last(x), 1.0 / static_cast<double>(d));
}

NodeRef pow(NodeRef x, double p) { return unary(Op::Pow, x, p); }
NodeRef square(NodeRef x) { return pow(x, 2.0); }
NodeRef sqrt(NodeRef x) { return unary(Op::Sqrt, x); }
NodeRef exp(NodeRef x) { return unary(Op::Exp, x); }
NodeRef log(NodeRef x) { return unary(Op::Log, x); }
NodeRef maximum(NodeRef x, double c) { return unary(Op::MaxScalar, x, c); }
NodeRef minimum(NodeRef x, double c) { return neg(maximum(neg(x), -c)); }
NodeRef clamp(NodeRef x, double lo, double hi) { return minimum(maximum(x, lo), hi); }
NodeRef relu(NodeRef x) { return unary(Op::Relu, x); }

NodeRef leaky_relu(NodeRef x, double slope) { return unary(Op::LeakyRelu, x, slope); }
NodeRef tanh(NodeRef x) { return unary(Op::Tanh, x); }
NodeRef softplus(NodeRef x) { return unary(Op::Softplus, x); }
NodeRef sigmoid(NodeRef x) { return unary(Op::Sigmoid, x); }

NodeRef softmax(NodeRef x) {
  if (x.shape().empty() || x.shape().back() == 0) throw ShapeError("softmax over an empty axis");
  return unary(Op::Softmax, x);
}

NodeRef step_mask(NodeRef x, double threshold, double below) {
  return unary(Op::StepMask, x, threshold, below);
}

NodeRef stop_gradient(NodeRef x) { return unary(Op::StopGradient, x); }

NodeRef conv1d(NodeRef x, NodeRef w) {
  Tape& t = same_tape(x, w);
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  if (xs.size() != 3 || ws.size() != 3) {
    throw ShapeError("conv1d expects x[B,C,L] and w[O,C,K], got " + shape_str(xs) + " and " +
                     shape_str(ws));
  }
  if (xs[1] != ws[1]) throw ShapeError("conv1d channel mismatch");
  if (ws[2] < 1 || xs[2] < ws[2]) {
    throw ShapeError("conv1d input length " + std::to_string(xs[2]) + " shorter than kernel " +
                     std::to_string(ws[2]));
  }
  Node n;
  n.op = Op::Conv1d;
  n.inputs = {static_cast<std::uint32_t>(x.index()), static_cast<std::uint32_t>(w.index())};
  return t.push(std::move(n));
}

NodeRef conv1d_input_grad(NodeRef g, NodeRef w, std::size_t length) {
  Tape& t = same_tape(g, w);
  const Shape& gs = g.shape();
  const Shape& ws = w.shape();
  if (gs.size() != 3 || ws.size() != 3 || gs[1] != ws[0] || gs[2] + ws[2] != length + 1) {
    throw ShapeError("conv1d_input_grad shape mismatch");
  }
  Node n;
  n.op = Op::Conv1dInputGrad;
  n.inputs = {static_cast<std::uint32_t>(g.index()), static_cast<std::uint32_t>(w.index())};
  n.attr = {length};
  return t.push(std::move(n));
}

NodeRef conv1d_weight_grad(NodeRef x, NodeRef g, std::size_t kernel) {
  Tape& t = same_tape(x, g);
  const Shape& xs = x.shape();
  const Shape& gs = g.shape();
  if (xs.size() != 3 || gs.size() != 3 || xs[0] != gs[0] || xs[2] != gs[2] + kernel - 1) {
    throw ShapeError("conv1d_weight_grad shape mismatch");
  }
  Node n;
  n.op = Op::Conv1dWeightGrad;
  n.inputs = {static_cast<std::uint32_t>(x.index()), static_cast<std::uint32_t>(g.index())};
  n.attr = {kernel};
  return t.push(std::move(n));
}

NodeRef concat(std::span<const NodeRef> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat of nothing");
  if (parts.size() == 1) return parts[0];
  const Shape& s0 = parts[0].shape();
  if (axis >= s0.size()) throw ShapeError("concat axis out of range");
  Node n;
  n.op = Op::Concat;
  n.attr = {axis};
  for (const auto& p : parts) {
    same_tape(parts[0], p);
    const Shape& s = p.shape();
    bool ok = s.size() == s0.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == s0[i];
    if (!ok) throw ShapeError("concat shape mismatch: " + shape_str(s0) + " vs " + shape_str(s));
    n.inputs.push_back(static_cast<std::uint32_t>(p.index()));
  }
  return parts[0].tape().push(std::move(n));
}

NodeRef slice(NodeRef x, std::size_t axis, std::size_t begin, std::size_t end) {
  const Shape& s = x.shape();
  if (axis >= s.size() || begin > end || end > s[axis]) {
    throw ShapeError("slice [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") out of range for " + shape_str(s));
  }
  if (begin == 0 && end == s[axis]) return x;
  return with_attr(Op::Slice, x, Shape{axis, begin, end});
}

NodeRef pad(NodeRef x, std::size_t axis, std::size_t before, std::size_t after) {
  if (axis >= x.shape().size()) throw ShapeError("pad axis out of range");
  if (before == 0 && after == 0) return x;
  return with_attr(Op::Pad, x, Shape{axis, before, after});
}

NodeRef row_norm(NodeRef x, double eps) {
  if (x.shape().empty()) throw ShapeError("row_norm on a scalar");
  if (!(eps > 0.0)) throw Error("row_norm stabilizer must be positive");
  return unary(Op::RowNorm, x, eps);
}

NodeRef normalize_last(NodeRef x, double eps) {
  if (!(eps > 0.0)) throw Error("layer norm epsilon must be positive");
  const NodeRef centered = sub(x, mean_last(x));
  const NodeRef var = mean_last(square(centered));
  return mul(centered, pow(add_scalar(var, eps), -0.5));
}

}  // namespace gplab::ad

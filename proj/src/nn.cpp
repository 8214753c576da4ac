#include "gplab/nn.hpp"

#include <cmath>

namespace gplab::nn {

// ---- ParamSet ------------------------------------------------------------

void ParamSet::add(std::string name, Tensor value) {
  if (contains(name)) throw Error("duplicate parameter '" + name + "'");
  entries_.emplace_back(std::move(name), std::move(value));
}

bool ParamSet::contains(std::string_view name) const {
  for (const auto& e : entries_)
    if (e.first == name) return true;
  return false;
}

const Tensor& ParamSet::at(std::string_view name) const {
  for (const auto& e : entries_)
    if (e.first == name) return e.second;
  throw Error("no parameter named '" + std::string(name) + "'");
}

Tensor& ParamSet::at(std::string_view name) {
  return const_cast<Tensor&>(std::as_const(*this).at(name));
}

std::size_t ParamSet::count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.second.size();
  return n;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet z;
  for (const auto& [name, t] : entries_) z.add(name, Tensor(t.shape()));
  return z;
}

bool ParamSet::same_layout(const ParamSet& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].first != other.entries_[i].first ||
        entries_[i].second.shape() != other.entries_[i].second.shape()) {
      return false;
    }
  }
  return true;
}

BoundParams::BoundParams(Tape& tape, const ParamSet& params, std::string_view prefix,
                         bool trainable) {
  for (const auto& [name, value] : params) {
    names_.push_back(name);
    nodes_.push_back(trainable ? tape.leaf(std::string(prefix) + name, value)
                               : tape.constant(value));
  }
}

BoundParams::BoundParams(const ParamSet& layout, std::vector<NodeRef> nodes)
    : nodes_(std::move(nodes)) {
  if (nodes_.size() != layout.size()) throw ShapeError("node count does not match parameters");
  std::size_t i = 0;
  for (const auto& [name, value] : layout) {
    if (nodes_[i++].shape() != value.shape()) {
      throw ShapeError("node shape mismatch for parameter '" + name + "'");
    }
    names_.push_back(name);
  }
}

NodeRef BoundParams::at(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return nodes_[i];
  throw Error("parameter '" + std::string(name) + "' is not bound");
}

ParamSet collect(const ParamSet& layout, const std::vector<NodeRef>& grads) {
  if (grads.size() != layout.size()) throw ShapeError("gradient count does not match parameters");
  ParamSet out;
  std::size_t i = 0;
  for (const auto& [name, value] : layout) {
    if (grads[i].shape() != value.shape()) {
      throw ShapeError("gradient shape mismatch for '" + name + "'");
    }
    out.add(name, grads[i++].value());
  }
  return out;
}

// ---- layers --------------------------------------------------------------

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::tanh: return "tanh";
    case Activation::shifted_softplus: return "shifted_softplus";
  }
  return "?";
}

Activation parse_activation(std::string_view name) {
  for (auto a : {Activation::relu, Activation::leaky_relu, Activation::tanh,
                 Activation::shifted_softplus}) {
    if (name == activation_name(a)) return a;
  }
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

NodeRef apply_activation(const ActivationKind& act, NodeRef x) {
  switch (act.kind) {
    case Activation::relu:
      return ad::relu(x);
    case Activation::leaky_relu:
      if (!(act.slope > 0.0 && act.slope < 1.0)) throw Error("leaky relu slope must be in (0, 1)");
      return ad::leaky_relu(x, act.slope);
    case Activation::tanh:
      return ad::tanh(x);
    case Activation::shifted_softplus:
      // softplus(2x + 2) / 2 - 1: a smooth stand-in for ELU.
      return ad::softplus(x * 2.0 + 2.0) * 0.5 - 1.0;
  }
  throw Error("unknown activation");
}

NodeRef linear_forward(NodeRef weight, NodeRef bias, NodeRef x) {
  const Shape& ws = weight.shape();
  const Shape& xs = x.shape();
  if (ws.size() != 2 || xs.size() != 2 || xs[1] != ws[1] || bias.shape() != Shape{ws[0]}) {
    throw ShapeError("linear layer " + shape_str(ws) + " cannot take input " + shape_str(xs));
  }
  return ad::matmul(x, weight, false, true) + bias;
}

NodeRef conv1d_forward(NodeRef kernels, NodeRef bias, NodeRef x) {
  const Shape& ks = kernels.shape();
  if (ks.size() != 3 || bias.shape() != Shape{ks[0]}) {
    throw ShapeError("conv1d layer parameters have inconsistent shapes");
  }
  return ad::conv1d(x, kernels) + ad::reshape(bias, Shape{ks[0], 1});
}

NodeRef layer_norm_forward(NodeRef gain, NodeRef bias, NodeRef x, double eps) {
  if (x.shape().empty() || gain.shape() != Shape{x.shape().back()} ||
      bias.shape() != gain.shape()) {
    throw ShapeError("layer norm parameters do not match input " + shape_str(x.shape()));
  }
  return ad::normalize_last(x, eps) * gain + bias;
}

// ---- initialization ------------------------------------------------------

double init_bound(Activation act, std::size_t fan_in, std::size_t fan_out) {
  switch (act) {
    case Activation::relu:
    case Activation::leaky_relu:
      return std::sqrt(6.0 / static_cast<double>(fan_in));
    case Activation::tanh:
    case Activation::shifted_softplus:
      return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  }
  return 0.0;
}

namespace {

Tensor uniform_tensor(Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(-bound, bound);
  return t;
}

}  // namespace

void add_linear(ParamSet& params, const std::string& name, std::size_t in, std::size_t out,
                Activation act, Rng& rng) {
  params.add(name + ".weight", uniform_tensor(Shape{out, in}, init_bound(act, in, out), rng));
  params.add(name + ".bias", Tensor(Shape{out}));
}

void add_conv1d(ParamSet& params, const std::string& name, std::size_t in_ch, std::size_t out_ch,
                std::size_t kernel, Activation act, Rng& rng) {
  if (kernel < 1) throw Error("conv1d kernel size must be at least 1");
  const double bound = init_bound(act, in_ch * kernel, out_ch * kernel);
  params.add(name + ".weight", uniform_tensor(Shape{out_ch, in_ch, kernel}, bound, rng));
  params.add(name + ".bias", Tensor(Shape{out_ch}));
}

void add_layer_norm(ParamSet& params, const std::string& name, std::size_t features) {
  params.add(name + ".gain", Tensor(Shape{features}, 1.0));
  params.add(name + ".bias", Tensor(Shape{features}));
}

// ---- MLP -----------------------------------------------------------------

namespace {

std::string fc(std::size_t i) { return "fc" + std::to_string(i); }
std::string ln(std::size_t i) { return "ln" + std::to_string(i); }

}  // namespace

void MlpSpec::validate() const {
  if (widths.size() < 2) throw ConfigError("an MLP needs at least one layer");
  for (auto w : widths)
    if (w == 0) throw ConfigError("MLP widths must be positive");
  if (activation.kind == Activation::leaky_relu &&
      !(activation.slope > 0.0 && activation.slope < 1.0)) {
    throw ConfigError("leaky relu slope must be in (0, 1)");
  }
}

ParamSet init_params(const MlpSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed, /*stream=*/0x1A17);
  ParamSet p;
  const std::size_t L = spec.layers();
  for (std::size_t i = 0; i < L; ++i) {
    add_linear(p, fc(i), spec.widths[i], spec.widths[i + 1], spec.activation.kind, rng);
    const bool hidden = i + 1 < L;
    if (spec.layer_norm && (hidden || spec.final_activation)) {
      add_layer_norm(p, ln(i), spec.widths[i + 1]);
    }
  }
  return p;
}

void check_params(const MlpSpec& spec, const ParamSet& params) {
  spec.validate();
  ParamSet expected;
  Rng rng(0);
  const std::size_t L = spec.layers();
  for (std::size_t i = 0; i < L; ++i) {
    add_linear(expected, fc(i), spec.widths[i], spec.widths[i + 1], spec.activation.kind, rng);
    if (spec.layer_norm && (i + 1 < L || spec.final_activation)) {
      add_layer_norm(expected, ln(i), spec.widths[i + 1]);
    }
  }
  if (!expected.same_layout(params)) {
    throw ShapeError("parameters do not match the MLP layout");
  }
}

std::vector<NodeRef> mlp_forward_traced(const MlpSpec& spec, const BoundParams& params,
                                        NodeRef x) {
  spec.validate();
  if (x.shape().size() != 2 || x.shape()[1] != spec.widths.front()) {
    throw ShapeError("MLP input " + shape_str(x.shape()) + " does not match width " +
                     std::to_string(spec.widths.front()));
  }
  std::vector<NodeRef> trace;
  const std::size_t L = spec.layers();
  NodeRef h = x;
  for (std::size_t i = 0; i < L; ++i) {
    h = linear_forward(params.at(fc(i) + ".weight"), params.at(fc(i) + ".bias"), h);
    const bool hidden = i + 1 < L;
    if (hidden || spec.final_activation) {
      if (spec.layer_norm) {
        h = layer_norm_forward(params.at(ln(i) + ".gain"), params.at(ln(i) + ".bias"), h);
      }
      h = apply_activation(spec.activation, h);
    }
    trace.push_back(h);
  }
  return trace;
}

NodeRef mlp_forward(const MlpSpec& spec, const BoundParams& params, NodeRef x) {
  return mlp_forward_traced(spec, params, x).back();
}

}  // namespace gplab::nn

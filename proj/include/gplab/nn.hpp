#pragma once

// Network building blocks expressed on the autodiff tape.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gplab/autodiff.hpp"
#include "gplab/random.hpp"
#include "gplab/tensor.hpp"

namespace gplab::nn {

using ad::NodeRef;
using ad::Tape;

// Ordered, uniquely named collection of trainable tensors.
class ParamSet {
 public:
  using Entry = std::pair<std::string, Tensor>;

  void add(std::string name, Tensor value);
  bool contains(std::string_view name) const;
  const Tensor& at(std::string_view name) const;
  Tensor& at(std::string_view name);

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  // Total number of scalar entries.
  std::size_t count() const;

  auto begin() noexcept { return entries_.begin(); }
  auto end() noexcept { return entries_.end(); }
  auto begin() const noexcept { return entries_.begin(); }
  auto end() const noexcept { return entries_.end(); }

  // Zero tensors with the same names and shapes.
  ParamSet zeros_like() const;
  bool same_layout(const ParamSet& other) const;

  friend bool operator==(const ParamSet&, const ParamSet&) = default;

 private:
  std::vector<Entry> entries_;
};

// A ParamSet placed on a tape, either as leaves (trainable) or constants.
class BoundParams {
 public:
  BoundParams() = default;
  BoundParams(Tape& tape, const ParamSet& params, std::string_view prefix, bool trainable);
  // View over nodes that already exist, e.g. leaves created by a caller.
  BoundParams(const ParamSet& layout, std::vector<NodeRef> nodes);

  NodeRef at(std::string_view name) const;
  const std::vector<NodeRef>& nodes() const noexcept { return nodes_; }
  const std::vector<std::string>& names() const noexcept { return names_; }

 private:
  std::vector<std::string> names_;
  std::vector<NodeRef> nodes_;
};

// Copies the values of per-parameter gradient nodes into a ParamSet layout.
ParamSet collect(const ParamSet& layout, const std::vector<NodeRef>& grads);

// ---- layers --------------------------------------------------------------

enum class Activation { relu, leaky_relu, tanh, shifted_softplus };

inline constexpr double kLeakySlope = 0.2;
inline constexpr double kLayerNormEpsilon = 1e-5;

struct ActivationKind {
  Activation kind = Activation::relu;
  double slope = kLeakySlope;  // leaky_relu only
};

const char* activation_name(Activation a);
Activation parse_activation(std::string_view name);

NodeRef apply_activation(const ActivationKind& act, NodeRef x);

// y = x W^T + b for x[batch, in], W[out, in], b[out].
NodeRef linear_forward(NodeRef weight, NodeRef bias, NodeRef x);
// Valid cross-correlation, stride 1: x[B, C, L], kernels[O, C, K], bias[O].
NodeRef conv1d_forward(NodeRef kernels, NodeRef bias, NodeRef x);
// Per-example normalization over the last axis, then gain and bias.
NodeRef layer_norm_forward(NodeRef gain, NodeRef bias, NodeRef x,
                           double eps = kLayerNormEpsilon);

// ---- initialization ------------------------------------------------------

// He-uniform for the relu family, Xavier-uniform for tanh / shifted softplus.
double init_bound(Activation act, std::size_t fan_in, std::size_t fan_out);

void add_linear(ParamSet& params, const std::string& name, std::size_t in, std::size_t out,
                Activation act, Rng& rng);
void add_conv1d(ParamSet& params, const std::string& name, std::size_t in_ch, std::size_t out_ch,
                std::size_t kernel, Activation act, Rng& rng);
void add_layer_norm(ParamSet& params, const std::string& name, std::size_t features);

// ---- MLP -----------------------------------------------------------------

struct MlpSpec {
  std::vector<std::size_t> widths;  // input, hidden..., output
  ActivationKind activation;
  bool layer_norm = false;
  bool final_activation = false;

  std::size_t layers() const { return widths.empty() ? 0 : widths.size() - 1; }
  void validate() const;
};

// Deterministic in `seed`; biases start at zero.
ParamSet init_params(const MlpSpec& spec, std::uint64_t seed);

NodeRef mlp_forward(const MlpSpec& spec, const BoundParams& params, NodeRef x);
// One node per layer output (post-activation for hidden layers), input side first.
std::vector<NodeRef> mlp_forward_traced(const MlpSpec& spec, const BoundParams& params, NodeRef x);

// Checks that `params` holds exactly the tensors `spec` needs.
void check_params(const MlpSpec& spec, const ParamSet& params);

// ---- serialization -------------------------------------------------------
// Text container: optional '#' comment lines, a "gplab-params 1" line, then per
// tensor one "name rank d0 d1 ..." line and one line of hex-float values.

void save_params(std::ostream& out, const ParamSet& params, std::string_view comment = {});
ParamSet load_params(std::istream& in);
void save_params(const std::string& path, const ParamSet& params, std::string_view comment = {});
ParamSet load_params(const std::string& path);

}  // namespace gplab::nn

#pragma once

#include <cstdint>
#include <variant>

#include "gplab/nn.hpp"

namespace gplab::optim {

using nn::ParamSet;

struct AdamHyper {
  double lr = 1e-4;
  double beta1 = 0.0;
  double beta2 = 0.9;
  double eps = 1e-8;
};

struct RmsPropHyper {
  double lr = 5e-5;
  double rho = 0.9;
  double eps = 1e-10;
};

// Adam with bias correction. Moments are created lazily on the first step.
class Adam {
 public:
  explicit Adam(AdamHyper hyper = {});

  void step(ParamSet& params, const ParamSet& grads);

  const AdamHyper& hyper() const noexcept { return hyper_; }
  std::uint64_t steps() const noexcept { return t_; }
  const ParamSet& first_moment() const noexcept { return m_; }
  const ParamSet& second_moment() const noexcept { return v_; }

 private:
  AdamHyper hyper_;
  std::uint64_t t_ = 0;
  ParamSet m_;
  ParamSet v_;
};

// v <- rho v + (1 - rho) g^2;  p <- p - lr g / sqrt(v + eps).
class RmsProp {
 public:
  explicit RmsProp(RmsPropHyper hyper = {});

  void step(ParamSet& params, const ParamSet& grads);

  const RmsPropHyper& hyper() const noexcept { return hyper_; }
  std::uint64_t steps() const noexcept { return t_; }
  const ParamSet& mean_square() const noexcept { return v_; }

 private:
  RmsPropHyper hyper_;
  std::uint64_t t_ = 0;
  ParamSet v_;
};

using Optimizer = std::variant<Adam, RmsProp>;

void step(Optimizer& opt, ParamSet& params, const ParamSet& grads);
std::uint64_t steps(const Optimizer& opt);

// Projects every entry (weights and biases) into [-c, c].
void clip_weights(ParamSet& params, double c);
double max_abs(const ParamSet& params);

}  // namespace gplab::optim

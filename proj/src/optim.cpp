#include "gplab/optim.hpp"

#include <algorithm>
#include <cmath>

namespace gplab::optim {
namespace {

void check_grads(const ParamSet& params, const ParamSet& grads) {
  if (!params.same_layout(grads)) {
    throw ShapeError("gradients do not match the parameter layout");
  }
  for (const auto& [name, g] : grads) {
    const auto bad = g.first_non_finite();
    if (bad != g.size()) {
      throw NonFiniteError("non-finite gradient for parameter '" + name + "'", bad);
    }
  }
}

}  // namespace

Adam::Adam(AdamHyper hyper) : hyper_(hyper) {
  if (!(hyper.beta1 >= 0.0 && hyper.beta1 < 1.0) || !(hyper.beta2 >= 0.0 && hyper.beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(hyper.lr > 0.0) || !(hyper.eps > 0.0)) throw ConfigError("Adam lr and eps must be positive");
}

void Adam::step(ParamSet& params, const ParamSet& grads) {
  check_grads(params, grads);
  if (t_ == 0) {
    m_ = params.zeros_like();
    v_ = params.zeros_like();
  } else if (!m_.same_layout(params)) {
    throw ShapeError("Adam state does not match the parameter layout");
  }
  ++t_;
  const double b1 = hyper_.beta1, b2 = hyper_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  auto pit = params.begin();
  auto mit = m_.begin();
  auto vit = v_.begin();
  for (const auto& [name, g] : grads) {
    double* p = pit->second.data().data();
    double* m = mit->second.data().data();
    double* v = vit->second.data().data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] -= hyper_.lr * mhat / (std::sqrt(vhat) + hyper_.eps);
    }
    ++pit, ++mit, ++vit;
  }
}

RmsProp::RmsProp(RmsPropHyper hyper) : hyper_(hyper) {
  if (!(hyper.rho >= 0.0 && hyper.rho < 1.0)) throw ConfigError("RMSProp decay must lie in [0, 1)");
  if (!(hyper.lr > 0.0) || !(hyper.eps > 0.0)) {
    throw ConfigError("RMSProp lr and eps must be positive");
  }
}

void RmsProp::step(ParamSet& params, const ParamSet& grads) {
  check_grads(params, grads);
  if (t_ == 0) {
    v_ = params.zeros_like();
  } else if (!v_.same_layout(params)) {
    throw ShapeError("RMSProp state does not match the parameter layout");
  }
  ++t_;
  const double rho = hyper_.rho;
  auto pit = params.begin();
  auto vit = v_.begin();
  for (const auto& [name, g] : grads) {
    double* p = pit->second.data().data();
    double* v = vit->second.data().data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      v[i] = rho * v[i] + (1.0 - rho) * g[i] * g[i];
      p[i] -= hyper_.lr * g[i] / std::sqrt(v[i] + hyper_.eps);
    }
    ++pit, ++vit;
  }
}

void step(Optimizer& opt, ParamSet& params, const ParamSet& grads) {
  std::visit([&](auto& o) { o.step(params, grads); }, opt);
}

std::uint64_t steps(const Optimizer& opt) {
  return std::visit([](const auto& o) { return o.steps(); }, opt);
}

void clip_weights(ParamSet& params, double c) {
  if (!(c > 0.0)) throw ConfigError("clipping threshold must be positive");
  for (auto& [name, t] : params)
    for (auto& v : t.values()) v = std::clamp(v, -c, c);
}

double max_abs(const ParamSet& params) {
  double m = 0.0;
  for (const auto& [name, t] : params)
    for (double v : t.values()) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace gplab::optim

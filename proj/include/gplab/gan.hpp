#pragma once

// WGAN objectives, the gradient penalty and the alternating training loop.

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "gplab/data.hpp"
#include "gplab/nn.hpp"
#include "gplab/optim.hpp"

namespace gplab::gan {

using ad::NodeRef;
using ad::Tape;
using data::Sampler;
using nn::BoundParams;
using nn::ParamSet;

// A differentiable network: parameters plus a forward graph builder.
struct Network {
  using Forward = std::function<NodeRef(const BoundParams&, NodeRef)>;
  using Traced = std::function<std::vector<NodeRef>(const BoundParams&, NodeRef)>;

  ParamSet params;
  Forward forward;
  Traced traced;  // optional: one node per layer output, input side first

  // Value of the network on `x` with no gradient bookkeeping.
  Tensor evaluate(const Tensor& x) const;
};

Network mlp_network(const nn::MlpSpec& spec, std::uint64_t seed);
Network mlp_network(const nn::MlpSpec& spec, ParamSet params);

// ---- regimes and configuration -------------------------------------------

enum class Sidedness { two_sided, one_sided };

struct CriticRegime {
  enum Kind { clipping, gradient_penalty, standard_gan } kind = gradient_penalty;
  double clip = 0.01;
  double lambda = 10.0;
  Sidedness sided = Sidedness::two_sided;

  static CriticRegime clipped(double c);
  static CriticRegime penalty(double lambda = 10.0, Sidedness s = Sidedness::two_sided);
  static CriticRegime gan();

  bool is_wasserstein() const noexcept { return kind != standard_gan; }
  void validate() const;
};

// CLI spelling: gp, gp1, clip, gan.
std::string regime_name(const CriticRegime& r);
CriticRegime parse_regime(std::string_view name);

struct OptimizerConfig {
  enum class Kind { adam, rmsprop } kind = Kind::adam;
  optim::AdamHyper adam;
  optim::RmsPropHyper rmsprop;

  optim::Optimizer make() const;
  static OptimizerConfig default_for(const CriticRegime& regime);
};

const char* optimizer_name(OptimizerConfig::Kind k);

inline constexpr double kProbabilityClamp = 1e-7;

struct TrainConfig {
  CriticRegime regime;
  std::size_t n_critic = 5;
  std::size_t batch = 64;
  std::size_t iterations = 1000;  // generator iterations
  OptimizerConfig critic_opt;
  OptimizerConfig gen_opt;
  std::uint64_t seed = 0;
  // Wall-clock seconds go into the metrics only when enabled; they are the
  // one non-reproducible column.
  bool timing = false;

  void validate() const;
};

struct MetricsRow {
  std::size_t iter = 0;
  double critic_loss = 0.0;  // mean over the n_critic steps of this iteration
  double gen_loss = 0.0;
  double w_estimate = 0.0;    // mean D(x) - mean D(x~), unpenalized
  double gp_mean_norm = 0.0;  // mean ||grad D(x^)||
  double gp_msd = 0.0;        // mean (||grad D(x^)|| - 1)^2
  double seconds = 0.0;
};

inline constexpr std::string_view kMetricsHeader =
    "iter,critic_loss,gen_loss,w_estimate,gp_mean_norm,gp_msd,seconds";
std::string format_metrics_row(const MetricsRow& row);

// ---- objectives ----------------------------------------------------------

// x^_i = eps_i x_i + (1 - eps_i) x~_i for batches of any sample shape.
Tensor interpolate_samples(const Tensor& real, const Tensor& fake, const Tensor& eps);

struct PenaltyTerms {
  NodeRef penalty;  // rank 0, differentiable w.r.t. the critic parameters
  NodeRef norms;    // [m] per-example gradient norms
};

// Penalty on the critic gradient at x^, which must be a leaf on the tape.
PenaltyTerms gradient_penalty(const Network& critic, const BoundParams& params, NodeRef xhat,
                              double lambda, Sidedness sided);

// mean D(x~) - mean D(x) (+ penalty) for WGAN regimes; the logistic loss for
// standard_gan. `xhat` is only used by the penalty regime.
struct CriticLoss {
  NodeRef loss;
  NodeRef w_estimate;
  NodeRef norms;  // valid only when a penalty was built
};
CriticLoss critic_loss(const CriticRegime& regime, const Network& critic,
                       const BoundParams& params, NodeRef real, NodeRef fake, NodeRef xhat = {});

// -mean D(G(z)) for WGAN regimes; -mean log sigma(D(G(z))) for standard_gan.
NodeRef generator_loss(const CriticRegime& regime, const Network& critic,
                       const BoundParams& critic_params, const Network& generator,
                       const BoundParams& gen_params, NodeRef z);

struct NormStats {
  double mean = 0.0;
  double msd = 0.0;
  std::size_t count = 0;
};
NormStats norm_stats(const Tensor& norms);

// ---- training ------------------------------------------------------------

class TrainingDiverged : public NonFiniteError {
 public:
  TrainingDiverged(const std::string& what, std::size_t iteration, ParamSet last_gen,
                   ParamSet last_critic);
  std::size_t iteration() const noexcept { return iteration_; }
  const ParamSet& last_generator() const noexcept { return last_gen_; }
  const ParamSet& last_critic() const noexcept { return last_critic_; }

 private:
  std::size_t iteration_;
  ParamSet last_gen_;
  ParamSet last_critic_;
};

struct Hooks {
  std::function<void(const MetricsRow&)> on_row;
  // After every generator iteration, with the updated parameters.
  std::function<void(std::size_t iter, const ParamSet& gen, const ParamSet& critic)> on_iteration;
};

struct TrainResult {
  ParamSet generator;
  ParamSet critic;
  std::vector<MetricsRow> rows;
  std::uint64_t critic_steps = 0;
  std::uint64_t generator_steps = 0;
};

// Per generator iteration, n_critic critic updates on fresh real
// batches, latents and per-example eps, then one generator update.
TrainResult train(const TrainConfig& config, const Sampler& real, const Sampler& latent,
                  const Network& generator, const Network& critic, const Hooks& hooks = {});

// Trains only the critic against a fixed fake sampler; one row per critic step.
TrainResult train_critic(const TrainConfig& config, const Sampler& real, const Sampler& fake,
                         const Network& critic, std::size_t steps, const Hooks& hooks = {});

// Monte-Carlo estimate of mean D(x) - mean D(x~) over n draws from each side.
double estimate_wasserstein(const Network& critic, const Sampler& real, const Sampler& fake,
                            std::size_t n, std::uint64_t first = 0);

// Samples of `real` plus N(0, sigma^2 I) noise, paired index by index.
Sampler fixed_noisy_generator(const Sampler& real, double sigma = 1.0,
                              std::uint64_t noise_seed = 0x5EED);

// Draws G(z) for the latent samples first .. first+n-1.
Sampler generator_sampler(const Network& generator, const Sampler& latent);

}  // namespace gplab::gan

#include "gplab/gan.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

namespace gplab::gan {
namespace {

constexpr std::uint64_t kEpsStream = 0xE951;
constexpr std::uint64_t kNoiseStream = 0x4015E;
constexpr std::size_t kEvalChunk = 4096;

Tensor evaluate_with(const Network& net, const ParamSet& params, const Tensor& x) {
  Tape tape;
  const BoundParams bound(tape, params, "", false);
  return net.forward(bound, tape.constant(x)).value();
}

Tensor sample_eps(Rng& rng, std::size_t m) {
  Tensor eps(Shape{m});
  for (auto& e : eps.values()) e = rng.uniform();
  return eps;
}

}  // namespace

Tensor Network::evaluate(const Tensor& x) const { return evaluate_with(*this, params, x); }

Network mlp_network(const nn::MlpSpec& spec, ParamSet params) {
  nn::check_params(spec, params);
  Network net;
  net.params = std::move(params);
  net.forward = [spec](const BoundParams& p, NodeRef x) { return nn::mlp_forward(spec, p, x); };
  net.traced = [spec](const BoundParams& p, NodeRef x) {
    return nn::mlp_forward_traced(spec, p, x);
  };
  return net;
}

Network mlp_network(const nn::MlpSpec& spec, std::uint64_t seed) {
  return mlp_network(spec, nn::init_params(spec, seed));
}

// ---- regimes -------------------------------------------------------------

CriticRegime CriticRegime::clipped(double c) {
  CriticRegime r;
  r.kind = clipping;
  r.clip = c;
  return r;
}

CriticRegime CriticRegime::penalty(double lambda, Sidedness s) {
  CriticRegime r;
  r.kind = gradient_penalty;
  r.lambda = lambda;
  r.sided = s;
  return r;
}

CriticRegime CriticRegime::gan() {
  CriticRegime r;
  r.kind = standard_gan;
  return r;
}

void CriticRegime::validate() const {
  if (kind == clipping && !(clip > 0.0)) throw ConfigError("clip threshold must be positive");
  if (kind == gradient_penalty && !(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
}

std::string regime_name(const CriticRegime& r) {
  switch (r.kind) {
    case CriticRegime::clipping: return "clip";
    case CriticRegime::gradient_penalty: return r.sided == Sidedness::one_sided ? "gp1" : "gp";
    case CriticRegime::standard_gan: return "gan";
  }
  return "?";
}

CriticRegime parse_regime(std::string_view name) {
  if (name == "gp") return CriticRegime::penalty();
  if (name == "gp1") return CriticRegime::penalty(10.0, Sidedness::one_sided);
  if (name == "clip") return CriticRegime::clipped(0.01);
  if (name == "gan") return CriticRegime::gan();
  throw ConfigError("unknown regime '" + std::string(name) + "'");
}

optim::Optimizer OptimizerConfig::make() const {
  if (kind == Kind::rmsprop) return optim::RmsProp(rmsprop);
  return optim::Adam(adam);
}

OptimizerConfig OptimizerConfig::default_for(const CriticRegime& regime) {
  OptimizerConfig c;
  if (regime.kind == CriticRegime::clipping) c.kind = Kind::rmsprop;
  return c;
}

const char* optimizer_name(OptimizerConfig::Kind k) {
  return k == OptimizerConfig::Kind::rmsprop ? "rmsprop" : "adam";
}

void TrainConfig::validate() const {
  regime.validate();
  if (n_critic < 1) throw ConfigError("ncritic must be at least 1");
  if (batch < 1) throw ConfigError("batch must be at least 1");
  critic_opt.make();
  gen_opt.make();
}

std::string format_metrics_row(const MetricsRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%.15g,%.15g,%.15g,%.15g,%.15g,%.15g", r.iter,
                r.critic_loss, r.gen_loss, r.w_estimate, r.gp_mean_norm, r.gp_msd, r.seconds);
  return buf;
}

// ---- objectives ----------------------------------------------------------

Tensor interpolate_samples(const Tensor& real, const Tensor& fake, const Tensor& eps) {
  if (real.shape() != fake.shape() || real.rank() < 1) {
    throw ShapeError("cannot interpolate " + shape_str(real.shape()) + " and " +
                     shape_str(fake.shape()));
  }
  const std::size_t m = real.dim(0);
  if (eps.shape() != Shape{m}) throw ShapeError("need one eps per example");
  const std::size_t width = real.size() / std::max<std::size_t>(m, 1);
  Tensor out(real.shape());
  for (std::size_t i = 0; i < m; ++i) {
    const double e = eps[i];
    if (!(e >= 0.0 && e <= 1.0)) throw Error("eps must lie in [0, 1]");
    for (std::size_t j = i * width; j < (i + 1) * width; ++j) {
      out[j] = e * real[j] + (1.0 - e) * fake[j];
    }
  }
  return out;
}

namespace {

NodeRef input_gradient_norms(const Network& critic, const BoundParams& params, NodeRef x) {
  Tape& tape = x.tape();
  const NodeRef g = tape.grad(ad::sum(critic.forward(params, x)), x);
  const std::size_t m = x.shape().at(0);
  return ad::row_norm(ad::reshape(g, Shape{m, shape_size(x.shape()) / m}));
}

}  // namespace

PenaltyTerms gradient_penalty(const Network& critic, const BoundParams& params, NodeRef xhat,
                              double lambda, Sidedness sided) {
  const NodeRef norms = input_gradient_norms(critic, params, xhat);
  NodeRef dev = norms - 1.0;
  if (sided == Sidedness::one_sided) dev = ad::maximum(dev, 0.0);
  return {ad::mean(ad::square(dev)) * lambda, norms};
}

namespace {

NodeRef log_prob(NodeRef score, bool real) {
  NodeRef p = ad::clamp(ad::sigmoid(score), kProbabilityClamp, 1.0 - kProbabilityClamp);
  return ad::log(real ? p : 1.0 - p);
}

}  // namespace

CriticLoss critic_loss(const CriticRegime& regime, const Network& critic,
                       const BoundParams& params, NodeRef real, NodeRef fake, NodeRef xhat) {
  const NodeRef d_real = critic.forward(params, real);
  const NodeRef d_fake = critic.forward(params, fake);
  CriticLoss out;
  out.w_estimate = ad::mean(d_real) - ad::mean(d_fake);
  if (regime.kind == CriticRegime::standard_gan) {
    out.loss = -ad::mean(log_prob(d_real, true)) - ad::mean(log_prob(d_fake, false));
    return out;
  }
  out.loss = -out.w_estimate;
  if (regime.kind == CriticRegime::gradient_penalty) {
    if (!xhat.valid()) throw Error("the gradient penalty needs interpolates");
    const PenaltyTerms gp = gradient_penalty(critic, params, xhat, regime.lambda, regime.sided);
    out.loss = out.loss + gp.penalty;
    out.norms = gp.norms;
  }
  return out;
}

NodeRef generator_loss(const CriticRegime& regime, const Network& critic,
                       const BoundParams& critic_params, const Network& generator,
                       const BoundParams& gen_params, NodeRef z) {
  const NodeRef score = critic.forward(critic_params, generator.forward(gen_params, z));
  if (regime.kind == CriticRegime::standard_gan) return -ad::mean(log_prob(score, true));
  return -ad::mean(score);
}

NormStats norm_stats(const Tensor& norms) {
  NormStats s;
  s.count = norms.size();
  if (s.count == 0) return s;
  for (double v : norms.values()) {
    s.mean += v;
    s.msd += (v - 1.0) * (v - 1.0);
  }
  s.mean /= static_cast<double>(s.count);
  s.msd /= static_cast<double>(s.count);
  return s;
}

// ---- training ------------------------------------------------------------

TrainingDiverged::TrainingDiverged(const std::string& what, std::size_t iteration,
                                   ParamSet last_gen, ParamSet last_critic)
    : NonFiniteError(what, iteration),
      iteration_(iteration),
      last_gen_(std::move(last_gen)),
      last_critic_(std::move(last_critic)) {}

namespace {

struct CriticStepResult {
  double loss = 0.0;
  double w_estimate = 0.0;
  NormStats norms;
};

CriticStepResult critic_step(const TrainConfig& cfg, const Network& critic, ParamSet& params,
                             optim::Optimizer& opt, const Tensor& real, const Tensor& fake,
                             const Tensor& eps) {
  Tape tape;
  const BoundParams bound(tape, params, "critic.", true);
  const NodeRef xr = tape.constant(real);
  const NodeRef xf = tape.constant(fake);
  const NodeRef xhat = tape.leaf("xhat", interpolate_samples(real, fake, eps));
  const CriticLoss cl = critic_loss(cfg.regime, critic, bound, xr, xf, xhat);
  // Norm statistics are logged in every regime; outside the penalty regime
  // they are measured but not optimized.
  const NodeRef norms =
      cl.norms.valid() ? cl.norms : input_gradient_norms(critic, bound, xhat);
  const auto grads = tape.grad(cl.loss, bound.nodes());
  optim::step(opt, params, nn::collect(params, grads));
  if (cfg.regime.kind == CriticRegime::clipping) optim::clip_weights(params, cfg.regime.clip);
  return {cl.loss.value().item(), cl.w_estimate.value().item(), norm_stats(norms.value())};
}

double generator_step(const TrainConfig& cfg, const Network& generator, ParamSet& gen_params,
                      const Network& critic, const ParamSet& critic_params,
                      optim::Optimizer& opt, const Tensor& z) {
  Tape tape;
  const BoundParams gp(tape, gen_params, "generator.", true);
  const BoundParams cp(tape, critic_params, "critic.", false);
  const NodeRef loss = generator_loss(cfg.regime, critic, cp, generator, gp, tape.constant(z));
  const auto grads = tape.grad(loss, gp.nodes());
  optim::step(opt, gen_params, nn::collect(gen_params, grads));
  return loss.value().item();
}

class Clock {
 public:
  explicit Clock(bool enabled) : enabled_(enabled), start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    if (!enabled_) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  bool enabled_;
  std::chrono::steady_clock::time_point start_;
};

void check_sample_shapes(const Sampler& real, const Sampler& fake_like, const char* what) {
  if (real.sample_shape() != fake_like.sample_shape()) {
    throw ShapeError(std::string(what) + " samples " + shape_str(fake_like.sample_shape()) +
                     " do not match real samples " + shape_str(real.sample_shape()));
  }
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const Sampler& real, const Sampler& latent,
                  const Network& generator, const Network& critic, const Hooks& hooks) {
  cfg.validate();
  TrainResult out;
  out.generator = generator.params;
  out.critic = critic.params;
  auto critic_opt = cfg.critic_opt.make();
  auto gen_opt = cfg.gen_opt.make();
  data::SampleStream real_stream(real);
  data::SampleStream latent_stream(latent);
  Rng eps_rng(cfg.seed, kEpsStream);
  const Clock clock(cfg.timing);
  const std::size_t m = cfg.batch;

  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    ParamSet last_gen = out.generator, last_critic = out.critic;
    MetricsRow row;
    row.iter = it;
    try {
      for (std::size_t t = 0; t < cfg.n_critic; ++t) {
        const Tensor x = real_stream.next(m);
        const Tensor fake = evaluate_with(generator, out.generator, latent_stream.next(m));
        if (fake.shape() != x.shape()) {
          throw ShapeError("generator output " + shape_str(fake.shape()) +
                           " does not match real batch " + shape_str(x.shape()));
        }
        const auto r = critic_step(cfg, critic, out.critic, critic_opt, x, fake,
                                   sample_eps(eps_rng, m));
        ++out.critic_steps;
        row.critic_loss += r.loss;
        row.w_estimate += r.w_estimate;
        row.gp_mean_norm += r.norms.mean;
        row.gp_msd += r.norms.msd;
      }
      const double k = static_cast<double>(cfg.n_critic);
      row.critic_loss /= k;
      row.w_estimate /= k;
      row.gp_mean_norm /= k;
      row.gp_msd /= k;
      row.gen_loss = generator_step(cfg, generator, out.generator, critic, out.critic, gen_opt,
                                    latent_stream.next(m));
      ++out.generator_steps;
    } catch (const NonFiniteError& e) {
      throw TrainingDiverged("training diverged at generator iteration " + std::to_string(it) +
                                 ": " + e.what(),
                             it, std::move(last_gen), std::move(last_critic));
    }
    row.seconds = clock.seconds();
    out.rows.push_back(row);
    if (hooks.on_row) hooks.on_row(row);
    if (hooks.on_iteration) hooks.on_iteration(it, out.generator, out.critic);
  }
  return out;
}

TrainResult train_critic(const TrainConfig& cfg, const Sampler& real, const Sampler& fake,
                         const Network& critic, std::size_t steps, const Hooks& hooks) {
  cfg.validate();
  check_sample_shapes(real, fake, "fake");
  TrainResult out;
  out.critic = critic.params;
  auto opt = cfg.critic_opt.make();
  data::SampleStream real_stream(real);
  data::SampleStream fake_stream(fake);
  Rng eps_rng(cfg.seed, kEpsStream);
  const Clock clock(cfg.timing);
  for (std::size_t it = 1; it <= steps; ++it) {
    ParamSet last = out.critic;
    MetricsRow row;
    row.iter = it;
    try {
      const Tensor x = real_stream.next(cfg.batch);
      const Tensor f = fake_stream.next(cfg.batch);
      const auto r = critic_step(cfg, critic, out.critic, opt, x, f,
                                 sample_eps(eps_rng, cfg.batch));
      ++out.critic_steps;
      row.critic_loss = r.loss;
      row.w_estimate = r.w_estimate;
      row.gp_mean_norm = r.norms.mean;
      row.gp_msd = r.norms.msd;
    } catch (const NonFiniteError& e) {
      throw TrainingDiverged("critic training diverged at step " + std::to_string(it) + ": " +
                                 e.what(),
                             it, {}, std::move(last));
    }
    row.seconds = clock.seconds();
    out.rows.push_back(row);
    if (hooks.on_row) hooks.on_row(row);
    if (hooks.on_iteration) hooks.on_iteration(it, out.generator, out.critic);
  }
  return out;
}

double estimate_wasserstein(const Network& critic, const Sampler& real, const Sampler& fake,
                            std::size_t n, std::uint64_t first) {
  if (n < 1) throw Error("estimate_wasserstein needs n >= 1");
  check_sample_shapes(real, fake, "fake");
  double sr = 0.0, sf = 0.0;
  for (std::size_t done = 0; done < n;) {
    const std::size_t k = std::min(kEvalChunk, n - done);
    const Tensor dr = critic.evaluate(real.draw(first + done, k));
    const Tensor df = critic.evaluate(fake.draw(first + done, k));
    for (double v : dr.values()) sr += v;
    for (double v : df.values()) sf += v;
    done += k;
  }
  return (sr - sf) / static_cast<double>(n);
}

Sampler fixed_noisy_generator(const Sampler& real, double sigma, std::uint64_t noise_seed) {
  if (!(sigma > 0.0)) throw ConfigError("noise sigma must be positive");
  return Sampler(real.sample_shape(), [real, sigma, noise_seed](std::uint64_t first,
                                                                 std::size_t n) {
    Tensor x = real.draw(first, n);
    const std::size_t width = n == 0 ? 0 : x.size() / n;
    Rng rng(noise_seed, kNoiseStream);
    for (std::size_t i = 0; i < n; ++i) {
      rng.seek((first + i) * 2 * width);
      for (std::size_t j = 0; j < width; ++j) x[i * width + j] += sigma * rng.normal();
    }
    return x;
  });
}

Sampler generator_sampler(const Network& generator, const Sampler& latent) {
  const Tensor probe = generator.evaluate(latent.draw(0, 1));
  const Shape shape(probe.shape().begin() + 1, probe.shape().end());
  return Sampler(shape, [generator, latent](std::uint64_t first, std::size_t n) {
    return generator.evaluate(latent.draw(first, n));
  });
}

}  // namespace gplab::gan

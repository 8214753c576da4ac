#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "gplab/fd_check.hpp"
#include "gplab/gan.hpp"

using namespace gplab;
using namespace gplab::gan;
using ad::ScalarGraph;

namespace {

// D(x) = w . x + b as a one-layer network.
Network linear_critic(std::vector<double> w, double b = 0.0) {
  ParamSet p;
  Tensor wt(Shape{1, w.size()}, w);
  p.add("fc0.weight", wt);
  p.add("fc0.bias", Tensor(Shape{1}, b));
  return mlp_network(nn::MlpSpec{{w.size(), 1}}, p);
}

Network identity_generator(std::size_t d) {
  Network g;
  ParamSet p;
  p.add("unused", Tensor::scalar(0.0));
  g.params = p;
  g.forward = [](const BoundParams& bp, NodeRef z) { return z + bp.at("unused"); };
  return g;
}

double penalty_value(const Network& critic, const Tensor& xhat, Sidedness s) {
  Tape t;
  const BoundParams bp(t, critic.params, "", true);
  return gradient_penalty(critic, bp, t.leaf("xhat", xhat), 10.0, s).penalty.value().item();
}

double loss_value(const CriticRegime& regime, const Network& critic, const Tensor& real,
                  const Tensor& fake, const Tensor& xhat) {
  Tape t;
  const BoundParams bp(t, critic.params, "", true);
  return critic_loss(regime, critic, bp, t.constant(real), t.constant(fake), t.leaf("xhat", xhat))
      .loss.value()
      .item();
}

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  Tensor t(Shape{r, c});
  for (auto& v : t.values()) v = scale * rng.normal();
  return t;
}

}  // namespace

TEST_SUITE("gan") {
  TEST_CASE("interpolate_samples") {
    const Tensor x = Tensor::matrix({{2, 0}, {1, 1}});
    const Tensor f = Tensor::matrix({{0, 0}, {3, 5}});
    CHECK(interpolate_samples(x, f, Tensor::vector({1, 1})) == x);
    CHECK(interpolate_samples(x, f, Tensor::vector({0, 0})) == f);
    const Tensor h = interpolate_samples(x, f, Tensor::vector({0.25, 0.5}));
    CHECK(h.at(0, 0) == 0.5);
    CHECK(h.at(0, 1) == 0.0);
    CHECK(h.at(1, 0) == 2.0);
    CHECK(h.at(1, 1) == 3.0);
    CHECK_THROWS_AS(interpolate_samples(x, Tensor(Shape{2, 3}), Tensor::vector({0, 0})),
                    ShapeError);
    CHECK_THROWS_AS(interpolate_samples(x, f, Tensor::vector({0.5})), ShapeError);
    CHECK_THROWS_AS(interpolate_samples(x, f, Tensor::vector({0.5, 1.5})), Error);
  }

  TEST_CASE("gradient penalty of linear critics") {
    Rng rng(1);
    const Tensor xhat = random_matrix(5, 2, rng);
    CHECK(penalty_value(linear_critic({3, 4}), xhat, Sidedness::two_sided) ==
          doctest::Approx(160.0).epsilon(1e-12));
    CHECK(penalty_value(linear_critic({3, 4}), xhat, Sidedness::one_sided) ==
          doctest::Approx(160.0).epsilon(1e-12));
    CHECK(penalty_value(linear_critic({0.3, 0.4}), xhat, Sidedness::two_sided) ==
          doctest::Approx(2.5).epsilon(1e-10));
    CHECK(penalty_value(linear_critic({0.3, 0.4}), xhat, Sidedness::one_sided) == 0.0);
    CHECK(penalty_value(linear_critic({0.6, 0.8}), xhat, Sidedness::two_sided) < 1e-20);
    CHECK(penalty_value(linear_critic({0.6, 0.8}), xhat, Sidedness::one_sided) < 1e-20);
    for (double s : {0.0, 0.1, 0.5, 0.99, 1.0 - 1e-9}) {
      CHECK(penalty_value(linear_critic({s * 0.6, s * 0.8}), xhat, Sidedness::one_sided) == 0.0);
    }
    // At exactly unit norm the 1e-12 stabilizer lifts the norm by ~5e-13.
    CHECK(penalty_value(linear_critic({0.6, 0.8}), xhat, Sidedness::one_sided) < 1e-23);
  }

  TEST_CASE("per-example norms cover every input coordinate") {
    // D(x) = sum(x) on [m, 2, 3] inputs has gradient norm sqrt(6) per example.
    Network critic;
    critic.params.add("s", Tensor::scalar(1.0));
    critic.forward = [](const BoundParams& p, NodeRef x) {
      return ad::reshape(ad::sum_last(ad::reshape(x, Shape{x.shape()[0], 6})), Shape{x.shape()[0], 1}) *
             p.at("s");
    };
    Tape t;
    const BoundParams bp(t, critic.params, "", true);
    const auto terms = gradient_penalty(critic, bp, t.leaf("x", Tensor(Shape{4, 2, 3}, 0.7)), 1.0,
                                        Sidedness::two_sided);
    for (double n : terms.norms.value().values()) CHECK(n == doctest::Approx(std::sqrt(6.0)));
  }

  TEST_CASE("critic loss examples") {
    const Tensor real = Tensor::matrix({{1, 0}});
    const Tensor fake = Tensor::matrix({{0, 0}});
    const Tensor xhat = Tensor::matrix({{0.3, 0}});
    CHECK(loss_value(CriticRegime::penalty(), linear_critic({1, 0}), real, fake, xhat) ==
          doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(loss_value(CriticRegime::clipped(0.01), linear_critic({0, 0}, 0.7), real, fake, xhat) ==
          0.0);
    CHECK(loss_value(CriticRegime::gan(), linear_critic({0, 0}), real, fake, xhat) ==
          doctest::Approx(2.0 * std::numbers::ln2).epsilon(1e-12));
  }

  TEST_CASE("generator loss examples") {
    Rng rng(3);
    const Tensor z = random_matrix(6, 2, rng);
    const Network g = identity_generator(2);
    auto value = [&](const CriticRegime& regime, const Network& critic) {
      Tape t;
      const BoundParams cp(t, critic.params, "c.", false);
      const BoundParams gp(t, g.params, "g.", true);
      return generator_loss(regime, critic, cp, g, gp, t.constant(z)).value().item();
    };
    double expected = 0.0;
    for (double v : z.values()) expected -= v;
    expected /= 6.0;
    CHECK(value(CriticRegime::penalty(), linear_critic({1, 1})) ==
          doctest::Approx(expected).epsilon(1e-12));
    CHECK(value(CriticRegime::gan(), linear_critic({0, 0})) ==
          doctest::Approx(std::numbers::ln2).epsilon(1e-12));
    CHECK(value(CriticRegime::clipped(1.0), linear_critic({0, 0}, 2.5)) == -2.5);
  }

  TEST_CASE("penalized critic loss passes second-order FD checks in the parameters") {
    for (auto act : {nn::Activation::tanh, nn::Activation::shifted_softplus}) {
      CAPTURE(nn::activation_name(act));
      const nn::MlpSpec spec{{2, 4, 3, 1}, {act}};
      for (std::uint64_t seed = 0; seed < 3; ++seed) {
        Rng rng(seed);
        const Network critic = mlp_network(spec, seed);
        const Tensor real = random_matrix(3, 2, rng), fake = random_matrix(3, 2, rng);
        const Tensor xhat = interpolate_samples(real, fake, Tensor::vector({0.2, 0.5, 0.9}));
        std::vector<Tensor> points;
        for (const auto& [name, t] : critic.params) points.push_back(t);
        for (auto sided : {Sidedness::two_sided, Sidedness::one_sided}) {
          const ScalarGraph f = [&](Tape& t, std::span<const NodeRef> in) {
            const BoundParams bp(critic.params, {in.begin(), in.end()});
            return critic_loss(CriticRegime::penalty(10.0, sided), critic, bp, t.constant(real),
                               t.constant(fake), t.constant(xhat))
                .loss;
          };
          CHECK(ad::check_gradient_fd(f, points, 1e-5, 1).max_error < 1e-5);
          CHECK(ad::check_gradient_fd(f, points, 1e-5, 2).max_error < 1e-4);
        }
      }
    }
  }

  TEST_CASE("one-sided penalty never exceeds the two-sided one") {
    Rng rng(8);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const Network critic = mlp_network(nn::MlpSpec{{2, 8, 1}, {nn::Activation::relu}}, seed);
      const Tensor xhat = random_matrix(16, 2, rng);
      CHECK(penalty_value(critic, xhat, Sidedness::one_sided) <=
            penalty_value(critic, xhat, Sidedness::two_sided));
    }
    const Network steep = linear_critic({2, 2});
    const Tensor xhat = random_matrix(16, 2, rng);
    CHECK(penalty_value(steep, xhat, Sidedness::one_sided) ==
          penalty_value(steep, xhat, Sidedness::two_sided));
  }

  TEST_CASE("penalized critic loss ignores batch order") {
    Rng rng(2);
    const Network critic = mlp_network(nn::MlpSpec{{2, 8, 8, 1}, {nn::Activation::relu}}, 4);
    const Tensor real = random_matrix(6, 2, rng), fake = random_matrix(6, 2, rng);
    const Tensor eps = Tensor::vector({0.1, 0.2, 0.3, 0.4, 0.5, 0.6});
    const std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
    Tensor pr(real.shape()), pf(fake.shape()), pe(eps.shape());
    for (std::size_t i = 0; i < 6; ++i) {
      pr.at(i, 0) = real.at(perm[i], 0), pr.at(i, 1) = real.at(perm[i], 1);
      pf.at(i, 0) = fake.at(perm[i], 0), pf.at(i, 1) = fake.at(perm[i], 1);
      pe[i] = eps[perm[i]];
    }
    const auto regime = CriticRegime::penalty();
    CHECK(loss_value(regime, critic, real, fake, interpolate_samples(real, fake, eps)) ==
          doctest::Approx(loss_value(regime, critic, pr, pf, interpolate_samples(pr, pf, pe)))
              .epsilon(1e-12));
  }

  TEST_CASE("training loop bookkeeping") {
    TrainConfig cfg;
    cfg.batch = 8;
    cfg.iterations = 3;
    const auto real = data::toy_sampler(data::ToyDistribution::eight_gaussians(), 1);
    const auto latent = data::latent_sampler(2, data::LatentKind::gaussian, 2);
    const Network gen = mlp_network(nn::MlpSpec{{2, 8, 2}, {nn::Activation::relu}}, 3);
    const Network critic = mlp_network(nn::MlpSpec{{2, 8, 1}, {nn::Activation::relu}}, 4);

    const TrainResult r = train(cfg, real, latent, gen, critic);
    CHECK(r.critic_steps == 15);
    CHECK(r.generator_steps == 3);
    REQUIRE(r.rows.size() == 3);
    CHECK(r.rows[2].iter == 3);
    CHECK(r.rows[0].seconds == 0.0);
    CHECK_FALSE(r.generator == gen.params);

    const TrainResult again = train(cfg, real, latent, gen, critic);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(format_metrics_row(r.rows[i]) == format_metrics_row(again.rows[i]));
    }
    CHECK(again.critic == r.critic);

    cfg.iterations = 0;
    const TrainResult none = train(cfg, real, latent, gen, critic);
    CHECK(none.rows.empty());
    CHECK(none.generator == gen.params);
    CHECK(none.critic == critic.params);
  }

  TEST_CASE("clipping keeps every critic weight inside the box") {
    TrainConfig cfg;
    cfg.regime = CriticRegime::clipped(0.05);
    cfg.critic_opt = OptimizerConfig::default_for(cfg.regime);
    cfg.critic_opt.rmsprop.lr = 1e-2;
    cfg.batch = 8;
    cfg.iterations = 4;
    const auto real = data::toy_sampler(data::ToyDistribution::swiss_roll(), 1);
    const auto latent = data::latent_sampler(2, data::LatentKind::uniform, 2);
    const Network gen = mlp_network(nn::MlpSpec{{2, 8, 2}, {nn::Activation::relu}}, 3);
    const Network critic = mlp_network(nn::MlpSpec{{2, 8, 8, 1}, {nn::Activation::relu}}, 4);
    std::size_t checked = 0;
    Hooks hooks;
    hooks.on_iteration = [&](std::size_t, const ParamSet&, const ParamSet& c) {
      CHECK(optim::max_abs(c) <= 0.05);
      ++checked;
    };
    const TrainResult r = train(cfg, real, latent, gen, critic, hooks);
    CHECK(checked == 4);
    CHECK(r.critic_steps == 20);
  }

  TEST_CASE("standard GAN regime trains with finite losses") {
    TrainConfig cfg;
    cfg.regime = CriticRegime::gan();
    cfg.batch = 8;
    cfg.iterations = 3;
    cfg.n_critic = 1;
    const auto real = data::toy_sampler(data::ToyDistribution::eight_gaussians(), 1);
    const auto latent = data::latent_sampler(2, data::LatentKind::gaussian, 2);
    const Network gen = mlp_network(nn::MlpSpec{{2, 8, 2}, {nn::Activation::relu}}, 3);
    const Network critic = mlp_network(nn::MlpSpec{{2, 8, 1}, {nn::Activation::relu}}, 4);
    const TrainResult r = train(cfg, real, latent, gen, critic);
    for (const auto& row : r.rows) {
      CHECK(std::isfinite(row.critic_loss));
      CHECK(row.critic_loss > 0.0);
      CHECK(row.gen_loss > 0.0);
    }
  }

  TEST_CASE("divergence reports the last good parameters") {
    const auto base = data::toy_sampler(data::ToyDistribution::eight_gaussians(), 1);
    const data::Sampler poisoned(Shape{2}, [base](std::uint64_t first, std::size_t n) {
      Tensor x = base.draw(first, n);
      if (first >= 40) x[0] = std::numeric_limits<double>::infinity();
      return x;
    });
    TrainConfig cfg;
    cfg.batch = 4;
    cfg.iterations = 10;
    const auto latent = data::latent_sampler(2, data::LatentKind::gaussian, 2);
    const Network gen = mlp_network(nn::MlpSpec{{2, 4, 2}, {nn::Activation::relu}}, 3);
    const Network critic = mlp_network(nn::MlpSpec{{2, 4, 1}, {nn::Activation::relu}}, 4);
    ParamSet after_two;
    Hooks hooks;
    hooks.on_iteration = [&](std::size_t it, const ParamSet&, const ParamSet& c) {
      if (it == 2) after_two = c;
    };
    try {
      train(cfg, poisoned, latent, gen, critic, hooks);
      FAIL("expected divergence");
    } catch (const TrainingDiverged& e) {
      // 5 critic batches of 4 per iteration: index 40 is read in iteration 3.
      CHECK(e.iteration() == 3);
      CHECK(e.last_critic() == after_two);
    }
  }

  TEST_CASE("estimate_wasserstein") {
    const Network d = linear_critic({1});
    const auto one = data::toy_sampler(data::ToyDistribution::gaussian_1d(1.0, 0.0), 0);
    const auto zero = data::toy_sampler(data::ToyDistribution::gaussian_1d(0.0, 0.0), 0);
    CHECK(estimate_wasserstein(d, one, zero, 100) == 1.0);
    const auto a = data::toy_sampler(data::ToyDistribution::gaussian_1d(0.0, 1.0), 5);
    CHECK(estimate_wasserstein(d, a, a, 1000) == 0.0);
    const auto r = data::toy_sampler(data::ToyDistribution::gaussian_1d(3.0, 1.0), 6);
    const auto f = data::toy_sampler(data::ToyDistribution::gaussian_1d(0.0, 1.0), 7);
    const double se = std::sqrt(2.0 / 1e5);
    CHECK(std::abs(estimate_wasserstein(d, r, f, 100000) - 3.0) < 3.0 * se);
  }

  TEST_CASE("fixed noisy generator") {
    const auto real = data::toy_sampler(data::ToyDistribution::swiss_roll(), 3);
    const std::size_t n = 100000;
    const Tensor x = real.draw(0, n);
    const Tensor tiny = fixed_noisy_generator(real, 1e-6).draw(0, n);
    double max_disp = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) max_disp = std::max(max_disp, std::abs(tiny[i] - x[i]));
    CHECK(max_disp < 1e-5);

    const double sigma = 1.0;
    const Tensor y = fixed_noisy_generator(real, sigma).draw(0, n);
    for (std::size_t j = 0; j < 2; ++j) {
      double s = 0.0, s2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = y[i * 2 + j] - x[i * 2 + j];
        s += d;
        s2 += d * d;
      }
      const double mean = s / static_cast<double>(n);
      const double var = s2 / static_cast<double>(n) - mean * mean;
      CHECK(std::abs(mean) < 3.0 * sigma / std::sqrt(static_cast<double>(n)));
      CHECK(std::abs(var - sigma * sigma) < 0.05 * sigma * sigma);
    }
    CHECK(fixed_noisy_generator(real).draw(10, 5) == fixed_noisy_generator(real).draw(0, 15).rows(10, 15));
    CHECK_THROWS_AS(fixed_noisy_generator(real, 0.0), ConfigError);
  }

  TEST_CASE("regime names and defaults") {
    for (const char* n : {"gp", "gp1", "clip", "gan"}) CHECK(regime_name(parse_regime(n)) == n);
    CHECK_THROWS_AS(parse_regime("wgan"), ConfigError);
    TrainConfig cfg;
    CHECK(cfg.regime.lambda == 10.0);
    CHECK(cfg.n_critic == 5);
    CHECK(cfg.critic_opt.kind == OptimizerConfig::Kind::adam);
    CHECK(cfg.critic_opt.adam.lr == 1e-4);
    CHECK(cfg.critic_opt.adam.beta1 == 0.0);
    CHECK(cfg.critic_opt.adam.beta2 == 0.9);
    const auto clip = OptimizerConfig::default_for(CriticRegime::clipped(0.01));
    CHECK(clip.kind == OptimizerConfig::Kind::rmsprop);
    CHECK(clip.rmsprop.lr == 5e-5);
    cfg.n_critic = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    CHECK_THROWS_AS(CriticRegime::clipped(0.0).validate(), ConfigError);
    CHECK_THROWS_AS(CriticRegime::penalty(-1.0).validate(), ConfigError);
  }
}

#include <doctest.h>

#include <cmath>
#include <sstream>

#include "gplab/diagnostics.hpp"

using namespace gplab;
using namespace gplab::diag;
using gan::mlp_network;

namespace {

Network linear_critic(std::vector<double> w, double b = 0.0) {
  ParamSet p;
  p.add("fc0.weight", Tensor(Shape{1, w.size()}, w));
  p.add("fc0.bias", Tensor(Shape{1}, b));
  return mlp_network(nn::MlpSpec{{w.size(), 1}}, p);
}

Tensor random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(Shape{r, c});
  for (auto& v : t.values()) v = rng.normal();
  return t;
}

}  // namespace

TEST_SUITE("diagnostics") {
  TEST_CASE("value surface examples") {
    const GridSpec grid{-1.0, 1.0, -2.0, 2.0, 3, 5};
    const Surface sx = value_surface(linear_critic({1, 0}), grid);
    for (std::size_t j = 0; j < 5; ++j)
      for (std::size_t i = 0; i < 3; ++i) CHECK(sx.at(i, j) == grid.x(i));
    const Surface sc = value_surface(linear_critic({0, 0}, 1.5), grid);
    for (double v : sc.values) CHECK(v == 1.5);
    const Surface s12 = value_surface(linear_critic({1, 2}), GridSpec{-1, 1, -1, 1, 3, 3});
    CHECK(s12.at(2, 2) == 3.0);
    CHECK(s12.at(0, 0) == -3.0);
    CHECK_THROWS_AS(value_surface(linear_critic({1, 0}), GridSpec{0, 1, 0, 1, 1, 3}), ConfigError);
    CHECK_THROWS_AS(value_surface(linear_critic({1, 0}), GridSpec{1, 1, 0, 1, 3, 3}), ConfigError);
  }

  TEST_CASE("surface files are reproducible") {
    const Network critic = mlp_network(nn::MlpSpec{{2, 16, 16, 1}, {nn::Activation::relu}}, 5);
    auto render = [&] {
      std::ostringstream csv, svg;
      const Surface s = value_surface(critic, GridSpec{});
      write_surface_csv(csv, s);
      const Tensor pts = random_matrix(10, 2, 1);
      write_surface_svg(svg, s, &pts);
      return csv.str() + svg.str();
    };
    const std::string a = render();
    CHECK(a == render());
    std::istringstream in(a);
    std::string line;
    std::getline(in, line);
    CHECK(line == "x,y,value");
    std::size_t rows = 0;
    while (std::getline(in, line) && line.rfind("<svg", 0) != 0) ++rows;
    CHECK(rows == 64 * 64);
  }

  TEST_CASE("layer gradient norm examples") {
    const Network single = mlp_network(nn::MlpSpec{{3, 4}}, 1);
    const Tensor batch = random_matrix(5, 3, 2);
    const LossBuilder sum_out = [](const std::vector<NodeRef>& t) { return ad::sum(t.back()); };
    const auto norms = layer_gradient_norms(single, sum_out, batch);
    REQUIRE(norms.size() == 1);
    CHECK(norms[0] == doctest::Approx(std::sqrt(5.0 * 4.0)).epsilon(1e-14));

    const Network deep = mlp_network(nn::MlpSpec{{3, 6, 6, 6, 1}, {nn::Activation::tanh}}, 4);
    const LossBuilder first_only = [](const std::vector<NodeRef>& t) {
      return ad::sum(ad::square(t[0]));
    };
    const auto head = layer_gradient_norms(deep, first_only, batch);
    REQUIRE(head.size() == 4);
    CHECK(head[0] > 0.0);
    CHECK(head[1] == 0.0);
    CHECK(head[3] == 0.0);

    const LossBuilder base = [](const std::vector<NodeRef>& t) { return ad::mean(t.back()); };
    const auto n1 = layer_gradient_norms(deep, base, batch);
    for (double k : {2.0, -0.5}) {
      const LossBuilder scaled = [&](const std::vector<NodeRef>& t) { return base(t) * k; };
      const auto nk = layer_gradient_norms(deep, scaled, batch);
      for (std::size_t l = 0; l < n1.size(); ++l) CHECK(nk[l] == std::abs(k) * n1[l]);
    }
  }

  TEST_CASE("fresh deep critics have finite, nonzero layer norms") {
    const nn::MlpSpec spec{{2, 64, 64, 64, 64, 64, 64, 64, 64, 64, 64, 64, 1},
                           {nn::Activation::relu}};
    const Network critic = mlp_network(spec, 9);
    const std::size_t m = 16;
    const Tensor batch = concat_rows(data::sample_toy(data::ToyDistribution::swiss_roll(), 1, m),
                                     random_matrix(m, 2, 3));
    const auto norms = layer_gradient_norms(critic, wgan_critic_objective(m), batch);
    CHECK(norms.size() == 12);
    for (double n : norms) {
      CHECK(std::isfinite(n));
      CHECK(n > 0.0);
    }
  }

  TEST_CASE("least-squares slopes") {
    CHECK(log_norm_slope({1.0, std::exp(-1.0), std::exp(-2.0)}) == doctest::Approx(-1.0));
    CHECK(least_squares_slope({0, 1, 2, 3}, {1, 3, 5, 7}) == doctest::Approx(2.0));
    CHECK_THROWS_AS(least_squares_slope({1}, {1}), Error);
    CHECK(moving_average({1, 2, 3, 4}, 2) == std::vector<double>{1.5, 2.5, 3.5});
    CHECK(moving_average({1, 2}, 3).empty());
  }

  TEST_CASE("weight histogram examples") {
    const double c = 0.01;
    const Histogram h = histogram({-c, -c, c}, 2, -c, c);
    CHECK(h.counts == std::vector<std::size_t>{2, 1});
    CHECK(h.edges == std::vector<double>{-c, 0.0, c});
    CHECK(weight_histogram(ParamSet{}, 4, -1, 1).counts == std::vector<std::size_t>(4, 0));
    CHECK(histogram({-5.0, 5.0}, 3, -1, 1).counts == std::vector<std::size_t>{1, 0, 1});
    CHECK_THROWS_AS(histogram({}, 4, 1.0, 1.0), ConfigError);
    CHECK_THROWS_AS(histogram({}, 1, 0.0, 1.0), ConfigError);

    Rng rng(12);
    std::vector<double> u(100000);
    for (auto& v : u) v = rng.uniform(-1.0, 1.0);
    const Histogram hu = histogram(u, 10, -1.0, 1.0);
    CHECK(hu.total() == 100000);
    const double sd = std::sqrt(100000 * 0.1 * 0.9);
    for (auto k : hu.counts) CHECK(std::abs(static_cast<double>(k) - 10000.0) < 3 * sd);

    std::ostringstream csv;
    write_histogram_csv(csv, h);
    CHECK(csv.str() == "bin_lo,bin_hi,count\n-0.01,0,2\n0,0.01,1\n");
  }

  TEST_CASE("weights-only entries skip biases and norms") {
    const ParamSet p = nn::init_params(nn::MlpSpec{{2, 3, 1}, {nn::Activation::relu}, true}, 0);
    CHECK(weight_entries(p).size() == 2 * 3 + 3);
    CHECK(all_entries(p).size() == p.count());
  }

  TEST_CASE("penalty norm statistics") {
    const Tensor x = random_matrix(50, 2, 4);
    const auto s5 = penalty_norm_stats(linear_critic({3, 4}), x);
    CHECK(s5.mean == doctest::Approx(5.0));
    CHECK(s5.msd == doctest::Approx(16.0));
    const auto s1 = penalty_norm_stats(linear_critic({0.6, 0.8}), x);
    CHECK(s1.mean == doctest::Approx(1.0));
    CHECK(s1.msd < 1e-20);

    const Network critic = mlp_network(nn::MlpSpec{{2, 8, 8, 1}, {nn::Activation::relu}}, 2);
    const Tensor a = random_matrix(30, 2, 5), b = random_matrix(70, 2, 6);
    const auto sa = penalty_norm_stats(critic, a), sb = penalty_norm_stats(critic, b);
    const auto sab = penalty_norm_stats(critic, concat_rows(a, b));
    CHECK(sab.mean == doctest::Approx((30 * sa.mean + 70 * sb.mean) / 100).epsilon(1e-12));
    CHECK(sab.msd == doctest::Approx((30 * sa.msd + 70 * sb.msd) / 100).epsilon(1e-12));
  }

  TEST_CASE("train/validation split evaluation") {
    const Tensor train = Tensor::matrix({{1, 0}, {3, 0}});
    const Tensor val = Tensor::matrix({{0, 0}, {2, 0}});
    const Tensor fake = Tensor::matrix({{-1, 0}});
    const TrackPoint p = evaluate_split(linear_critic({1, 0}), train, val, fake);
    CHECK(p.train_negloss == 3.0);
    CHECK(p.validation_negloss == 2.0);
    CHECK(p.gap() == 1.0);
    CHECK(evaluate_split(linear_critic({1, 0}), train, train, fake).gap() == 0.0);
    const TrackPoint c = evaluate_split(linear_critic({0, 0}, 4.0), train, val, fake);
    CHECK(c.train_negloss == 0.0);
    CHECK(c.validation_negloss == 0.0);
  }

  TEST_CASE("tracker cadence") {
    const Network critic = mlp_network(nn::MlpSpec{{2, 4, 1}, {nn::Activation::relu}}, 1);
    const Network gen = mlp_network(nn::MlpSpec{{2, 4, 2}, {nn::Activation::relu}}, 2);
    const Tensor train = random_matrix(8, 2, 1), val = random_matrix(8, 2, 2);
    TrainValTracker tracker(critic, gen, train, train, random_matrix(8, 2, 3));
    for (std::size_t it = 1; it <= 25; ++it) tracker.observe(it, gen.params, critic.params);
    REQUIRE(tracker.points().size() == 2);
    CHECK(tracker.points()[0].iter == 10);
    CHECK(tracker.points()[1].iter == 20);
    CHECK(tracker.points()[1].gap() == 0.0);
    std::ostringstream csv;
    write_track_csv(csv, tracker.points());
    CHECK(csv.str().rfind("iter,train_negloss,validation_negloss,gap\n", 0) == 0);
  }

  TEST_CASE("line plots render") {
    std::ostringstream svg;
    write_lines_svg(svg, {{"a", {0, 1, 2}, {1, 0, 1}}, {"b", {0, 2}, {3, 3}}}, "demo");
    CHECK(svg.str().find("<polyline") != std::string::npos);
    CHECK(svg.str().find("demo") != std::string::npos);
  }
}

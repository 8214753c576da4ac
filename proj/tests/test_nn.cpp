#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "gplab/fd_check.hpp"
#include "gplab/nn.hpp"

using namespace gplab;
using namespace gplab::nn;
using gplab::ad::ScalarGraph;

namespace {

Tensor eval_linear(const Tensor& W, const Tensor& b, const Tensor& x) {
  Tape t;
  return linear_forward(t.constant(W), t.constant(b), t.constant(x)).value();
}

Tensor eval_conv(const Tensor& K, const Tensor& b, const Tensor& x) {
  Tape t;
  return conv1d_forward(t.constant(K), t.constant(b), t.constant(x)).value();
}

Tensor random_tensor(Shape s, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(s));
  for (auto& v : t.values()) v = scale * rng.normal();
  return t;
}

// ||d out / d x||^2 summed over the batch: the quantity the gradient penalty
// differentiates, expressed as a function of (x, params...).
ScalarGraph grad_norm_probe(std::function<NodeRef(std::span<const NodeRef>)> layer) {
  return [layer](Tape& t, std::span<const NodeRef> in) {
    const NodeRef out = layer(in);
    const NodeRef gx = t.grad(ad::sum(out * out), in[0]);
    return ad::sum(ad::square(gx));
  };
}

}  // namespace

TEST_SUITE("nn") {
  TEST_CASE("linear_forward examples") {
    const Tensor x = Tensor::matrix({{1, 1}});
    CHECK(eval_linear(Tensor::matrix({{1, 2}, {3, 4}}), Tensor::vector({0, 0}), x) ==
          Tensor::matrix({{3, 7}}));
    const Tensor y = Tensor::matrix({{0.25, -4}, {2, 3}});
    CHECK(eval_linear(Tensor::matrix({{1, 0}, {0, 1}}), Tensor::vector({0, 0}), y) == y);
    CHECK(eval_linear(Tensor(Shape{2, 2}), Tensor::vector({5, 5}), y) ==
          Tensor::matrix({{5, 5}, {5, 5}}));
    CHECK_THROWS_AS(eval_linear(Tensor(Shape{2, 3}), Tensor::vector({0, 0}), y), ShapeError);
  }

  TEST_CASE("conv1d_forward examples") {
    const Tensor x(Shape{1, 1, 4}, {1, 2, 3, 4});
    CHECK(eval_conv(Tensor(Shape{1, 1, 3}, {1, 0, -1}), Tensor::vector({0}), x) ==
          Tensor(Shape{1, 1, 2}, {-2, -2}));
    CHECK(eval_conv(Tensor(Shape{1, 1, 1}, {2.5}), Tensor::vector({0}), x) ==
          Tensor(Shape{1, 1, 4}, {2.5, 5, 7.5, 10}));
    CHECK(eval_conv(Tensor(Shape{1, 1, 3}), Tensor::vector({0.75}), x) ==
          Tensor(Shape{1, 1, 2}, {0.75, 0.75}));
    CHECK_THROWS_AS(eval_conv(Tensor(Shape{1, 1, 5}), Tensor::vector({0}), x), ShapeError);
  }

  TEST_CASE("layer_norm_forward examples") {
    Tape t;
    const NodeRef gain = t.constant(Tensor::vector({1, 1}));
    const NodeRef bias = t.constant(Tensor::vector({0, 0}));
    const Tensor y = layer_norm_forward(gain, bias, t.constant(Tensor::matrix({{1, 3}}))).value();
    // mean 2, population variance 1.
    CHECK(y[0] == doctest::Approx(-1.0 / std::sqrt(1.0 + kLayerNormEpsilon)).epsilon(1e-12));
    CHECK(y[1] == doctest::Approx(1.0 / std::sqrt(1.0 + kLayerNormEpsilon)).epsilon(1e-12));

    const NodeRef g3 = t.constant(Tensor::vector({2, 2, 2}));
    const NodeRef b3 = t.constant(Tensor::vector({0.5, -1, 3}));
    const Tensor c = layer_norm_forward(g3, b3, t.constant(Tensor::matrix({{4, 4, 4}}))).value();
    CHECK(c == Tensor::matrix({{0.5, -1, 3}}));

    // Rows are normalized independently.
    const Tensor rows = Tensor::matrix({{1, 5, 2}, {-3, 0, 9}});
    const Tensor swapped = Tensor::matrix({{-3, 0, 9}, {1, 5, 2}});
    const NodeRef g = t.constant(Tensor::vector({1.5, 0.5, 2}));
    const NodeRef b = t.constant(Tensor::vector({0, 1, -1}));
    const Tensor a1 = layer_norm_forward(g, b, t.constant(rows)).value();
    const Tensor a2 = layer_norm_forward(g, b, t.constant(swapped)).value();
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(a1.at(0, j) == a2.at(1, j));
      CHECK(a1.at(1, j) == a2.at(0, j));
    }
  }

  TEST_CASE("layer norm statistics before gain and bias") {
    Rng rng(3);
    Tape t;
    // Variance shrinks by var / (var + eps), so rows need var >> 10 eps.
    const Tensor x = random_tensor({16, 9}, rng, 10.0);
    const Tensor y = ad::normalize_last(t.constant(x), kLayerNormEpsilon).value();
    for (std::size_t r = 0; r < 16; ++r) {
      double mean = 0, var = 0;
      for (std::size_t j = 0; j < 9; ++j) mean += y.at(r, j) / 9.0;
      for (std::size_t j = 0; j < 9; ++j) var += (y.at(r, j) - mean) * (y.at(r, j) - mean) / 9.0;
      CHECK(std::abs(mean) < 1e-6);
      CHECK(std::abs(var - 1.0) < 1e-6);
    }
  }

  TEST_CASE("apply_activation examples") {
    Tape t;
    auto act = [&](ActivationKind k, double v) {
      return apply_activation(k, t.constant(Tensor::scalar(v))).value().item();
    };
    CHECK(act({Activation::relu}, -2) == 0.0);
    CHECK(act({Activation::relu}, 3) == 3.0);
    CHECK(act({Activation::leaky_relu, 0.2}, -1) == doctest::Approx(-0.2));
    CHECK(act({Activation::tanh}, 0.5) == doctest::Approx(std::tanh(0.5)));
    const ActivationKind ssp{Activation::shifted_softplus};
    CHECK(act(ssp, -50) == doctest::Approx(-1.0));
    CHECK(act(ssp, 50) == doctest::Approx(50.0));
    CHECK(act(ssp, 0) == doctest::Approx(std::log(1.0 + std::exp(2.0)) / 2.0 - 1.0).epsilon(1e-14));
    CHECK(parse_activation("shifted_softplus") == Activation::shifted_softplus);
    CHECK_THROWS_AS(parse_activation("elu"), ConfigError);
  }

  TEST_CASE("init_params") {
    const MlpSpec spec{{3, 8, 8, 1}, {Activation::relu}};
    const ParamSet a = init_params(spec, 11);
    const ParamSet b = init_params(spec, 11);
    CHECK(a == b);
    CHECK(!(a == init_params(spec, 12)));
    for (const auto& [name, t] : a) {
      if (name.ends_with(".bias")) {
        for (double v : t.values()) CHECK(v == 0.0);
      }
    }

    // He-uniform: variance 2 / fan_in.
    const ParamSet big = init_params(MlpSpec{{128, 128}, {Activation::relu}}, 5);
    const Tensor& w = big.at("fc0.weight");
    double m = 0, v = 0;
    for (double x : w.values()) m += x / static_cast<double>(w.size());
    for (double x : w.values()) v += (x - m) * (x - m) / static_cast<double>(w.size() - 1);
    CHECK(std::abs(v - 2.0 / 128.0) < 0.2 * 2.0 / 128.0);

    const ParamSet ln = init_params(MlpSpec{{2, 4, 1}, {Activation::tanh}, true}, 1);
    CHECK(ln.contains("ln0.gain"));
    CHECK(!ln.contains("ln1.gain"));
    CHECK(ln.at("ln0.gain") == Tensor(Shape{4}, 1.0));
    CHECK_THROWS_AS(init_params(MlpSpec{{2}, {}}, 0), ConfigError);
    CHECK_THROWS_AS(init_params(MlpSpec{{2, 0, 1}, {}}, 0), ConfigError);
  }

  TEST_CASE("mlp_forward examples") {
    {
      const MlpSpec one{{2, 2}, {Activation::relu}};
      ParamSet p = init_params(one, 4);
      p.at("fc0.bias") = Tensor::vector({0.5, -0.25});
      Tape t;
      const BoundParams bp(t, p, "", false);
      const Tensor x = Tensor::matrix({{1, -2}, {0.5, 3}});
      CHECK(mlp_forward(one, bp, t.constant(x)).value() ==
            eval_linear(p.at("fc0.weight"), p.at("fc0.bias"), x));
    }
    {
      const MlpSpec spec{{2, 5, 5, 1}, {Activation::leaky_relu, 0.2}, true};
      ParamSet p = init_params(spec, 4);
      for (auto& [name, t] : p)
        if (name.starts_with("fc")) t = Tensor(t.shape());
      Tape tp;
      const Tensor out = mlp_forward(spec, BoundParams(tp, p, "", false),
                                     tp.constant(Tensor::matrix({{3, -1}, {7, 2}})))
                             .value();
      CHECK(out == Tensor(Shape{2, 1}));
    }
    {
      // Hand evaluation: h = relu(W0 x + b0) = relu(-1, 3) = (0, 3); out = 1*0 + 3*3 + 0.5.
      const MlpSpec spec{{2, 2, 1}, {Activation::relu}};
      ParamSet p;
      p.add("fc0.weight", Tensor::matrix({{1, -1}, {2, 1}}));
      p.add("fc0.bias", Tensor::vector({0, -1}));
      p.add("fc1.weight", Tensor::matrix({{1, 3}}));
      p.add("fc1.bias", Tensor::vector({0.5}));
      check_params(spec, p);
      Tape t;
      const Tensor out =
          mlp_forward(spec, BoundParams(t, p, "", false), t.constant(Tensor::matrix({{1, 2}})))
              .value();
      CHECK(out.item() == 9.5);
    }
    {
      const MlpSpec spec{{2, 3, 1}, {Activation::relu}};
      ParamSet p = init_params(MlpSpec{{2, 4, 1}, {Activation::relu}}, 0);
      CHECK_THROWS_AS(check_params(spec, p), ShapeError);
      Tape t;
      CHECK_THROWS_AS(mlp_forward(spec, BoundParams(t, init_params(spec, 0), "", false),
                                  t.constant(Tensor(Shape{1, 3}))),
                      ShapeError);
    }
  }

  TEST_CASE("mlp trace has one tensor per layer") {
    const MlpSpec spec{{2, 6, 6, 6, 1}, {Activation::relu}};
    Tape t;
    const auto trace = mlp_forward_traced(spec, BoundParams(t, init_params(spec, 1), "", false),
                                          t.constant(Tensor(Shape{3, 2}, 0.5)));
    REQUIRE(trace.size() == 4);
    CHECK(trace[0].shape() == Shape{3, 6});
    CHECK(trace[3].shape() == Shape{3, 1});
  }

  TEST_CASE("layers pass FD checks through a gradient-norm probe") {
    Rng rng(21);
    struct Case {
      const char* name;
      std::vector<Tensor> points;
      std::function<NodeRef(std::span<const NodeRef>)> layer;
    };
    const std::vector<Case> cases = {
        {"linear",
         {random_tensor({3, 4}, rng), random_tensor({2, 4}, rng), random_tensor({2}, rng)},
         [](auto in) { return ad::tanh(linear_forward(in[1], in[2], in[0])); }},
        {"conv1d",
         {random_tensor({2, 2, 6}, rng), random_tensor({3, 2, 3}, rng, 0.5),
          random_tensor({3}, rng)},
         [](auto in) { return ad::tanh(conv1d_forward(in[1], in[2], in[0])); }},
        {"layer_norm",
         {random_tensor({3, 5}, rng), random_tensor({5}, rng), random_tensor({5}, rng)},
         [](auto in) { return ad::tanh(layer_norm_forward(in[1], in[2], in[0])); }},
        {"shifted_softplus", {random_tensor({2, 5}, rng)},
         [](auto in) { return apply_activation({Activation::shifted_softplus}, in[0]); }},
    };
    for (const auto& c : cases) {
      CAPTURE(c.name);
      const ScalarGraph probe = grad_norm_probe(c.layer);
      CHECK(ad::check_gradient_fd(probe, c.points, 1e-5, 1).max_error < 1e-4);
      CHECK(ad::check_gradient_fd(probe, c.points, 1e-5, 2).max_error < 1e-4);
    }

    // A small MLP end to end, w.r.t. the input and every parameter.
    for (auto act : {Activation::tanh, Activation::shifted_softplus}) {
      const MlpSpec spec{{2, 3, 1}, {act}, true};
      const ParamSet p = init_params(spec, 9);
      std::vector<Tensor> points{random_tensor({2, 2}, rng)};
      for (const auto& [name, t] : p) points.push_back(t);
      const ScalarGraph probe = [&](Tape& t, std::span<const NodeRef> in) {
        const BoundParams bp(p, std::vector<NodeRef>(in.begin() + 1, in.end()));
        const NodeRef gx = t.grad(ad::sum(mlp_forward(spec, bp, in[0])), in[0]);
        return ad::sum(ad::square(gx));
      };
      CHECK(ad::check_gradient_fd(probe, points, 1e-5, 1).max_error < 1e-4);
    }
  }

  TEST_CASE("critic networks have no cross-example coupling") {
    const MlpSpec spec{{3, 7, 7, 1}, {Activation::leaky_relu, 0.2}, true};
    const ParamSet p = init_params(spec, 2);
    Rng rng(8);
    const Tensor batch = random_tensor({5, 3}, rng);
    Tape t;
    const BoundParams bp(t, p, "", false);
    const Tensor all = mlp_forward(spec, bp, t.constant(batch)).value();
    for (std::size_t i = 0; i < 5; ++i) {
      const Tensor one = mlp_forward(spec, bp, t.constant(batch.rows(i, i + 1))).value();
      CHECK(one.item() == doctest::Approx(all[i]).epsilon(1e-12));
    }
  }

  TEST_CASE("parameter files round-trip bit-exactly") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      Rng rng(seed);
      ParamSet p = init_params(MlpSpec{{3, 4, 2}, {Activation::tanh}, seed % 2 == 0}, seed);
      Tensor odd(Shape{2, 3});
      odd.values() = {-0.0, std::numeric_limits<double>::denorm_min(),
                      std::numeric_limits<double>::max(), -1e-300, rng.normal(), 1.0 / 3.0};
      p.add("odd", odd);
      p.add("scalar", Tensor::scalar(rng.normal()));
      std::stringstream ss;
      save_params(ss, p, "seed=" + std::to_string(seed));
      const ParamSet q = load_params(ss);
      REQUIRE(q.same_layout(p));
      for (const auto& [name, t] : p) {
        const Tensor& u = q.at(name);
        for (std::size_t i = 0; i < t.size(); ++i) {
          CHECK(std::signbit(t[i]) == std::signbit(u[i]));
          CHECK(t[i] == u[i]);
        }
      }
    }
    std::stringstream bad("gplab-params 1\nw 1 2\n0x1p+0\n");
    CHECK_THROWS_AS(load_params(bad), Error);
    std::stringstream nomagic("w 1 1\n1p+0\n");
    CHECK_THROWS_AS(load_params(nomagic), Error);
  }
}

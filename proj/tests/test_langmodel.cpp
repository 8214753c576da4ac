#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "gplab/fd_check.hpp"
#include "gplab/langmodel.hpp"

using namespace gplab;
using namespace gplab::lm;

namespace {

data::CharCorpus abc_corpus(std::vector<std::string> lines = {}) {
  data::CharCorpus c;
  c.vocab = U"abc";
  c.pad = U'c';
  for (const auto& l : lines) c.sequences.push_back(c.encode(l));
  return c;
}

Tensor random_tensor(Shape s, Rng& rng, double sd = 1.0) {
  Tensor t(std::move(s));
  for (auto& v : t.values()) v = sd * rng.normal();
  return t;
}

// Direct JS evaluation from two probability tables.
double js_oracle(const std::map<std::string, double>& p, const std::map<std::string, double>& q) {
  std::map<std::string, double> keys;
  for (const auto& [k, v] : p) keys[k] = 0;
  for (const auto& [k, v] : q) keys[k] = 0;
  double js = 0.0;
  for (const auto& [k, unused] : keys) {
    const double a = p.contains(k) ? p.at(k) : 0.0;
    const double b = q.contains(k) ? q.at(k) : 0.0;
    const double m = 0.5 * (a + b);
    if (a > 0) js += 0.5 * a * std::log(a / m);
    if (b > 0) js += 0.5 * b * std::log(b / m);
  }
  return js;
}

// Random parameters everywhere, biases included, so no ReLU input sits
// exactly on its kink.
ParamSet randomized(ParamSet p, Rng& rng) {
  for (auto& [name, t] : p)
    for (auto& v : t.values()) v = 0.5 * rng.normal();
  return p;
}

}  // namespace

TEST_SUITE("langmodel") {
  TEST_CASE("generator outputs lie on the simplex") {
    const LmGeneratorSpec spec{16, 8, 5, 4};
    const Network g = generator_network(spec, 3);
    Rng rng(1);
    const Tensor z = random_tensor(Shape{6, 16}, rng);
    const Tensor out = g.evaluate(z);
    CHECK(out.shape() == Shape{6, 32, 4});
    CHECK(simplex_defect(out) < 1e-9);
    for (double v : out.values()) CHECK(v >= 0.0);
    CHECK(out == g.evaluate(z));
  }

  TEST_CASE("zero parameters give the uniform distribution") {
    const LmGeneratorSpec spec{8, 4, 3, 5};
    const ParamSet zero = init_generator(spec, 0).zeros_like();
    const Network g = generator_network(spec, zero);
    Rng rng(2);
    const Tensor out = g.evaluate(random_tensor(Shape{3, 8}, rng));
    for (double v : out.values()) CHECK(v == doctest::Approx(0.2).epsilon(1e-15));
  }

  TEST_CASE("upsampling repeats positions") {
    // With zero convolutions except an identity tap, each stage doubles the
    // positions by repetition, so logits at 2i and 2i+1 agree.
    const LmGeneratorSpec spec{2, 1, 3, 2, 8};
    ParamSet p = init_generator(spec, 0).zeros_like();
    p.at("fc0.weight") = Tensor(Shape{2, 2}, std::vector<double>{1, 0, 0, 1});
    p.at("conv1.weight") = Tensor(Shape{1, 1, 3}, std::vector<double>{0, 1, 0});
    p.at("conv2.weight") = Tensor(Shape{1, 1, 3}, std::vector<double>{0, 1, 0});
    p.at("out.weight") = Tensor(Shape{2, 1, 1}, std::vector<double>{1, -1});
    const Tensor out = generator_network(spec, p).evaluate(Tensor::matrix({{1.0, 2.0}}));
    const auto prob_a = [&](std::size_t t) { return out[t * 2]; };
    for (std::size_t t = 0; t < 4; ++t) CHECK(prob_a(t) == prob_a(0));
    for (std::size_t t = 4; t < 8; ++t) CHECK(prob_a(t) == prob_a(4));
    CHECK(prob_a(0) == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))));
    CHECK(prob_a(4) == doctest::Approx(1.0 / (1.0 + std::exp(-4.0))));
  }

  TEST_CASE("critic scores one-hot and soft inputs through one graph") {
    const LmCriticSpec spec{4, 6, 3, 2};
    const Network critic = critic_network(spec, 5);
    const auto corpus = data::synth_corpus("(ab|ba|c)*", 4, 1);
    REQUIRE(corpus.vocab_size() == 4);
    const Tensor real = data::encode_onehot(corpus);
    const Tensor fake = Tensor(real.shape(), 0.25);
    const Tensor both = concat_rows(real, fake);
    const Tensor sr = critic.evaluate(real), sf = critic.evaluate(fake);
    const Tensor sb = critic.evaluate(both);
    CHECK(sr.shape() == Shape{4, 1});
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(sb[i] == doctest::Approx(sr[i]).epsilon(1e-14));
      CHECK(sb[4 + i] == doctest::Approx(sf[i]).epsilon(1e-14));
    }
    CHECK_THROWS_AS(critic.evaluate(Tensor(Shape{2, 31, 4})), ShapeError);
  }

  TEST_CASE("interpolation examples") {
    Tensor real(Shape{1, 1, 2}, std::vector<double>{1, 0});
    Tensor fake(Shape{1, 1, 2}, std::vector<double>{0.5, 0.5});
    const Tensor mid = lm_interpolate(real, fake, Tensor::vector({0.5}));
    CHECK(mid[0] == 0.75);
    CHECK(mid[1] == 0.25);
    CHECK(lm_interpolate(real, fake, Tensor::vector({1.0})) == real);

    Rng rng(3);
    const auto corpus = data::synth_corpus(data::kDefaultGrammar, 8, 2);
    const Tensor onehots = data::encode_onehot(corpus);
    const Network g = generator_network(LmGeneratorSpec{8, 4, 3, corpus.vocab_size()}, 1);
    const Tensor soft = g.evaluate(random_tensor(Shape{8, 8}, rng));
    Tensor eps(Shape{8});
    for (auto& e : eps.values()) e = rng.uniform();
    CHECK(simplex_defect(lm_interpolate(onehots, soft, eps)) < 1e-9);
    CHECK_THROWS_AS(lm_interpolate(onehots, Tensor(Shape{8, 32, 2}), eps), ShapeError);
  }

  TEST_CASE("argmax decoding examples") {
    const auto corpus = abc_corpus();
    Tensor row(Shape{1, 3}, std::vector<double>{0.2, 0.5, 0.3});
    CHECK(decode_argmax(row, corpus) == "b");
    Tensor tie(Shape{1, 3}, std::vector<double>{0.5, 0.5, 0.0});
    CHECK(decode_argmax(tie, corpus) == "a");
    const std::string text = "abbaab";
    const auto seq = corpus.encode(text);
    const std::string decoded = decode_argmax(data::onehot(seq, 3), corpus);
    CHECK(decoded == corpus.decode(seq));
    CHECK(decoded.substr(0, 6) == text);
    CHECK_THROWS_AS(decode_argmax(Tensor(Shape{2, 4}), corpus), ShapeError);

    const auto grammar = data::synth_corpus(data::kDefaultGrammar, 5, 9);
    const auto batch = decode_batch(data::encode_onehot(grammar), grammar);
    for (std::size_t i = 0; i < 5; ++i) CHECK(batch[i] == grammar.decode(grammar.sequences[i]));
  }

  TEST_CASE("mean max probability") {
    CHECK(mean_max_probability(Tensor(Shape{2, 3, 4}, 0.25)) == 0.25);
    Tensor t(Shape{2, 2}, std::vector<double>{0.9, 0.1, 0.3, 0.7});
    CHECK(mean_max_probability(t) == doctest::Approx(0.8));
  }

  TEST_CASE("n-gram divergence examples") {
    const std::vector<std::string> a{"ab", "ba"}, b{"ba", "ab"};
    CHECK(ngram_divergence(a, b, 1) == 0.0);
    CHECK(ngram_divergence(a, b, 2) == 0.0);
    CHECK(ngram_divergence({"aa"}, {"bb"}, 1) == doctest::Approx(std::log(2.0)));
    CHECK(ngram_divergence({"ab"}, {"aa"}, 1) ==
          doctest::Approx(js_oracle({{"a", 0.5}, {"b", 0.5}}, {{"a", 1.0}})));
    CHECK(ngram_divergence({"abb"}, {"aab"}, 2) ==
          doctest::Approx(js_oracle({{"ab", 0.5}, {"bb", 0.5}}, {{"aa", 0.5}, {"ab", 0.5}})));
    CHECK_THROWS_AS(ngram_divergence({}, b, 1), Error);
    CHECK_THROWS_AS(ngram_divergence(a, std::vector<std::string>{}, 1), Error);

    const auto corpus = abc_corpus({"ab", "ba"});
    const std::vector<std::string> same{corpus.decode(corpus.sequences[1]),
                                        corpus.decode(corpus.sequences[0])};
    CHECK(ngram_divergence(same, corpus, 2) == 0.0);
    const double js = ngram_divergence({"ab"}, corpus, 1);
    CHECK(js > 0.0);
    CHECK(js <= std::log(2.0));
  }

  TEST_CASE("penalized critic loss on sequences passes FD checks") {
    const LmCriticSpec spec{3, 3, 3, 2, 8};
    for (std::uint64_t seed = 0; seed < 2; ++seed) {
      Rng rng(seed + 40);
      const Network critic = critic_network(spec, randomized(init_critic(spec, 0), rng));
      const Network g = generator_network(LmGeneratorSpec{4, 2, 3, 3, 8}, seed);
      const Tensor fake = g.evaluate(random_tensor(Shape{2, 4}, rng));
      Tensor real(Shape{2, 8, 3});
      for (std::size_t i = 0; i < 16; ++i) real[i * 3 + rng.below(3)] = 1.0;
      const Tensor xhat = lm_interpolate(real, fake, Tensor::vector({0.3, 0.8}));
      std::vector<Tensor> points;
      for (const auto& [name, t] : critic.params) points.push_back(t);
      const ad::ScalarGraph f = [&](ad::Tape& t, std::span<const ad::NodeRef> in) {
        const nn::BoundParams bp(critic.params, {in.begin(), in.end()});
        return gan::critic_loss(gan::CriticRegime{}, critic, bp, t.constant(real), t.constant(fake),
                                t.constant(xhat))
            .loss;
      };
      CHECK(ad::check_gradient_fd(f, points, 1e-5, 1).max_error < 1e-5);
      CHECK(ad::check_gradient_fd(f, points, 1e-5, 2).max_error < 1e-4);
    }
  }

  TEST_CASE("generator gradients pass FD checks") {
    const LmGeneratorSpec spec{3, 2, 3, 3, 8};
    Rng rng(6);
    const Network g = generator_network(spec, randomized(init_generator(spec, 0), rng));
    const Tensor z = random_tensor(Shape{2, 3}, rng);
    const Tensor w = random_tensor(Shape{2, 8, 3}, rng);
    std::vector<Tensor> points;
    for (const auto& [name, t] : g.params) points.push_back(t);
    const ad::ScalarGraph f = [&](ad::Tape& t, std::span<const ad::NodeRef> in) {
      const nn::BoundParams bp(g.params, {in.begin(), in.end()});
      return ad::sum(g.forward(bp, t.constant(z)) * t.constant(w));
    };
    CHECK(ad::check_gradient_fd(f, points, 1e-5, 1).max_error < 1e-5);
  }

  TEST_CASE("specs are validated") {
    CHECK_THROWS_AS(init_generator(LmGeneratorSpec{16, 8, 4, 3}, 0), ConfigError);
    CHECK_THROWS_AS(init_generator(LmGeneratorSpec{16, 8, 5, 1}, 0), ConfigError);
    CHECK_THROWS_AS(init_critic(LmCriticSpec{3, 8, 17, 2}, 0), ConfigError);
    CHECK_THROWS_AS(generator_network(LmGeneratorSpec{16, 8, 5, 3}, init_critic({3}, 0)),
                    ShapeError);
  }

  TEST_CASE("sample dump is one line per sequence") {
    std::ostringstream out;
    write_samples(out, {"ab__", "ba__"});
    CHECK(out.str() == "ab__\nba__\n");
  }
}

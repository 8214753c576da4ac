#include "gplab/langmodel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "gplab/error.hpp"

namespace gplab::lm {

using ad::NodeRef;
using nn::Activation;
using nn::BoundParams;

namespace {

constexpr std::uint64_t kGeneratorStream = 0x1A6E;
constexpr std::uint64_t kCriticStream = 0x1AC7;

std::string layer(const char* base, std::size_t i) { return base + std::to_string(i); }

// [m, C, L] -> [m, C, 2L], each position repeated twice.
NodeRef upsample2(NodeRef x) {
  const Shape s = x.shape();
  const NodeRef col = ad::reshape(x, Shape{s[0], s[1], s[2], 1});
  const NodeRef rep = ad::broadcast_to(col, Shape{s[0], s[1], s[2], 2});
  return ad::reshape(rep, Shape{s[0], s[1], 2 * s[2]});
}

NodeRef same_conv(const BoundParams& p, const std::string& name, NodeRef x, std::size_t k) {
  const NodeRef padded = ad::pad(x, 2, k / 2, k / 2);
  return nn::conv1d_forward(p.at(name + ".weight"), p.at(name + ".bias"), padded);
}

void check_layout(const ParamSet& expected, const ParamSet& got, const char* what) {
  if (!expected.same_layout(got)) throw ShapeError(std::string(what) + " parameters do not fit");
}

}  // namespace

void LmGeneratorSpec::validate() const {
  if (latent == 0 || channels == 0) throw ConfigError("generator widths must be positive");
  if (kernel == 0 || kernel % 2 == 0) throw ConfigError("generator kernel size must be odd");
  if (vocab < 2) throw ConfigError("vocabulary needs at least two symbols");
  if (length == 0 || length % 4 != 0) throw ConfigError("sequence length must be a multiple of 4");
}

void LmCriticSpec::validate() const {
  if (channels == 0 || layers == 0 || kernel == 0) {
    throw ConfigError("critic widths must be positive");
  }
  if (vocab < 2) throw ConfigError("vocabulary needs at least two symbols");
  if (layers * (kernel - 1) >= length) throw ConfigError("critic convolutions exceed the sequence");
}

ParamSet init_generator(const LmGeneratorSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed, kGeneratorStream);
  ParamSet p;
  nn::add_linear(p, "fc0", spec.latent, spec.channels * (spec.length / 4), Activation::relu, rng);
  for (std::size_t i = 1; i <= 2; ++i) {
    nn::add_conv1d(p, layer("conv", i), spec.channels, spec.channels, spec.kernel,
                   Activation::relu, rng);
  }
  nn::add_conv1d(p, "out", spec.channels, spec.vocab, 1, Activation::tanh, rng);
  return p;
}

ParamSet init_critic(const LmCriticSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed, kCriticStream);
  ParamSet p;
  std::size_t in = spec.vocab;
  for (std::size_t i = 1; i <= spec.layers; ++i) {
    nn::add_conv1d(p, layer("conv", i), in, spec.channels, spec.kernel, Activation::relu, rng);
    in = spec.channels;
  }
  nn::add_linear(p, "fc0", spec.channels, 1, Activation::tanh, rng);
  return p;
}

NodeRef lm_generator_forward(const LmGeneratorSpec& spec, const BoundParams& p, NodeRef z) {
  const std::size_t m = z.shape().at(0);
  if (z.shape() != Shape{m, spec.latent}) {
    throw ShapeError("generator expects latent [m, " + std::to_string(spec.latent) + "], got " +
                     shape_str(z.shape()));
  }
  NodeRef h = nn::linear_forward(p.at("fc0.weight"), p.at("fc0.bias"), z);
  h = ad::relu(ad::reshape(h, Shape{m, spec.channels, spec.length / 4}));
  for (std::size_t i = 1; i <= 2; ++i) {
    h = ad::relu(same_conv(p, layer("conv", i), upsample2(h), spec.kernel));
  }
  const NodeRef logits = nn::conv1d_forward(p.at("out.weight"), p.at("out.bias"), h);
  return ad::softmax(ad::permute(logits, Shape{0, 2, 1}));
}

NodeRef lm_critic_forward(const LmCriticSpec& spec, const BoundParams& p, NodeRef x) {
  const std::size_t m = x.shape().at(0);
  if (x.shape() != Shape{m, spec.length, spec.vocab}) {
    throw ShapeError("critic expects [m, " + std::to_string(spec.length) + ", " +
                     std::to_string(spec.vocab) + "], got " + shape_str(x.shape()));
  }
  NodeRef h = ad::permute(x, Shape{0, 2, 1});
  for (std::size_t i = 1; i <= spec.layers; ++i) {
    const std::string name = layer("conv", i);
    h = ad::relu(nn::conv1d_forward(p.at(name + ".weight"), p.at(name + ".bias"), h));
  }
  const NodeRef pooled = ad::reshape(ad::mean_last(h), Shape{m, spec.channels});
  return nn::linear_forward(p.at("fc0.weight"), p.at("fc0.bias"), pooled);
}

Network generator_network(const LmGeneratorSpec& spec, ParamSet params) {
  check_layout(init_generator(spec, 0), params, "generator");
  Network net;
  net.params = std::move(params);
  net.forward = [spec](const BoundParams& p, NodeRef z) { return lm_generator_forward(spec, p, z); };
  return net;
}

Network generator_network(const LmGeneratorSpec& spec, std::uint64_t seed) {
  return generator_network(spec, init_generator(spec, seed));
}

Network critic_network(const LmCriticSpec& spec, ParamSet params) {
  check_layout(init_critic(spec, 0), params, "critic");
  Network net;
  net.params = std::move(params);
  net.forward = [spec](const BoundParams& p, NodeRef x) { return lm_critic_forward(spec, p, x); };
  return net;
}

Network critic_network(const LmCriticSpec& spec, std::uint64_t seed) {
  return critic_network(spec, init_critic(spec, seed));
}

Tensor lm_interpolate(const Tensor& real, const Tensor& fake, const Tensor& eps) {
  if (real.rank() != 3) throw ShapeError("sequence interpolation expects [m, T, V]");
  return gan::interpolate_samples(real, fake, eps);
}

double simplex_defect(const Tensor& x) {
  if (x.rank() == 0 || x.shape().back() == 0) throw ShapeError("no probability axis");
  const std::size_t v = x.shape().back();
  double worst = 0.0;
  for (std::size_t r = 0; r < x.size() / v; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < v; ++j) s += x[r * v + j];
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

std::string decode_argmax(const Tensor& soft, const data::CharCorpus& corpus) {
  const std::size_t v = corpus.vocab_size();
  if (soft.rank() != 2 || soft.dim(1) != v) {
    throw ShapeError("decode expects [T, " + std::to_string(v) + "], got " +
                     shape_str(soft.shape()));
  }
  std::u32string out;
  for (std::size_t t = 0; t < soft.dim(0); ++t) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < v; ++j) {
      if (soft.at(t, j) > soft.at(t, best)) best = j;
    }
    out.push_back(corpus.vocab[best]);
  }
  return data::utf8_encode(out);
}

std::vector<std::string> decode_batch(const Tensor& soft, const data::CharCorpus& corpus) {
  if (soft.rank() != 3) throw ShapeError("batch decode expects [m, T, V]");
  const std::size_t m = soft.dim(0), t = soft.dim(1), v = soft.dim(2);
  std::vector<std::string> out;
  out.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    Tensor row(Shape{t, v});
    std::copy_n(soft.data().begin() + static_cast<std::ptrdiff_t>(i * t * v), t * v,
                row.data().begin());
    out.push_back(decode_argmax(row, corpus));
  }
  return out;
}

double mean_max_probability(const Tensor& soft) {
  if (soft.rank() == 0 || soft.shape().back() == 0 || soft.size() == 0) {
    throw ShapeError("no probability rows");
  }
  const std::size_t v = soft.shape().back();
  const std::size_t rows = soft.size() / v;
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    double best = soft[r * v];
    for (std::size_t j = 1; j < v; ++j) best = std::max(best, soft[r * v + j]);
    total += best;
  }
  return total / static_cast<double>(rows);
}

namespace {

std::map<std::u32string, double> ngram_distribution(const std::vector<std::string>& seqs,
                                                    std::size_t n) {
  std::map<std::u32string, double> counts;
  double total = 0.0;
  for (const auto& s : seqs) {
    const std::u32string u = data::utf8_decode(s);
    for (std::size_t i = 0; i + n <= u.size(); ++i) {
      counts[u.substr(i, n)] += 1.0;
      total += 1.0;
    }
  }
  if (total == 0.0) throw Error("no " + std::to_string(n) + "-grams in the input");
  for (auto& [gram, c] : counts) c /= total;
  return counts;
}

double kl_to_mixture(double p, double q) {
  return p > 0.0 ? p * std::log(2.0 * p / (p + q)) : 0.0;
}

}  // namespace

double ngram_divergence(const std::vector<std::string>& a, const std::vector<std::string>& b,
                        std::size_t n) {
  if (n == 0) throw ConfigError("n-gram order must be positive");
  if (a.empty() || b.empty()) throw Error("n-gram divergence needs non-empty inputs");
  const auto p = ngram_distribution(a, n);
  const auto q = ngram_distribution(b, n);
  double js = 0.0;
  for (const auto& [gram, pv] : p) {
    const auto it = q.find(gram);
    js += 0.5 * kl_to_mixture(pv, it == q.end() ? 0.0 : it->second);
  }
  for (const auto& [gram, qv] : q) {
    const auto it = p.find(gram);
    js += 0.5 * kl_to_mixture(qv, it == p.end() ? 0.0 : it->second);
  }
  return std::clamp(js, 0.0, std::log(2.0));
}

double ngram_divergence(const std::vector<std::string>& samples, const data::CharCorpus& corpus,
                        std::size_t n) {
  std::vector<std::string> ref;
  ref.reserve(corpus.sequences.size());
  for (const auto& s : corpus.sequences) ref.push_back(corpus.decode(s));
  return ngram_divergence(samples, ref, n);
}

void write_samples(std::ostream& out, const std::vector<std::string>& samples) {
  for (const auto& s : samples) out << s << '\n';
}

}  // namespace gplab::lm

#pragma once

// Continuous character-sequence generator and 1D-convolution critic over
// per-position probability vectors, plus decoding and n-gram evaluation.

#include <cstdint>
#include <string>
#include <vector>

#include "gplab/gan.hpp"

namespace gplab::lm {

using gan::Network;
using nn::ParamSet;

// latent -> linear to (T/4 positions x channels) -> two (upsample x2, conv)
// stages -> 1x1 conv to V channels -> softmax per position.
struct LmGeneratorSpec {
  std::size_t latent = 128;
  std::size_t channels = 32;
  std::size_t kernel = 5;  // odd; same-length convolutions
  std::size_t vocab = 0;
  std::size_t length = data::kSequenceLength;

  void validate() const;
};

// Valid convolutions over V input channels, mean-pooled over positions,
// then a linear score.
struct LmCriticSpec {
  std::size_t vocab = 0;
  std::size_t channels = 32;
  std::size_t kernel = 5;
  std::size_t layers = 2;
  std::size_t length = data::kSequenceLength;

  void validate() const;
};

ParamSet init_generator(const LmGeneratorSpec& spec, std::uint64_t seed);
ParamSet init_critic(const LmCriticSpec& spec, std::uint64_t seed);

// z[m, latent] -> [m, T, V]
ad::NodeRef lm_generator_forward(const LmGeneratorSpec& spec, const nn::BoundParams& params,
                                 ad::NodeRef z);
// x[m, T, V] -> [m, 1]
ad::NodeRef lm_critic_forward(const LmCriticSpec& spec, const nn::BoundParams& params,
                              ad::NodeRef x);

Network generator_network(const LmGeneratorSpec& spec, ParamSet params);
Network generator_network(const LmGeneratorSpec& spec, std::uint64_t seed);
Network critic_network(const LmCriticSpec& spec, ParamSet params);
Network critic_network(const LmCriticSpec& spec, std::uint64_t seed);

// Per-example convex combination eps * real + (1 - eps) * fake on [m, T, V].
Tensor lm_interpolate(const Tensor& real, const Tensor& fake, const Tensor& eps);

// Largest deviation of a per-position sum from 1 over a [..., V] tensor.
double simplex_defect(const Tensor& x);

// Argmax per position of a [T, V] tensor; ties go to the lowest index.
std::string decode_argmax(const Tensor& soft, const data::CharCorpus& corpus);
// Decodes every example of a [m, T, V] tensor.
std::vector<std::string> decode_batch(const Tensor& soft, const data::CharCorpus& corpus);

// Mean over examples and positions of the largest probability.
double mean_max_probability(const Tensor& soft);

// Jensen-Shannon divergence (natural log) between the n-gram distributions of
// `samples` and of the corpus sequences. Pad characters count as symbols.
double ngram_divergence(const std::vector<std::string>& samples, const data::CharCorpus& corpus,
                        std::size_t n);
double ngram_divergence(const std::vector<std::string>& a, const std::vector<std::string>& b,
                        std::size_t n);

void write_samples(std::ostream& out, const std::vector<std::string>& samples);

}  // namespace gplab::lm

#pragma once

// Deterministic samplers: toy distributions, latent noise, frozen splits and
// character corpora. Every draw is a pure function of (seed, draw index).

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "gplab/random.hpp"
#include "gplab/tensor.hpp"

namespace gplab::data {

// ---- samplers ------------------------------------------------------------

// Pure batch source: draw(first, n) returns samples first .. first+n-1 stacked
// along a new leading axis.
class Sampler {
 public:
  using DrawFn = std::function<Tensor(std::uint64_t first, std::size_t n)>;

  Sampler() = default;
  Sampler(Shape sample_shape, DrawFn draw)
      : sample_shape_(std::move(sample_shape)), draw_(std::move(draw)) {}

  Tensor draw(std::uint64_t first, std::size_t n) const;
  const Shape& sample_shape() const noexcept { return sample_shape_; }
  explicit operator bool() const noexcept { return static_cast<bool>(draw_); }

 private:
  Shape sample_shape_;
  DrawFn draw_;
};

// Sequential reader over a Sampler.
class SampleStream {
 public:
  explicit SampleStream(Sampler sampler, std::uint64_t start = 0)
      : sampler_(std::move(sampler)), cursor_(start) {}

  Tensor next(std::size_t n);
  std::uint64_t cursor() const noexcept { return cursor_; }
  const Sampler& sampler() const noexcept { return sampler_; }

 private:
  Sampler sampler_;
  std::uint64_t cursor_;
};

// ---- toy distributions ---------------------------------------------------

enum class ToyKind { swiss_roll, eight_gaussians, twenty_five_gaussians, gaussian_1d, point_pair };

struct ToyDistribution {
  ToyKind kind = ToyKind::eight_gaussians;
  double sigma = 0.05;
  double radius = 2.0;   // eight_gaussians
  double spacing = 1.0;  // twenty_five_gaussians
  double mu = 0.0;       // gaussian_1d
  std::array<double, 2> a{0.0, 0.0}, b{1.0, 0.0};  // point_pair

  static ToyDistribution swiss_roll(double sigma = 0.02);
  static ToyDistribution eight_gaussians(double radius = 2.0, double sigma = 0.05);
  static ToyDistribution twenty_five_gaussians(double spacing = 1.0, double sigma = 0.05);
  static ToyDistribution gaussian_1d(double mu, double sigma);
  static ToyDistribution point_pair(std::array<double, 2> a, std::array<double, 2> b);

  std::size_t dim() const noexcept { return kind == ToyKind::gaussian_1d ? 1 : 2; }
  void validate() const;
};

const char* toy_name(ToyKind kind);
ToyKind parse_toy(std::string_view name);

// Swiss roll: t in [1.5 pi, 4.5 pi], point (t cos t, t sin t) / kSwissScale.
inline constexpr double kSwissTMin = 1.5 * 3.14159265358979323846;
inline constexpr double kSwissTMax = 4.5 * 3.14159265358979323846;
inline constexpr double kSwissScale = kSwissTMax / 2.0;

// Samples first .. first+n-1 of the distribution for `seed`, shape [n, dim].
Tensor sample_toy(const ToyDistribution& dist, std::uint64_t seed, std::size_t n,
                  std::uint64_t first = 0);
Sampler toy_sampler(const ToyDistribution& dist, std::uint64_t seed);

// ---- latent noise --------------------------------------------------------

enum class LatentKind { uniform, gaussian };

// [n, dim]; uniform draws lie in [-1, 1), gaussian draws are standard normal.
Tensor sample_latent(std::size_t dim, std::size_t n, LatentKind kind, std::uint64_t seed,
                     std::uint64_t first = 0);
Sampler latent_sampler(std::size_t dim, LatentKind kind, std::uint64_t seed);

// Uniformly resamples rows of a fixed dataset [N, ...] with replacement.
Sampler dataset_sampler(Tensor dataset, std::uint64_t seed);

// ---- frozen train / validation split -------------------------------------

struct SplitSpec {
  std::size_t train = 64;
  std::size_t validation = 256;
  std::uint64_t seed = 0;
};

struct Split {
  std::vector<std::size_t> train_index;
  std::vector<std::size_t> validation_index;
  Tensor train;
  Tensor validation;
};

// Disjoint random subsets of the rows of `pool`.
Split split_rows(const Tensor& pool, const SplitSpec& spec);
// Split of a pool of train + validation draws from `dist`.
Split toy_split(const ToyDistribution& dist, const SplitSpec& spec);

// ---- character corpora ---------------------------------------------------

inline constexpr std::size_t kSequenceLength = 32;

struct CharCorpus {
  std::u32string vocab;  // ordered, unique; includes pad
  char32_t pad = U'_';
  std::vector<std::vector<std::uint32_t>> sequences;  // each of length T
  std::size_t length = kSequenceLength;
  std::string source;

  std::size_t vocab_size() const noexcept { return vocab.size(); }
  std::uint32_t index_of(char32_t c) const;
  // Full T-character string, pad characters included.
  std::string decode(const std::vector<std::uint32_t>& seq) const;
  // Encodes up to T characters and pads the rest.
  std::vector<std::uint32_t> encode(std::string_view utf8) const;
  void validate() const;
};

std::u32string utf8_decode(std::string_view s);
std::string utf8_encode(std::u32string_view s);

inline constexpr std::string_view kDefaultGrammar = "(ab|ba|abb)*";

// Regular-expression grammar over literal characters with |, *, +, ? and
// parentheses. Repetition continues with probability `repeat`.
class Grammar {
 public:
  explicit Grammar(std::string_view pattern, double repeat = 0.8);

  // Generation stops early once the output exceeds `limit` characters.
  std::u32string generate(Rng& rng, std::size_t limit = std::u32string::npos) const;
  const std::u32string& alphabet() const noexcept { return alphabet_; }
  const std::string& pattern() const noexcept { return pattern_; }

  struct Node {
    enum Kind { literal, sequence, alternative, star, plus, optional } kind = literal;
    char32_t ch = 0;
    std::vector<std::size_t> children;
  };

 private:
  std::string pattern_;
  double repeat_;
  std::u32string alphabet_;
  std::vector<Node> nodes_;
  std::size_t root_ = 0;

  std::size_t parse_alternative(const std::u32string& p, std::size_t& pos);
  std::size_t parse_sequence(const std::u32string& p, std::size_t& pos);
  std::size_t parse_atom(const std::u32string& p, std::size_t& pos);
  std::size_t add(Node node);
  void emit(std::size_t node, Rng& rng, std::u32string& out, std::size_t limit) const;
};

// `count` strings of at most T characters from the grammar, padded to T.
CharCorpus synth_corpus(std::string_view grammar, std::size_t count, std::uint64_t seed,
                        char32_t pad = U'_');
// One sequence per line, truncated to T characters.
CharCorpus load_corpus(const std::string& path);

// [n, T, V] one-hot encoding.
Tensor encode_onehot(const CharCorpus& corpus);
// [len, V] one-hot rows for an index sequence.
Tensor onehot(const std::vector<std::uint32_t>& seq, std::size_t vocab);
// Uniformly resamples one-hot sequences of the corpus.
Sampler corpus_sampler(const CharCorpus& corpus, std::uint64_t seed);

}  // namespace gplab::data

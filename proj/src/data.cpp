#include "gplab/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "gplab/error.hpp"

namespace gplab::data {
namespace {

constexpr std::uint64_t kToyStream = 0x7011;
constexpr std::uint64_t kLatentStream = 0x1A7E;
constexpr std::uint64_t kDatasetStream = 0xDA7A;
constexpr std::uint64_t kSplitStream = 0x5B17;
constexpr std::uint64_t kCorpusStream = 0xC0B5;

// Draws reserved per toy sample; a sample never uses more than a few.
constexpr std::uint64_t kToySlot = 8;

Shape batch_shape(std::size_t n, const Shape& sample) {
  Shape s{n};
  s.insert(s.end(), sample.begin(), sample.end());
  return s;
}

}  // namespace

// ---- samplers ------------------------------------------------------------

Tensor Sampler::draw(std::uint64_t first, std::size_t n) const {
  if (!draw_) throw Error("sampler is empty");
  Tensor t = draw_(first, n);
  if (t.shape() != batch_shape(n, sample_shape_)) {
    throw ShapeError("sampler produced " + shape_str(t.shape()) + ", expected " +
                     shape_str(batch_shape(n, sample_shape_)));
  }
  return t;
}

Tensor SampleStream::next(std::size_t n) {
  Tensor t = sampler_.draw(cursor_, n);
  cursor_ += n;
  return t;
}

// ---- toy distributions ---------------------------------------------------

ToyDistribution ToyDistribution::swiss_roll(double sigma) {
  ToyDistribution d;
  d.kind = ToyKind::swiss_roll;
  d.sigma = sigma;
  return d;
}

ToyDistribution ToyDistribution::eight_gaussians(double radius, double sigma) {
  ToyDistribution d;
  d.kind = ToyKind::eight_gaussians;
  d.radius = radius;
  d.sigma = sigma;
  return d;
}

ToyDistribution ToyDistribution::twenty_five_gaussians(double spacing, double sigma) {
  ToyDistribution d;
  d.kind = ToyKind::twenty_five_gaussians;
  d.spacing = spacing;
  d.sigma = sigma;
  return d;
}

ToyDistribution ToyDistribution::gaussian_1d(double mu, double sigma) {
  ToyDistribution d;
  d.kind = ToyKind::gaussian_1d;
  d.mu = mu;
  d.sigma = sigma;
  return d;
}

ToyDistribution ToyDistribution::point_pair(std::array<double, 2> a, std::array<double, 2> b) {
  ToyDistribution d;
  d.kind = ToyKind::point_pair;
  d.sigma = 0.0;
  d.a = a;
  d.b = b;
  return d;
}

void ToyDistribution::validate() const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("toy sigma must be >= 0");
  if (kind == ToyKind::eight_gaussians && !(radius > 0.0)) {
    throw ConfigError("eight_gaussians radius must be positive");
  }
  if (kind == ToyKind::twenty_five_gaussians && !(spacing > 0.0)) {
    throw ConfigError("twenty_five_gaussians spacing must be positive");
  }
}

const char* toy_name(ToyKind kind) {
  switch (kind) {
    case ToyKind::swiss_roll: return "swiss_roll";
    case ToyKind::eight_gaussians: return "eight_gaussians";
    case ToyKind::twenty_five_gaussians: return "twenty_five_gaussians";
    case ToyKind::gaussian_1d: return "gaussian_1d";
    case ToyKind::point_pair: return "point_pair";
  }
  return "?";
}

ToyKind parse_toy(std::string_view name) {
  for (auto k : {ToyKind::swiss_roll, ToyKind::eight_gaussians, ToyKind::twenty_five_gaussians,
                 ToyKind::gaussian_1d, ToyKind::point_pair}) {
    if (name == toy_name(k)) return k;
  }
  throw ConfigError("unknown toy distribution '" + std::string(name) + "'");
}

Tensor sample_toy(const ToyDistribution& dist, std::uint64_t seed, std::size_t n,
                  std::uint64_t first) {
  dist.validate();
  const std::size_t d = dist.dim();
  Tensor out(Shape{n, d});
  Rng rng(seed, kToyStream);
  for (std::size_t i = 0; i < n; ++i) {
    rng.seek((first + i) * kToySlot);
    double* p = out.data().data() + i * d;
    switch (dist.kind) {
      case ToyKind::swiss_roll: {
        const double t = rng.uniform(kSwissTMin, kSwissTMax);
        p[0] = t * std::cos(t) / kSwissScale + dist.sigma * rng.normal();
        p[1] = t * std::sin(t) / kSwissScale + dist.sigma * rng.normal();
        break;
      }
      case ToyKind::eight_gaussians: {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(rng.below(8)) / 8.0;
        p[0] = dist.radius * std::cos(angle) + dist.sigma * rng.normal();
        p[1] = dist.radius * std::sin(angle) + dist.sigma * rng.normal();
        break;
      }
      case ToyKind::twenty_five_gaussians: {
        const double gx = static_cast<double>(rng.below(5)) - 2.0;
        const double gy = static_cast<double>(rng.below(5)) - 2.0;
        p[0] = gx * dist.spacing + dist.sigma * rng.normal();
        p[1] = gy * dist.spacing + dist.sigma * rng.normal();
        break;
      }
      case ToyKind::gaussian_1d:
        p[0] = dist.mu + dist.sigma * rng.normal();
        break;
      case ToyKind::point_pair: {
        const auto& c = rng.below(2) == 0 ? dist.a : dist.b;
        p[0] = c[0];
        p[1] = c[1];
        break;
      }
    }
  }
  return out;
}

Sampler toy_sampler(const ToyDistribution& dist, std::uint64_t seed) {
  dist.validate();
  return Sampler(Shape{dist.dim()}, [dist, seed](std::uint64_t first, std::size_t n) {
    return sample_toy(dist, seed, n, first);
  });
}

// ---- latent noise --------------------------------------------------------

Tensor sample_latent(std::size_t dim, std::size_t n, LatentKind kind, std::uint64_t seed,
                     std::uint64_t first) {
  Tensor out(Shape{n, dim});
  Rng rng(seed, kLatentStream);
  for (std::size_t i = 0; i < n; ++i) {
    rng.seek((first + i) * 2 * dim);
    double* p = out.data().data() + i * dim;
    for (std::size_t j = 0; j < dim; ++j) {
      p[j] = kind == LatentKind::uniform ? rng.uniform(-1.0, 1.0) : rng.normal();
    }
  }
  return out;
}

Sampler latent_sampler(std::size_t dim, LatentKind kind, std::uint64_t seed) {
  return Sampler(Shape{dim}, [=](std::uint64_t first, std::size_t n) {
    return sample_latent(dim, n, kind, seed, first);
  });
}

Sampler dataset_sampler(Tensor dataset, std::uint64_t seed) {
  if (dataset.rank() < 1 || dataset.dim(0) == 0) throw Error("dataset sampler needs rows");
  const Shape row_shape(dataset.shape().begin() + 1, dataset.shape().end());
  const std::size_t rows = dataset.dim(0);
  const std::size_t width = dataset.size() / rows;
  return Sampler(row_shape, [data = std::move(dataset), rows, width, row_shape, seed](
                                std::uint64_t first, std::size_t n) {
    Tensor out(batch_shape(n, row_shape));
    Rng rng(seed, kDatasetStream);
    for (std::size_t i = 0; i < n; ++i) {
      rng.seek((first + i) * 4);
      const std::size_t r = rng.below(rows);
      std::copy_n(data.data().begin() + static_cast<std::ptrdiff_t>(r * width), width,
                  out.data().begin() + static_cast<std::ptrdiff_t>(i * width));
    }
    return out;
  });
}

// ---- frozen split ----------------------------------------------------------

namespace {

Tensor gather_rows(const Tensor& pool, const std::vector<std::size_t>& index) {
  Shape s = pool.shape();
  s[0] = index.size();
  Tensor out(s);
  const std::size_t width = pool.size() / pool.dim(0);
  for (std::size_t i = 0; i < index.size(); ++i) {
    std::copy_n(pool.data().begin() + static_cast<std::ptrdiff_t>(index[i] * width), width,
                out.data().begin() + static_cast<std::ptrdiff_t>(i * width));
  }
  return out;
}

}  // namespace

Split split_rows(const Tensor& pool, const SplitSpec& spec) {
  if (pool.rank() < 1) throw ShapeError("split pool must have a row axis");
  const std::size_t rows = pool.dim(0);
  if (spec.train + spec.validation > rows) {
    throw ConfigError("split needs " + std::to_string(spec.train + spec.validation) +
                      " rows, pool has " + std::to_string(rows));
  }
  std::vector<std::size_t> perm(rows);
  for (std::size_t i = 0; i < rows; ++i) perm[i] = i;
  Rng rng(spec.seed, kSplitStream);
  for (std::size_t i = rows; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  Split s;
  s.train_index.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(spec.train));
  s.validation_index.assign(
      perm.begin() + static_cast<std::ptrdiff_t>(spec.train),
      perm.begin() + static_cast<std::ptrdiff_t>(spec.train + spec.validation));
  s.train = gather_rows(pool, s.train_index);
  s.validation = gather_rows(pool, s.validation_index);
  return s;
}

Split toy_split(const ToyDistribution& dist, const SplitSpec& spec) {
  return split_rows(sample_toy(dist, spec.seed, spec.train + spec.validation), spec);
}

// ---- UTF-8 ---------------------------------------------------------------

std::u32string utf8_decode(std::string_view s) {
  std::u32string out;
  for (std::size_t i = 0; i < s.size();) {
    const auto c0 = static_cast<unsigned char>(s[i]);
    std::size_t len;
    char32_t cp;
    if (c0 < 0x80) {
      len = 1, cp = c0;
    } else if ((c0 & 0xE0) == 0xC0) {
      len = 2, cp = c0 & 0x1F;
    } else if ((c0 & 0xF0) == 0xE0) {
      len = 3, cp = c0 & 0x0F;
    } else if ((c0 & 0xF8) == 0xF0) {
      len = 4, cp = c0 & 0x07;
    } else {
      throw Error("invalid UTF-8 lead byte");
    }
    if (i + len > s.size()) throw Error("truncated UTF-8 sequence");
    for (std::size_t k = 1; k < len; ++k) {
      const auto c = static_cast<unsigned char>(s[i + k]);
      if ((c & 0xC0) != 0x80) throw Error("invalid UTF-8 continuation byte");
      cp = (cp << 6) | (c & 0x3F);
    }
    out.push_back(cp);
    i += len;
  }
  return out;
}

std::string utf8_encode(std::u32string_view s) {
  std::string out;
  for (char32_t c : s) {
    if (c < 0x80) {
      out.push_back(static_cast<char>(c));
    } else if (c < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (c >> 6)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    } else if (c < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (c >> 12)));
      out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (c >> 18)));
      out.push_back(static_cast<char>(0x80 | ((c >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    }
  }
  return out;
}

// ---- corpus --------------------------------------------------------------

std::uint32_t CharCorpus::index_of(char32_t c) const {
  const auto pos = vocab.find(c);
  if (pos == std::u32string::npos) {
    throw Error("character '" + utf8_encode(std::u32string(1, c)) + "' is not in the vocabulary");
  }
  return static_cast<std::uint32_t>(pos);
}

std::string CharCorpus::decode(const std::vector<std::uint32_t>& seq) const {
  std::u32string s;
  for (auto i : seq) {
    if (i >= vocab.size()) throw Error("character index out of range");
    s.push_back(vocab[i]);
  }
  return utf8_encode(s);
}

std::vector<std::uint32_t> CharCorpus::encode(std::string_view utf8) const {
  const std::u32string s = utf8_decode(utf8);
  std::vector<std::uint32_t> seq(length, index_of(pad));
  for (std::size_t i = 0; i < std::min(length, s.size()); ++i) seq[i] = index_of(s[i]);
  return seq;
}

void CharCorpus::validate() const {
  if (vocab.find(pad) == std::u32string::npos) throw Error("pad is not in the vocabulary");
  for (std::size_t i = 0; i < vocab.size(); ++i)
    if (vocab.find(vocab[i], i + 1) != std::u32string::npos) throw Error("duplicate vocab entry");
  for (const auto& seq : sequences) {
    if (seq.size() != length) throw ShapeError("corpus sequence has the wrong length");
    for (auto i : seq)
      if (i >= vocab.size()) throw Error("corpus index out of range");
  }
}

namespace {

bool is_operator(char32_t c) {
  return c == U'|' || c == U'*' || c == U'+' || c == U'?' || c == U'(' || c == U')';
}

}  // namespace

std::size_t Grammar::add(Node node) {
  nodes_.push_back(std::move(node));
  return nodes_.size() - 1;
}

std::size_t Grammar::parse_alternative(const std::u32string& p, std::size_t& pos) {
  Node alt{Node::alternative, 0, {parse_sequence(p, pos)}};
  while (pos < p.size() && p[pos] == U'|') {
    ++pos;
    alt.children.push_back(parse_sequence(p, pos));
  }
  return alt.children.size() == 1 ? alt.children[0] : add(std::move(alt));
}

std::size_t Grammar::parse_sequence(const std::u32string& p, std::size_t& pos) {
  Node seq{Node::sequence, 0, {}};
  while (pos < p.size() && p[pos] != U'|' && p[pos] != U')') {
    std::size_t atom = parse_atom(p, pos);
    while (pos < p.size() && (p[pos] == U'*' || p[pos] == U'+' || p[pos] == U'?')) {
      const auto kind = p[pos] == U'*'   ? Node::star
                        : p[pos] == U'+' ? Node::plus
                                         : Node::optional;
      ++pos;
      atom = add(Node{kind, 0, {atom}});
    }
    seq.children.push_back(atom);
  }
  return seq.children.size() == 1 ? seq.children[0] : add(std::move(seq));
}

std::size_t Grammar::parse_atom(const std::u32string& p, std::size_t& pos) {
  const char32_t c = p[pos];
  if (c == U'(') {
    ++pos;
    const std::size_t inner = parse_alternative(p, pos);
    if (pos >= p.size() || p[pos] != U')') throw ConfigError("grammar: missing ')'");
    ++pos;
    return inner;
  }
  if (is_operator(c)) throw ConfigError("grammar: unexpected operator at position " +
                                        std::to_string(pos));
  char32_t lit = c;
  if (c == U'\\') {
    if (pos + 1 >= p.size()) throw ConfigError("grammar: dangling escape");
    lit = p[++pos];
  }
  ++pos;
  if (alphabet_.find(lit) == std::u32string::npos) alphabet_.push_back(lit);
  return add(Node{Node::literal, lit, {}});
}

Grammar::Grammar(std::string_view pattern, double repeat) : pattern_(pattern), repeat_(repeat) {
  if (pattern.empty()) throw ConfigError("grammar is empty");
  if (!(repeat >= 0.0 && repeat < 1.0)) throw ConfigError("grammar repeat must lie in [0, 1)");
  const std::u32string p = utf8_decode(pattern);
  std::size_t pos = 0;
  root_ = parse_alternative(p, pos);
  if (pos != p.size()) throw ConfigError("grammar: unmatched ')'");
  if (alphabet_.empty()) throw ConfigError("grammar has no literal characters");
  std::sort(alphabet_.begin(), alphabet_.end());
}

void Grammar::emit(std::size_t id, Rng& rng, std::u32string& out, std::size_t limit) const {
  if (out.size() > limit) return;
  const Node& n = nodes_[id];
  switch (n.kind) {
    case Node::literal:
      out.push_back(n.ch);
      break;
    case Node::sequence:
      for (auto c : n.children) emit(c, rng, out, limit);
      break;
    case Node::alternative:
      emit(n.children[rng.below(n.children.size())], rng, out, limit);
      break;
    case Node::plus:
      emit(n.children[0], rng, out, limit);
      [[fallthrough]];
    case Node::star:
      while (out.size() <= limit && rng.uniform() < repeat_) emit(n.children[0], rng, out, limit);
      break;
    case Node::optional:
      if (rng.uniform() < 0.5) emit(n.children[0], rng, out, limit);
      break;
  }
}

std::u32string Grammar::generate(Rng& rng, std::size_t limit) const {
  std::u32string out;
  emit(root_, rng, out, limit);
  return out;
}

CharCorpus synth_corpus(std::string_view grammar, std::size_t count, std::uint64_t seed,
                        char32_t pad) {
  const Grammar g(grammar);
  if (g.alphabet().find(pad) != std::u32string::npos) {
    throw ConfigError("pad character occurs in the grammar alphabet");
  }
  CharCorpus c;
  c.vocab = g.alphabet() + pad;
  c.pad = pad;
  c.source = "grammar:" + std::string(grammar);
  constexpr int kMaxAttempts = 10000;
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(seed, kCorpusStream + i);
    std::u32string s;
    int attempt = 0;
    do {
      if (++attempt > kMaxAttempts) throw Error("grammar rarely yields strings of length <= 32");
      s = g.generate(rng, c.length);
    } while (s.size() > c.length);
    std::vector<std::uint32_t> seq(c.length, c.index_of(pad));
    for (std::size_t k = 0; k < s.size(); ++k) seq[k] = c.index_of(s[k]);
    c.sequences.push_back(std::move(seq));
  }
  return c;
}

CharCorpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus '" + path + "'");
  std::vector<std::u32string> lines;
  std::u32string chars;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::u32string s = utf8_decode(line);
    if (s.size() > kSequenceLength) s.resize(kSequenceLength);
    chars += s;
    lines.push_back(std::move(s));
  }
  std::sort(chars.begin(), chars.end());
  chars.erase(std::unique(chars.begin(), chars.end()), chars.end());
  CharCorpus c;
  c.pad = chars.find(U'_') == std::u32string::npos ? U'_' : U'␀';
  if (chars.find(c.pad) != std::u32string::npos) throw Error("corpus uses every pad candidate");
  c.vocab = chars + c.pad;
  c.source = "file:" + path;
  for (const auto& s : lines) c.sequences.push_back(c.encode(utf8_encode(s)));
  return c;
}

Tensor onehot(const std::vector<std::uint32_t>& seq, std::size_t vocab) {
  Tensor t(Shape{seq.size(), vocab});
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (seq[i] >= vocab) throw Error("character index out of range");
    t.at(i, seq[i]) = 1.0;
  }
  return t;
}

Tensor encode_onehot(const CharCorpus& corpus) {
  const std::size_t n = corpus.sequences.size(), T = corpus.length, V = corpus.vocab_size();
  Tensor out(Shape{n, T, V});
  for (std::size_t i = 0; i < n; ++i) {
    const auto& seq = corpus.sequences[i];
    if (seq.size() != T) throw ShapeError("corpus sequence has the wrong length");
    for (std::size_t t = 0; t < T; ++t) {
      if (seq[t] >= V) throw Error("character index out of range");
      out[(i * T + t) * V + seq[t]] = 1.0;
    }
  }
  return out;
}

Sampler corpus_sampler(const CharCorpus& corpus, std::uint64_t seed) {
  return dataset_sampler(encode_onehot(corpus), seed);
}

}  // namespace gplab::data

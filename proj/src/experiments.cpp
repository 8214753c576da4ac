#include "gplab/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "gplab/error.hpp"

namespace gplab::exp {

using gan::Network;
using gan::TrainConfig;

// ---- configuration -------------------------------------------------------

namespace {

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string fmt15(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* expected) {
  throw ConfigError("invalid value '" + std::string(value) + "' for key '" + std::string(key) +
                    "': expected " + expected);
}

std::uint64_t parse_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    bad_value(key, v, "a non-negative integer");
  }
  return out;
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || r.ec != std::errc() || r.ptr != v.data() + v.size() || !std::isfinite(out)) {
    bad_value(key, v, "a finite number");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  bad_value(key, v, "0 or 1");
}

struct Key {
  std::string name;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view)> set;
};

template <class T>
Key field(std::string name, T RunConfig::*member) {
  Key k;
  k.name = name;
  k.get = [member](const RunConfig& c) {
    if constexpr (std::is_same_v<T, std::string>) {
      return c.*member;
    } else if constexpr (std::is_same_v<T, bool>) {
      return std::string(c.*member ? "1" : "0");
    } else if constexpr (std::is_same_v<T, double>) {
      return fmt(c.*member);
    } else {
      return std::to_string(c.*member);
    }
  };
  k.set = [member, name](RunConfig& c, std::string_view v) {
    if constexpr (std::is_same_v<T, std::string>) {
      c.*member = std::string(v);
    } else if constexpr (std::is_same_v<T, bool>) {
      c.*member = parse_bool(name, v);
    } else if constexpr (std::is_same_v<T, double>) {
      c.*member = parse_double(name, v);
    } else {
      c.*member = static_cast<T>(parse_u64(name, v));
    }
  };
  return k;
}

Key learning_rate(std::string name, std::optional<double> RunConfig::*member, bool critic) {
  Key k;
  k.name = name;
  k.get = [critic](const RunConfig& c) {
    const TrainConfig t = c.train_config();
    const auto& o = critic ? t.critic_opt : t.gen_opt;
    return fmt(o.kind == gan::OptimizerConfig::Kind::adam ? o.adam.lr : o.rmsprop.lr);
  };
  k.set = [member, name](RunConfig& c, std::string_view v) {
    const double lr = parse_double(name, v);
    if (!(lr > 0.0)) bad_value(name, v, "a positive number");
    c.*member = lr;
  };
  return k;
}

const std::vector<Key>& registry() {
  static const std::vector<Key> keys = [] {
    std::vector<Key> k;
    k.push_back(field("experiment", &RunConfig::experiment));
    k.push_back(field("seed", &RunConfig::seed));
    k.push_back(field("out", &RunConfig::out));
    k.push_back(field("regime", &RunConfig::regime));
    k.push_back(field("clip", &RunConfig::clip));
    k.push_back(field("lambda", &RunConfig::lambda));
    k.push_back(field("ncritic", &RunConfig::ncritic));
    k.push_back(field("iters", &RunConfig::iters));
    k.push_back(field("batch", &RunConfig::batch));
    Key opt = field("opt", &RunConfig::opt);
    opt.get = [](const RunConfig& c) {
      return std::string(gan::optimizer_name(c.train_config().critic_opt.kind));
    };
    k.push_back(opt);
    k.push_back(learning_rate("critic_lr", &RunConfig::critic_lr, true));
    k.push_back(learning_rate("gen_lr", &RunConfig::gen_lr, false));
    k.push_back(field("beta1", &RunConfig::beta1));
    k.push_back(field("beta2", &RunConfig::beta2));
    k.push_back(field("rms_decay", &RunConfig::rms_decay));
    k.push_back(field("timing", &RunConfig::timing));
    k.push_back(field("dataset", &RunConfig::dataset));
    k.push_back(field("width", &RunConfig::width));
    k.push_back(field("hidden_layers", &RunConfig::hidden_layers));
    k.push_back(field("activation", &RunConfig::activation));
    k.push_back(field("layer_norm", &RunConfig::layer_norm));
    k.push_back(field("latent", &RunConfig::latent));
    k.push_back(field("steps", &RunConfig::steps));
    k.push_back(field("real_mu", &RunConfig::real_mu));
    k.push_back(field("fake_mu", &RunConfig::fake_mu));
    k.push_back(field("samples", &RunConfig::samples));
    k.push_back(field("interpolates", &RunConfig::interpolates));
    k.push_back(field("clips", &RunConfig::clips));
    k.push_back(field("penalty_run", &RunConfig::penalty_run));
    k.push_back(field("probe_batch", &RunConfig::probe_batch));
    k.push_back(field("noise", &RunConfig::noise));
    k.push_back(field("train_size", &RunConfig::train_size));
    k.push_back(field("val_size", &RunConfig::val_size));
    k.push_back(field("cadence", &RunConfig::cadence));
    k.push_back(field("params", &RunConfig::params));
    k.push_back(field("grid", &RunConfig::grid));
    k.push_back(field("extent", &RunConfig::extent));
    k.push_back(field("corpus", &RunConfig::corpus));
    k.push_back(field("grammar", &RunConfig::grammar));
    k.push_back(field("corpus_size", &RunConfig::corpus_size));
    k.push_back(field("channels", &RunConfig::channels));
    k.push_back(field("kernel", &RunConfig::kernel));
    k.push_back(field("lm_samples", &RunConfig::lm_samples));
    return k;
  }();
  return keys;
}

}  // namespace

void validate_config(const RunConfig& c) {
  (void)c.train_config();
  (void)data::parse_toy(c.dataset);
  (void)nn::parse_activation(c.activation);
  if (c.opt != "auto" && c.opt != "adam" && c.opt != "rmsprop") {
    bad_value("opt", c.opt, "auto, adam or rmsprop");
  }
  if (c.width == 0) bad_value("width", "0", "a positive integer");
  if (c.cadence == 0) bad_value("cadence", "0", "a positive integer");
  if (c.grid < 2) bad_value("grid", std::to_string(c.grid), "at least 2");
  if (!(c.extent > 0.0)) bad_value("extent", fmt(c.extent), "a positive number");
  (void)parse_list(c.clips);
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.regime = gan::parse_regime(regime);
  if (t.regime.kind == gan::CriticRegime::clipping) t.regime.clip = clip;
  if (t.regime.kind == gan::CriticRegime::gradient_penalty) t.regime.lambda = lambda;
  t.regime.validate();
  t.n_critic = ncritic;
  t.batch = batch;
  t.iterations = iters;
  t.seed = seed;
  t.timing = timing;
  gan::OptimizerConfig o = gan::OptimizerConfig::default_for(t.regime);
  if (opt == "adam") o.kind = gan::OptimizerConfig::Kind::adam;
  if (opt == "rmsprop") o.kind = gan::OptimizerConfig::Kind::rmsprop;
  o.adam.beta1 = beta1;
  o.adam.beta2 = beta2;
  o.rmsprop.rho = rms_decay;
  t.critic_opt = o;
  t.gen_opt = o;
  auto set_lr = [](gan::OptimizerConfig& oc, std::optional<double> lr) {
    if (!lr) return;
    if (oc.kind == gan::OptimizerConfig::Kind::adam) oc.adam.lr = *lr;
    else oc.rmsprop.lr = *lr;
  };
  set_lr(t.critic_opt, critic_lr);
  set_lr(t.gen_opt, gen_lr);
  t.validate();
  return t;
}

std::string RunConfig::describe() const {
  std::string out;
  for (const auto& k : registry()) {
    if (!out.empty()) out += ' ';
    out += k.name + "=" + k.get(*this);
  }
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& k : registry()) out.push_back(k.name);
  return out;
}

void set_key(RunConfig& cfg, std::string_view key, std::string_view value) {
  for (const auto& k : registry()) {
    if (k.name == key) {
      k.set(cfg, trim(value));
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    set_key(cfg, trim(t.substr(0, eq)), t.substr(eq + 1));
  }
  validate_config(cfg);
}

RunConfig defaults_for(std::string_view experiment) {
  RunConfig c;
  c.experiment = std::string(experiment);
  if (experiment == "wdist") {
    c.dataset = "gaussian_1d";
    c.steps = 10000;
  } else if (experiment == "gradnorms") {
    c.dataset = "swiss_roll";
    c.hidden_layers = 11;
    c.steps = 2000;
  } else if (experiment == "train") {
    c.iters = 5000;
  } else if (experiment == "surface") {
    c.params = "critic.params";
  } else if (experiment == "overfit") {
    c.iters = 6000;
    c.width = 128;
    c.gen_lr = 1e-5;
  } else if (experiment == "lm-train" || experiment == "lm-sample") {
    c.latent = 128;
    c.batch = 32;
    c.iters = 3000;
    c.cadence = 100;
    if (experiment == "lm-sample") c.params = "generator.params";
  } else if (experiment != "check-grad") {
    throw ConfigError("unknown experiment '" + std::string(experiment) + "'");
  }
  return c;
}

std::vector<double> parse_list(std::string_view text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const auto end = comma == std::string_view::npos ? text.size() : comma;
    const std::string item = trim(text.substr(pos, end - pos));
    const double v = parse_double("clips", item);
    if (!(v > 0.0)) bad_value("clips", item, "positive thresholds");
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

// ---- shared pieces -------------------------------------------------------

namespace {

constexpr std::uint64_t kHeldOut = std::uint64_t{1} << 40;

// Independent seeds for the pieces of one run.
enum Stream : std::uint64_t {
  kRealData = 1,
  kFakeData,
  kCriticInit,
  kEvalEps,
  kGeneratorInit,
  kLatent,
  kSplit,
  kCorpus,
};

std::uint64_t sub_seed(std::uint64_t seed, Stream s) {
  return splitmix64(seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(s)));
}

data::ToyDistribution toy_for(const RunConfig& cfg) {
  switch (data::parse_toy(cfg.dataset)) {
    case data::ToyKind::swiss_roll: return data::ToyDistribution::swiss_roll();
    case data::ToyKind::eight_gaussians: return data::ToyDistribution::eight_gaussians();
    case data::ToyKind::twenty_five_gaussians: return data::ToyDistribution::twenty_five_gaussians();
    case data::ToyKind::gaussian_1d: return data::ToyDistribution::gaussian_1d(cfg.real_mu, 1.0);
    case data::ToyKind::point_pair: return data::ToyDistribution::point_pair({0, 0}, {1, 0});
  }
  throw ConfigError("unknown dataset '" + cfg.dataset + "'");
}

std::vector<std::size_t> hidden(const RunConfig& cfg, std::size_t in, std::size_t out) {
  std::vector<std::size_t> w{in};
  for (std::size_t i = 0; i < cfg.hidden_layers; ++i) w.push_back(cfg.width);
  w.push_back(out);
  return w;
}

std::ofstream open_output(const RunConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.out);
  const fs::path path = fs::path(cfg.out) / name;
  std::ofstream f(path);
  if (!f) throw Error("cannot write '" + path.string() + "'");
  f << "# config " << cfg.describe() << '\n';
  return f;
}

std::string params_comment(const RunConfig& cfg) { return "config " + cfg.describe(); }

void save(const RunConfig& cfg, const std::string& name, const nn::ParamSet& p) {
  fs::create_directories(cfg.out);
  nn::save_params((fs::path(cfg.out) / name).string(), p, params_comment(cfg));
}

// Streams metrics rows to metrics.csv so a diverged run keeps its history.
class MetricsWriter {
 public:
  explicit MetricsWriter(const RunConfig& cfg) : out_(open_output(cfg, "metrics.csv")) {
    out_ << gan::kMetricsHeader << '\n';
  }
  void operator()(const gan::MetricsRow& row) {
    out_ << gan::format_metrics_row(row) << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

Network trained(Network net, nn::ParamSet params) {
  net.params = std::move(params);
  return net;
}

Tensor uniform_eps(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Tensor eps(Shape{n});
  for (auto& e : eps.values()) e = rng.uniform();
  return eps;
}

}  // namespace

nn::MlpSpec critic_spec(const RunConfig& cfg, std::size_t dim) {
  nn::MlpSpec s{hidden(cfg, dim, 1), {nn::parse_activation(cfg.activation)}, cfg.layer_norm};
  s.validate();
  return s;
}

nn::MlpSpec generator_spec(const RunConfig& cfg, std::size_t dim) {
  nn::MlpSpec s{hidden(cfg, cfg.latent, dim), {nn::parse_activation(cfg.activation)}};
  s.validate();
  return s;
}

data::CharCorpus load_or_synth_corpus(const RunConfig& cfg) {
  if (!cfg.corpus.empty()) return data::load_corpus(cfg.corpus);
  return data::synth_corpus(cfg.grammar, cfg.corpus_size, sub_seed(cfg.seed, kCorpus));
}

lm::LmGeneratorSpec lm_generator_spec(const RunConfig& cfg, std::size_t vocab) {
  return {cfg.latent, cfg.channels, cfg.kernel, vocab};
}

lm::LmCriticSpec lm_critic_spec(const RunConfig& cfg, std::size_t vocab) {
  return {vocab, cfg.channels, cfg.kernel, 2};
}

// ---- experiments ---------------------------------------------------------

std::vector<gradcheck::Result> run_check_grad(const RunConfig& cfg) {
  const auto results = gradcheck::run_suite(cfg.seed, gradcheck::kDefaultSeeds);
  auto out = open_output(cfg, "gradcheck.csv");
  gradcheck::write_results_csv(out, results);
  return results;
}

WdistResult run_wdist(const RunConfig& cfg) {
  const TrainConfig tc = cfg.train_config();
  const auto real = data::toy_sampler(data::ToyDistribution::gaussian_1d(cfg.real_mu, 1.0),
                                      sub_seed(cfg.seed, kRealData));
  const auto fake = data::toy_sampler(data::ToyDistribution::gaussian_1d(cfg.fake_mu, 1.0),
                                      sub_seed(cfg.seed, kFakeData));
  const Network critic = gan::mlp_network(critic_spec(cfg, 1), sub_seed(cfg.seed, kCriticInit));
  MetricsWriter metrics(cfg);
  gan::Hooks hooks;
  hooks.on_row = std::ref(metrics);
  const auto r = gan::train_critic(tc, real, fake, critic, cfg.steps, hooks);
  const Network fitted = trained(critic, r.critic);
  save(cfg, "critic.params", r.critic);

  WdistResult out;
  out.steps = cfg.steps;
  out.w_estimate = gan::estimate_wasserstein(fitted, real, fake, cfg.samples, kHeldOut);
  const Tensor xhat = gan::interpolate_samples(
      real.draw(2 * kHeldOut, cfg.interpolates), fake.draw(2 * kHeldOut, cfg.interpolates),
      uniform_eps(cfg.interpolates, sub_seed(cfg.seed, kEvalEps)));
  out.norms = diag::penalty_norm_stats(fitted, xhat);

  auto f = open_output(cfg, "wdist.csv");
  f << "w_estimate,true_w,mean_norm,msd,interpolates,steps\n"
    << fmt15(out.w_estimate) << ',' << fmt15(std::abs(cfg.real_mu - cfg.fake_mu)) << ','
    << fmt15(out.norms.mean) << ',' << fmt15(out.norms.msd) << ',' << out.norms.count << ','
    << out.steps << '\n';
  return out;
}

std::vector<GradnormsRun> run_gradnorms(const RunConfig& cfg) {
  const auto dist = toy_for(cfg);
  const auto real = data::toy_sampler(dist, sub_seed(cfg.seed, kRealData));
  const auto fake = gan::fixed_noisy_generator(real, cfg.noise, sub_seed(cfg.seed, kFakeData));
  const Network critic =
      gan::mlp_network(critic_spec(cfg, dist.dim()), sub_seed(cfg.seed, kCriticInit));
  const std::size_t pb = cfg.probe_batch;
  const Tensor probe = concat_rows(real.draw(kHeldOut, pb), fake.draw(kHeldOut, pb));

  std::vector<std::pair<std::string, RunConfig>> plan;
  for (double c : parse_list(cfg.clips)) {
    RunConfig rc = cfg;
    rc.regime = "clip";
    rc.clip = c;
    plan.emplace_back("clip=" + fmt(c), rc);
  }
  if (cfg.penalty_run) {
    RunConfig rc = cfg;
    if (rc.regime != "gp1") rc.regime = "gp";
    plan.emplace_back(rc.regime, rc);
  }

  std::vector<GradnormsRun> runs;
  std::vector<diag::Histogram> hists;
  for (const auto& [label, rc] : plan) {
    const TrainConfig tc = rc.train_config();
    const auto r = gan::train_critic(tc, real, fake, critic, cfg.steps);
    const Network fitted = trained(critic, r.critic);
    GradnormsRun run;
    run.label = label;
    run.clip = tc.regime.kind == gan::CriticRegime::clipping ? tc.regime.clip : 0.0;
    run.layer_norms = diag::layer_gradient_norms(fitted, diag::wgan_critic_objective(pb), probe);
    const auto [lo, hi] = std::minmax_element(run.layer_norms.begin(), run.layer_norms.end());
    run.ratio = *hi / *lo;
    run.slope = diag::log_norm_slope(run.layer_norms);
    const auto w = diag::weight_entries(r.critic);
    double wmax = 0.0;
    for (double v : w) wmax = std::max(wmax, std::abs(v));
    const double c = run.clip > 0.0 ? run.clip : wmax;
    std::size_t near = 0;
    for (double v : w) near += std::abs(v) > 0.9 * c;
    run.frac_near_clip = static_cast<double>(near) / static_cast<double>(w.size());
    const auto h = diag::histogram(w, 20, -c, c);
    run.frac_outer_bins =
        static_cast<double>(h.counts.front() + h.counts.back()) / static_cast<double>(h.total());
    runs.push_back(run);
    hists.push_back(h);
  }

  auto norms = open_output(cfg, "gradnorms.csv");
  norms << "run,clip,layer,norm\n";
  for (const auto& r : runs) {
    for (std::size_t l = 0; l < r.layer_norms.size(); ++l) {
      norms << r.label << ',' << fmt15(r.clip) << ',' << l + 1 << ',' << fmt15(r.layer_norms[l])
            << '\n';
    }
  }
  auto weights = open_output(cfg, "weights.csv");
  weights << "run,bin_lo,bin_hi,count\n";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& h = hists[i];
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
      weights << runs[i].label << ',' << fmt15(h.edges[b]) << ',' << fmt15(h.edges[b + 1]) << ','
              << h.counts[b] << '\n';
    }
  }
  auto summary = open_output(cfg, "gradnorms_summary.csv");
  summary << "run,clip,ratio,slope,frac_near_clip,frac_outer_bins\n";
  for (const auto& r : runs) {
    summary << r.label << ',' << fmt15(r.clip) << ',' << fmt15(r.ratio) << ',' << fmt15(r.slope)
            << ',' << fmt15(r.frac_near_clip) << ',' << fmt15(r.frac_outer_bins) << '\n';
  }
  return runs;
}

gan::TrainResult run_train(const RunConfig& cfg) {
  const TrainConfig tc = cfg.train_config();
  const auto dist = toy_for(cfg);
  const auto real = data::toy_sampler(dist, sub_seed(cfg.seed, kRealData));
  const auto latent =
      data::latent_sampler(cfg.latent, data::LatentKind::gaussian, sub_seed(cfg.seed, kLatent));
  const Network gen =
      gan::mlp_network(generator_spec(cfg, dist.dim()), sub_seed(cfg.seed, kGeneratorInit));
  const Network critic =
      gan::mlp_network(critic_spec(cfg, dist.dim()), sub_seed(cfg.seed, kCriticInit));
  MetricsWriter metrics(cfg);
  gan::Hooks hooks;
  hooks.on_row = std::ref(metrics);
  auto r = gan::train(tc, real, latent, gen, critic, hooks);
  save(cfg, "generator.params", r.generator);
  save(cfg, "critic.params", r.critic);

  const Tensor samples = trained(gen, r.generator).evaluate(latent.draw(kHeldOut, 1000));
  auto f = open_output(cfg, "samples.csv");
  f << (dist.dim() == 1 ? "x\n" : "x,y\n");
  for (std::size_t i = 0; i < samples.dim(0); ++i) {
    for (std::size_t j = 0; j < samples.dim(1); ++j) {
      f << (j ? "," : "") << fmt15(samples.at(i, j));
    }
    f << '\n';
  }
  return r;
}

diag::Surface run_surface(const RunConfig& cfg) {
  const auto dist = toy_for(cfg);
  if (dist.dim() != 2) throw ConfigError("surface needs a two-dimensional dataset");
  const Network critic = gan::mlp_network(critic_spec(cfg, 2), nn::load_params(cfg.params));
  const diag::GridSpec grid{-cfg.extent, cfg.extent, -cfg.extent, cfg.extent, cfg.grid, cfg.grid};
  const diag::Surface s = diag::value_surface(critic, grid);
  auto csv = open_output(cfg, "surface.csv");
  diag::write_surface_csv(csv, s);
  fs::create_directories(cfg.out);
  std::ofstream svg(fs::path(cfg.out) / "surface.svg");
  svg << "<!-- config " << cfg.describe() << " -->\n";
  const Tensor points = data::sample_toy(dist, sub_seed(cfg.seed, kRealData), 256);
  diag::write_surface_svg(svg, s, &points);
  return s;
}

OverfitResult run_overfit(const RunConfig& cfg) {
  const TrainConfig tc = cfg.train_config();
  const auto dist = toy_for(cfg);
  const data::Split split =
      data::toy_split(dist, data::SplitSpec{cfg.train_size, cfg.val_size, sub_seed(cfg.seed, kSplit)});
  const auto real = data::dataset_sampler(split.train, sub_seed(cfg.seed, kRealData));
  const auto latent =
      data::latent_sampler(cfg.latent, data::LatentKind::gaussian, sub_seed(cfg.seed, kLatent));
  const Network gen =
      gan::mlp_network(generator_spec(cfg, dist.dim()), sub_seed(cfg.seed, kGeneratorInit));
  const Network critic =
      gan::mlp_network(critic_spec(cfg, dist.dim()), sub_seed(cfg.seed, kCriticInit));
  diag::TrainValTracker tracker(critic, gen, split.train, split.validation,
                                latent.draw(kHeldOut, cfg.val_size), cfg.cadence);
  MetricsWriter metrics(cfg);
  gan::Hooks hooks = tracker.hooks();
  hooks.on_row = std::ref(metrics);
  OverfitResult out;
  out.rows = gan::train(tc, real, latent, gen, critic, hooks).rows;
  out.points = tracker.points();
  auto f = open_output(cfg, "track.csv");
  diag::write_track_csv(f, out.points);
  return out;
}

LmResult run_lm_train(const RunConfig& cfg) {
  const TrainConfig tc = cfg.train_config();
  const data::CharCorpus corpus = load_or_synth_corpus(cfg);
  const std::size_t v = corpus.vocab_size();
  const Network gen = lm::generator_network(lm_generator_spec(cfg, v),
                                            sub_seed(cfg.seed, kGeneratorInit));
  const Network critic = lm::critic_network(lm_critic_spec(cfg, v), sub_seed(cfg.seed, kCriticInit));
  const auto latent =
      data::latent_sampler(cfg.latent, data::LatentKind::gaussian, sub_seed(cfg.seed, kLatent));
  const Tensor z_eval = latent.draw(kHeldOut, cfg.lm_samples);

  LmResult out;
  auto observe = [&](std::size_t iter, const nn::ParamSet& params) {
    const Tensor soft = trained(gen, params).evaluate(z_eval);
    out.samples = lm::decode_batch(soft, corpus);
    out.track.push_back({iter, lm::mean_max_probability(soft),
                         lm::ngram_divergence(out.samples, corpus, 1),
                         lm::ngram_divergence(out.samples, corpus, 2)});
  };
  observe(0, gen.params);

  MetricsWriter metrics(cfg);
  gan::Hooks hooks;
  hooks.on_row = std::ref(metrics);
  hooks.on_iteration = [&](std::size_t it, const nn::ParamSet& g, const nn::ParamSet&) {
    if (it % cfg.cadence == 0 || it == cfg.iters) observe(it, g);
  };
  const auto r = gan::train(tc, data::corpus_sampler(corpus, sub_seed(cfg.seed, kRealData)),
                            latent, gen, critic, hooks);
  save(cfg, "generator.params", r.generator);
  save(cfg, "critic.params", r.critic);

  auto track = open_output(cfg, "lm_track.csv");
  track << "iter,mean_max_prob,js_unigram,js_bigram\n";
  for (const auto& p : out.track) {
    track << p.iter << ',' << fmt15(p.mean_max_prob) << ',' << fmt15(p.js_unigram) << ','
          << fmt15(p.js_bigram) << '\n';
  }
  auto samples = open_output(cfg, "samples.txt");
  lm::write_samples(samples, out.samples);
  return out;
}

std::vector<std::string> run_lm_sample(const RunConfig& cfg) {
  const data::CharCorpus corpus = load_or_synth_corpus(cfg);
  const Network gen =
      lm::generator_network(lm_generator_spec(cfg, corpus.vocab_size()), nn::load_params(cfg.params));
  const auto latent =
      data::latent_sampler(cfg.latent, data::LatentKind::gaussian, sub_seed(cfg.seed, kLatent));
  const auto samples = lm::decode_batch(gen.evaluate(latent.draw(kHeldOut, cfg.lm_samples)), corpus);
  auto f = open_output(cfg, "samples.txt");
  lm::write_samples(f, samples);
  return samples;
}

}  // namespace gplab::exp

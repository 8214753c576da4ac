#pragma once

// Reproducible experiments shared by the command-line tool and the
// acceptance runner. Every output file starts with a "# config" line holding
// the fully resolved configuration.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gplab/diagnostics.hpp"
#include "gplab/gradcheck.hpp"
#include "gplab/langmodel.hpp"

namespace gplab::exp {

namespace fs = std::filesystem;

// ---- configuration -------------------------------------------------------

struct RunConfig {
  std::string experiment;
  std::uint64_t seed = 0;
  std::string out = "out";

  // training loop
  std::string regime = "gp";
  double clip = 0.01;
  double lambda = 10.0;
  std::size_t ncritic = 5;
  std::size_t iters = 1000;
  std::size_t batch = 64;
  std::string opt = "auto";  // auto picks rmsprop for clip, adam otherwise
  std::optional<double> critic_lr, gen_lr;
  double beta1 = 0.0, beta2 = 0.9;
  double rms_decay = 0.9;
  bool timing = false;

  // toy networks and data
  std::string dataset = "eight_gaussians";
  std::size_t width = 64;
  std::size_t hidden_layers = 3;
  std::string activation = "relu";
  bool layer_norm = false;
  std::size_t latent = 2;

  // critic-only experiments
  std::size_t steps = 2000;
  double real_mu = 3.0, fake_mu = 0.0;
  std::size_t samples = 100000;
  std::size_t interpolates = 10000;
  std::string clips = "0.1,0.01,0.001";
  bool penalty_run = true;
  std::size_t probe_batch = 256;
  double noise = 1.0;

  // overfitting
  std::size_t train_size = 64;
  std::size_t val_size = 256;
  std::size_t cadence = 10;

  // value surface
  std::string params;
  std::size_t grid = 64;
  double extent = 3.0;

  // language model
  std::string corpus;  // file path; empty uses the grammar
  std::string grammar{data::kDefaultGrammar};
  std::size_t corpus_size = 2000;
  std::size_t channels = 16;
  std::size_t kernel = 5;
  std::size_t lm_samples = 1000;

  // Optimizer names and learning rates with the regime defaults filled in.
  gan::TrainConfig train_config() const;
  // One line of key=value pairs in registry order.
  std::string describe() const;
};

std::vector<std::string> config_keys();
// Throws ConfigError naming the key for unknown keys or malformed values.
void set_key(RunConfig& cfg, std::string_view key, std::string_view value);
// Flat key=value lines, '#' comments and blank lines ignored.
void apply_config_file(RunConfig& cfg, const std::string& path);
// Cross-field checks; throws ConfigError naming the offending key.
void validate_config(const RunConfig& cfg);
// Defaults for one experiment: wdist, gradnorms, train, surface, overfit,
// lm-train, lm-sample, check-grad.
RunConfig defaults_for(std::string_view experiment);

// ---- results -------------------------------------------------------------

struct WdistResult {
  double w_estimate = 0.0;
  gan::NormStats norms;
  std::size_t steps = 0;
};

struct GradnormsRun {
  std::string label;  // "clip=<c>" or "gp"
  double clip = 0.0;  // 0 for the penalty run
  std::vector<double> layer_norms;
  double ratio = 0.0;  // max / min layer norm
  double slope = 0.0;  // least squares of ln(norm) on layer index
  double frac_near_clip = 0.0;  // |w| > 0.9 c, with c = max |w| for the penalty run
  double frac_outer_bins = 0.0;  // end bins of a 20-bin histogram over [-c, c]
};

struct OverfitResult {
  std::vector<diag::TrackPoint> points;
  std::vector<gan::MetricsRow> rows;
};

struct LmTrackPoint {
  std::size_t iter = 0;
  double mean_max_prob = 0.0;
  double js_unigram = 0.0;
  double js_bigram = 0.0;
};

struct LmResult {
  std::vector<LmTrackPoint> track;  // includes iteration 0
  std::vector<std::string> samples;
};

// ---- experiments ---------------------------------------------------------
// Each writes its files into cfg.out (created if needed).

// FD suite at seeds cfg.seed .. cfg.seed + 9; writes gradcheck.csv.
std::vector<gradcheck::Result> run_check_grad(const RunConfig& cfg);

// Critic-only on 1D N(real_mu, 1) vs N(fake_mu, 1); writes metrics.csv,
// critic.params and wdist.csv.
WdistResult run_wdist(const RunConfig& cfg);

// Deep critic on a toy set against noisy copies of it, once per clip value
// and once with the penalty; writes gradnorms.csv, weights.csv and
// gradnorms_summary.csv.
std::vector<GradnormsRun> run_gradnorms(const RunConfig& cfg);

// Adversarial training on a toy set; writes metrics.csv, generator.params,
// critic.params and samples.csv.
gan::TrainResult run_train(const RunConfig& cfg);

// Critic value surface from cfg.params; writes surface.csv and surface.svg.
diag::Surface run_surface(const RunConfig& cfg);

// Training on a frozen subset with validation tracking; writes metrics.csv
// and track.csv.
OverfitResult run_overfit(const RunConfig& cfg);

// Sequence model; writes metrics.csv, lm_track.csv, generator.params,
// critic.params and samples.txt.
LmResult run_lm_train(const RunConfig& cfg);

// Decodes cfg.lm_samples sequences from the generator in cfg.params; writes
// samples.txt.
std::vector<std::string> run_lm_sample(const RunConfig& cfg);

// ---- shared pieces -------------------------------------------------------

nn::MlpSpec critic_spec(const RunConfig& cfg, std::size_t dim);
nn::MlpSpec generator_spec(const RunConfig& cfg, std::size_t dim);
data::CharCorpus load_or_synth_corpus(const RunConfig& cfg);
lm::LmGeneratorSpec lm_generator_spec(const RunConfig& cfg, std::size_t vocab);
lm::LmCriticSpec lm_critic_spec(const RunConfig& cfg, std::size_t vocab);

std::vector<double> parse_list(std::string_view text);

}  // namespace gplab::exp

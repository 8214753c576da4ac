// Command-line front end: one subcommand per experiment.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "gplab/error.hpp"
#include "gplab/experiments.hpp"

using namespace gplab;

namespace {

struct Flags {
  std::string config;
  std::optional<std::string> seed, out, regime, clip, lambda, ncritic, iters, opt;
  std::vector<std::string> sets;
};

void add_flags(CLI::App& sub, Flags& f) {
  sub.add_option("--config", f.config, "key=value config file");
  sub.add_option("--seed", f.seed, "random seed");
  sub.add_option("--out", f.out, "output directory");
  sub.add_option("--regime", f.regime, "gp | gp1 | clip | gan");
  sub.add_option("--clip", f.clip, "weight clipping threshold");
  sub.add_option("--lambda", f.lambda, "penalty coefficient");
  sub.add_option("--ncritic", f.ncritic, "critic steps per generator step");
  sub.add_option("--iters", f.iters, "generator iterations");
  sub.add_option("--opt", f.opt, "adam | rmsprop");
  sub.add_option("--set", f.sets, "override any config key (KEY=VALUE)");
}

exp::RunConfig resolve(const std::string& name, const Flags& f) {
  exp::RunConfig cfg = exp::defaults_for(name);
  if (!f.config.empty()) exp::apply_config_file(cfg, f.config);
  if (cfg.experiment != name) {
    throw ConfigError("config key 'experiment' is '" + cfg.experiment + "' but the command is '" +
                      name + "'");
  }
  const std::pair<const char*, const std::optional<std::string>*> flags[] = {
      {"seed", &f.seed},       {"out", &f.out},         {"regime", &f.regime},
      {"clip", &f.clip},       {"lambda", &f.lambda},   {"ncritic", &f.ncritic},
      {"iters", &f.iters},     {"opt", &f.opt}};
  for (const auto& [key, value] : flags) {
    if (*value) exp::set_key(cfg, key, **value);
  }
  for (const auto& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
    exp::set_key(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  exp::validate_config(cfg);
  return cfg;
}

int run(const exp::RunConfig& cfg) {
  const std::string& e = cfg.experiment;
  if (e == "check-grad") {
    const auto results = exp::run_check_grad(cfg);
    std::size_t failed = 0;
    for (const auto& r : results) {
      if (!r.passed()) {
        ++failed;
        std::printf("FAIL %s seed=%llu order=%d error=%.3e\n", r.name.c_str(),
                    static_cast<unsigned long long>(r.seed), r.order, r.error);
      }
    }
    std::printf("%zu checks, %zu failed\n", results.size(), failed);
    return failed == 0 ? 0 : 3;
  }
  if (e == "wdist") {
    const auto r = exp::run_wdist(cfg);
    std::printf("w_estimate=%.6f mean_norm=%.6f msd=%.6f\n", r.w_estimate, r.norms.mean,
                r.norms.msd);
  } else if (e == "gradnorms") {
    for (const auto& r : exp::run_gradnorms(cfg)) {
      std::printf("%s ratio=%.4g slope=%.4f near_clip=%.3f outer_bins=%.3f\n", r.label.c_str(),
                  r.ratio, r.slope, r.frac_near_clip, r.frac_outer_bins);
    }
  } else if (e == "train") {
    const auto r = exp::run_train(cfg);
    const auto& last = r.rows.back();
    std::printf("iter=%zu critic_loss=%.6f gen_loss=%.6f w_estimate=%.6f\n", last.iter,
                last.critic_loss, last.gen_loss, last.w_estimate);
  } else if (e == "surface") {
    const auto s = exp::run_surface(cfg);
    std::printf("surface %zux%zu\n", s.grid.nx, s.grid.ny);
  } else if (e == "overfit") {
    const auto r = exp::run_overfit(cfg);
    if (!r.points.empty()) {
      const auto& p = r.points.back();
      std::printf("iter=%zu train=%.6f validation=%.6f gap=%.6f\n", p.iter, p.train_negloss,
                  p.validation_negloss, p.gap());
    }
  } else if (e == "lm-train") {
    const auto r = exp::run_lm_train(cfg);
    const auto& p = r.track.back();
    std::printf("iter=%zu mean_max_prob=%.4f js_unigram=%.4f js_bigram=%.4f\n", p.iter,
                p.mean_max_prob, p.js_unigram, p.js_bigram);
  } else if (e == "lm-sample") {
    const auto s = exp::run_lm_sample(cfg);
    std::printf("%zu samples\n", s.size());
  }
  std::printf("wrote %s\n", cfg.out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"WGAN-GP lab"};
  app.require_subcommand(1);
  const char* names[] = {"check-grad", "train",    "surface",  "gradnorms",
                         "wdist",      "overfit",  "lm-train", "lm-sample"};
  const char* help[] = {"finite-difference suite",
                        "adversarial training on a toy set",
                        "critic value surface from saved parameters",
                        "per-layer critic gradient norms and weight histograms",
                        "critic-only Wasserstein estimate between 1D Gaussians",
                        "train / validation critic gap on a frozen subset",
                        "character-level sequence model",
                        "decode samples from a saved sequence generator"};
  Flags flags;
  for (std::size_t i = 0; i < std::size(names); ++i) add_flags(*app.add_subcommand(names[i], help[i]), flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    const exp::RunConfig cfg = resolve(app.get_subcommands().front()->get_name(), flags);
    return run(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const gan::TrainingDiverged& e) {
    std::cerr << "non-finite loss at iteration " << e.iteration() << ": " << e.what() << '\n';
    return 2;
  } catch (const NonFiniteError& e) {
    std::cerr << "non-finite value: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
}

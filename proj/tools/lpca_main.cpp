// lpca: local principal component analysis for nonlinear factor models.
//
//   lpca estimate  --input X.csv [--K 20 | --c 1.0] [--distance pseudo-max] ...
//   lpca covadjust --input X.csv --covariate W1.csv --covariate W2.csv ...
//   lpca synth     --input Y.csv --treated 16 --p0 88 [--match-rows 40] ...
//   lpca simulate  --model 1 --n 400 --p 400 --reps 50 --c 1 ...
//
// Any flag can also come from `--config file` (key=value lines); flags given
// on the command line override the file.

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lpca/cli.hpp"

namespace {

struct Flags {
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
  std::map<std::string, bool> switches;
  std::vector<std::string> covariates;
  std::string config;
};

void add_value(CLI::App* app, Flags& f, const std::string& key, const std::string& help) {
  f.options[key] = app->add_option("--" + key, f.values[key], help);
}

void add_switch(CLI::App* app, Flags& f, const std::string& key, const std::string& help) {
  f.options[key] = app->add_flag("--" + key, f.switches[key], help);
}

void add_common(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config, "key=value config file (flags override it)");
  add_value(app, f, "distance", "euclidean | pseudo-max | average | weighted:<weights.csv>");
  add_value(app, f, "K", "number of nearest neighbors (overrides --c)");
  add_value(app, f, "c", "K = round(c * n^(2/3)) when --K is absent (default 1)");
  add_value(app, f, "split", "row-split fractions, e.g. 0.5,0.5 or 1/3,1/3,1/3");
  add_value(app, f, "split-mode", "contiguous | random");
  add_value(app, f, "rule", "fixed:<d> | ratio:<d_max>:loglogK | ratio:<d_max>:<threshold>");
  add_value(app, f, "seed", "seed for random splits and simulations");
  add_value(app, f, "out", "output directory");
  add_value(app, f, "threads", "worker cap (0 = all cores)");
  add_value(app, f, "kmax", "largest factor count for the eigenvalue-ratio test");
}

void add_data(CLI::App* app, Flags& f) {
  add_value(app, f, "input", "panel CSV, rows = features/periods, columns = units");
  add_switch(app, f, "header", "input CSV has a header row");
  add_value(app, f, "missing-token", "cell value marking a missing entry (default NA)");
  add_value(app, f, "match-rows", "use the first N rows for matching, the rest for PCA");
  add_value(app, f, "split-file", "row split file (dagger/ddagger/wr lines, 1-based)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Local principal component analysis for nonlinear factor models"};
  app.set_version_flag("--version", LPCA_VERSION);
  app.require_subcommand(1);

  std::map<std::string, Flags> flags;
  auto* estimate = app.add_subcommand("estimate", "fit local PCA and write the estimated means");
  auto* covadjust = app.add_subcommand("covadjust", "covariate-adjusted local PCA");
  auto* synth = app.add_subcommand("synth", "synthetic-control counterfactual for one treated unit");
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo comparison of local and global PCA");

  for (auto* sub : {estimate, covadjust, synth, simulate}) add_common(sub, flags[sub->get_name()]);
  for (auto* sub : {estimate, covadjust, synth}) add_data(sub, flags[sub->get_name()]);

  add_switch(estimate, flags["estimate"], "crossfit", "also fit the matching rows with the roles swapped");
  add_value(estimate, flags["estimate"], "latent-gap", "run the latent-dimension diagnostic with this gap ratio");
  covadjust->add_option("--covariate", flags["covadjust"].covariates, "regressor CSV (repeatable)");
  add_value(synth, flags["synth"], "treated", "treated unit (1-based column)");
  add_value(synth, flags["synth"], "p0", "last pre-treatment period (1-based row)");
  add_value(synth, flags["synth"], "mode", "level translation: additive | multiplicative");
  add_value(synth, flags["synth"], "initial-level", "starting level for the level paths");
  add_value(simulate, flags["simulate"], "model", "1 (Gaussian bump) | 2 (Laplace) | 3 (Bernoulli)");
  add_value(simulate, flags["simulate"], "n", "units");
  add_value(simulate, flags["simulate"], "p", "features");
  add_value(simulate, flags["simulate"], "reps", "replications");
  add_value(simulate, flags["simulate"], "noise-sd", "noise standard deviation for models 1-2 (default 0.5)");
  add_switch(simulate, flags["simulate"], "per-rep", "also write per-replication metrics");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : lpca::cli::kConfigError;
  }

  for (auto* sub : {estimate, covadjust, synth, simulate}) {
    if (!sub->parsed()) continue;
    auto& f = flags[sub->get_name()];
    lpca::cli::RunConfig config;
    try {
      if (!f.config.empty()) lpca::cli::apply_config_file(config, f.config);
      config.command = sub->get_name();
      for (const auto& [key, opt] : f.options) {
        if (opt->count() == 0) continue;
        if (f.switches.count(key))
          lpca::cli::apply_setting(config, key, f.switches[key] ? "true" : "false");
        else
          lpca::cli::apply_setting(config, key, f.values[key]);
      }
      if (!f.covariates.empty()) config.covariates = f.covariates;
    } catch (const lpca::Error& e) {
      std::cerr << "error: " << e.what() << '\n';
      return e.kind() == lpca::ErrorKind::Data ? lpca::cli::kDataError : lpca::cli::kConfigError;
    }
    return lpca::cli::run(config);
  }
  return lpca::cli::kConfigError;
}

#pragma once

// Command front end shared by the `lpca` executable and its tests.
//
// A run is described by a RunConfig, filled from an optional key=value
// config file and then from command-line overrides. Every run writes a
// manifest in the same key=value format, so `--config <manifest>` replays it.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lpca/lpca.hpp"

namespace lpca::cli {

enum ExitCode : int { kOk = 0, kConfigError = 1, kDataError = 2, kNumericalError = 3 };

struct RunConfig {
  std::string command;  // estimate | covadjust | synth | simulate
  std::string input;
  std::vector<std::string> covariates;
  bool header = false;
  std::string missing_token = "NA";
  std::string distance = "pseudo-max";
  std::optional<long long> k;
  double k_const = 1.0;
  std::string split;  // fractions, e.g. "0.5,0.5" or "1/3,1/3,1/3"; empty = per-command default
  std::string split_mode = "contiguous";
  std::optional<long long> match_rows;
  std::string split_file;
  std::string rule = "ratio:2:loglogK";
  unsigned long long seed = 1;
  std::string out = "lpca_out";
  unsigned threads = 0;
  long long kmax = 8;
  bool crossfit = false;
  std::optional<double> latent_gap;
  // synth
  std::optional<long long> treated;
  std::optional<long long> p0;
  std::string level_mode = "additive";
  std::optional<double> initial_level;
  // simulate
  int model = 1;
  long long n = 400;
  long long p = 400;
  long long reps = 1;
  std::optional<double> noise_sd;
  bool per_rep = false;
};

namespace detail {

inline std::string trim_copy(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("invalid boolean for " + key + ": '" + v + "'");
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    T out;
    if constexpr (std::is_floating_point_v<T>)
      out = static_cast<T>(std::stod(v, &used));
    else if constexpr (std::is_unsigned_v<T>)
      out = static_cast<T>(std::stoull(v, &used));
    else
      out = static_cast<T>(std::stoll(v, &used));
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::logic_error&) {
    throw ConfigError("invalid number for " + key + ": '" + v + "'");
  }
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim_copy(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

/// Parses "0.5", "1/3" style proportions.
inline double parse_fraction(const std::string& s) {
  const auto slash = s.find('/');
  if (slash == std::string::npos) return parse_number<double>("split", s);
  const double num = parse_number<double>("split", trim_copy(s.substr(0, slash)));
  const double den = parse_number<double>("split", trim_copy(s.substr(slash + 1)));
  if (den == 0.0) throw ConfigError("split fraction has zero denominator");
  return num / den;
}

inline std::string fmt(double v) { return lpca::detail::format_double(v, 17); }

}  // namespace detail

/// Applies one key=value setting. Keys match the long command-line flags.
inline void apply_setting(RunConfig& c, const std::string& key, const std::string& raw) {
  using namespace detail;
  const std::string v = trim_copy(raw);
  if (key == "command") c.command = v;
  else if (key == "input") c.input = v;
  else if (key == "covariates") c.covariates = split_list(v);
  else if (key == "covariate") c.covariates.push_back(v);
  else if (key == "header") c.header = parse_bool(key, v);
  else if (key == "missing-token") c.missing_token = v;
  else if (key == "distance") c.distance = v;
  else if (key == "K") c.k = v.empty() ? std::nullopt : std::optional<long long>(parse_number<long long>(key, v));
  else if (key == "c") c.k_const = parse_number<double>(key, v);
  else if (key == "split") c.split = v;
  else if (key == "split-mode") c.split_mode = v;
  else if (key == "match-rows") c.match_rows = v.empty() ? std::nullopt : std::optional<long long>(parse_number<long long>(key, v));
  else if (key == "split-file") c.split_file = v;
  else if (key == "rule") c.rule = v;
  else if (key == "seed") c.seed = parse_number<unsigned long long>(key, v);
  else if (key == "out") c.out = v;
  else if (key == "threads") c.threads = parse_number<unsigned>(key, v);
  else if (key == "kmax") c.kmax = parse_number<long long>(key, v);
  else if (key == "crossfit") c.crossfit = parse_bool(key, v);
  else if (key == "latent-gap") c.latent_gap = v.empty() ? std::nullopt : std::optional<double>(parse_number<double>(key, v));
  else if (key == "treated") c.treated = parse_number<long long>(key, v);
  else if (key == "p0") c.p0 = parse_number<long long>(key, v);
  else if (key == "mode") c.level_mode = v;
  else if (key == "initial-level") c.initial_level = v.empty() ? std::nullopt : std::optional<double>(parse_number<double>(key, v));
  else if (key == "model") c.model = parse_number<int>(key, v);
  else if (key == "n") c.n = parse_number<long long>(key, v);
  else if (key == "p") c.p = parse_number<long long>(key, v);
  else if (key == "reps") c.reps = parse_number<long long>(key, v);
  else if (key == "noise-sd") c.noise_sd = v.empty() ? std::nullopt : std::optional<double>(parse_number<double>(key, v));
  else if (key == "per-rep") c.per_rep = parse_bool(key, v);
  else if (key == "version") {
  }  // manifest echo, informational
  else
    throw ConfigError("unknown config key '" + key + "'");
}

/// Reads `key = value` lines; '#' starts a comment.
inline void apply_config_file(RunConfig& c, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file: " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = detail::trim_copy(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key=value");
    apply_setting(c, detail::trim_copy(line.substr(0, eq)), line.substr(eq + 1));
  }
}

/// Manifest: every setting that influences the outputs, in key=value form.
inline std::string manifest(const RunConfig& c) {
  using detail::fmt;
  std::ostringstream m;
  auto opt_i = [](const std::optional<long long>& v) { return v ? std::to_string(*v) : std::string(); };
  auto opt_d = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string(); };
  m << "# lpca run manifest; replay with: lpca " << c.command << " --config <this file>\n";
  m << "version=" << LPCA_VERSION << '\n';
  m << "command=" << c.command << '\n';
  m << "seed=" << c.seed << '\n';
  m << "threads=" << c.threads << '\n';
  if (c.command != "simulate") {
    m << "input=" << c.input << '\n';
    m << "header=" << (c.header ? "true" : "false") << '\n';
    m << "missing-token=" << c.missing_token << '\n';
  }
  if (c.command == "covadjust") {
    m << "covariates=";
    for (std::size_t k = 0; k < c.covariates.size(); ++k) m << (k ? "," : "") << c.covariates[k];
    m << '\n';
  }
  m << "distance=" << c.distance << '\n';
  m << "K=" << opt_i(c.k) << '\n';
  m << "c=" << fmt(c.k_const) << '\n';
  m << "split=" << c.split << '\n';
  m << "split-mode=" << c.split_mode << '\n';
  m << "match-rows=" << opt_i(c.match_rows) << '\n';
  m << "split-file=" << c.split_file << '\n';
  m << "rule=" << c.rule << '\n';
  m << "kmax=" << c.kmax << '\n';
  m << "out=" << c.out << '\n';
  if (c.command == "estimate") {
    m << "crossfit=" << (c.crossfit ? "true" : "false") << '\n';
    m << "latent-gap=" << opt_d(c.latent_gap) << '\n';
  }
  if (c.command == "synth") {
    m << "treated=" << opt_i(c.treated) << '\n';
    m << "p0=" << opt_i(c.p0) << '\n';
    m << "mode=" << c.level_mode << '\n';
    m << "initial-level=" << opt_d(c.initial_level) << '\n';
  }
  if (c.command == "simulate") {
    m << "model=" << c.model << '\n';
    m << "n=" << c.n << '\n';
    m << "p=" << c.p << '\n';
    m << "reps=" << c.reps << '\n';
    m << "noise-sd=" << opt_d(c.noise_sd) << '\n';
    m << "per-rep=" << (c.per_rep ? "true" : "false") << '\n';
  }
  return m.str();
}

namespace detail {

inline void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string("missing ") + what + " path");
  if (!std::filesystem::is_regular_file(path)) throw DataError(std::string(what) + " file not found: " + path);
}

inline std::vector<double> fractions(const std::string& spec) {
  std::vector<double> out;
  for (const auto& f : split_list(spec)) out.push_back(parse_fraction(f));
  return out;
}

inline SplitMode split_mode(const std::string& s) {
  if (s == "contiguous") return SplitMode::Contiguous;
  if (s == "random") return SplitMode::Random;
  throw ConfigError("split-mode must be 'contiguous' or 'random'");
}

inline RowSplit resolve_split(const RunConfig& c, Index p, const std::string& default_fractions) {
  RowSplit s;
  if (!c.split_file.empty()) {
    std::ifstream in(c.split_file);
    if (!in) throw DataError("split file not found: " + c.split_file);
    s = read_split(in);
  } else if (c.match_rows) {
    s = leading_split(p, static_cast<Index>(*c.match_rows));
  } else {
    const auto f = fractions(c.split.empty() ? default_fractions : c.split);
    s = row_split(p, f, split_mode(c.split_mode), c.seed);
  }
  validate_split(s, p);
  return s;
}

inline LpcaOptions lpca_options(const RunConfig& c, Index n) {
  LpcaOptions opt;
  opt.k = c.k ? static_cast<Index>(*c.k) : k_from_constant(c.k_const, n);
  if (opt.k < 1 || opt.k > n) throw ConfigError("K must lie in [1, n=" + std::to_string(n) + "]");
  opt.distance = parse_distance_kind(c.distance);
  opt.rule = parse_factor_rule(c.rule);
  opt.threads = Threads{c.threads};
  return opt;
}

inline std::ofstream open_out(const std::filesystem::path& dir, const std::string& name) {
  std::ofstream f(dir / name, std::ios::binary);
  if (!f) throw DataError("cannot write " + (dir / name).string());
  return f;
}

inline void write_split_file(const std::filesystem::path& dir, const RowSplit& s) {
  auto f = open_out(dir, "split.txt");
  write_split(f, s);
}

inline void write_common(const std::filesystem::path& dir, const LpcaFit& fit) {
  {
    auto f = open_out(dir, "neighbors.csv");
    write_neighbors_csv(f, fit.neighbors);
  }
  auto f = open_out(dir, "spectra.csv");
  write_spectra_csv(f, fit.models);
}

inline void run_estimate(const RunConfig& c, const std::filesystem::path& dir, std::ostream& log) {
  const DataMatrix x = load_csv(c.input, CsvOptions{c.missing_token, c.header});
  const RowSplit split = resolve_split(c, x.p(), "0.5,0.5");
  if (split.three_way()) throw ConfigError("estimate uses a two-way split");
  const LpcaOptions opt = lpca_options(c, x.n());
  const auto fit = run_lpca(x.values, split, opt);
  write_split_file(dir, split);
  write_common(dir, fit);

  Matrix hhat = fit.fitted;
  if (c.crossfit) {
    const auto swapped = run_lpca(x.values, split.ddagger, split.dagger, opt);
    hhat.resize(x.p(), x.n());
    for (std::size_t r = 0; r < split.ddagger.size(); ++r) hhat.row(split.ddagger[r]) = fit.fitted.row(static_cast<Index>(r));
    for (std::size_t r = 0; r < split.dagger.size(); ++r) hhat.row(split.dagger[r]) = swapped.fitted.row(static_cast<Index>(r));
  }
  save_matrix_csv((dir / "hhat.csv").string(), hhat);

  if (c.latent_gap) {
    const auto est = estimate_latent_dim(select_rows(x.values, split.ddagger), fit.neighbors, *c.latent_gap, opt.threads);
    auto f = open_out(dir, "latent_dim.txt");
    f << "# experimental diagnostic: size of the second local eigenvalue group, max over units\n";
    f << "r=" << est.r << "\ninconclusive=" << (est.inconclusive ? "true" : "false") << '\n';
    log << "latent dimension (experimental): " << est.r << (est.inconclusive ? " (inconclusive)" : "") << '\n';
  }
  log << "estimated " << fit.fitted.rows() << " x " << fit.fitted.cols() << " means with K=" << opt.k << '\n';
}

inline void run_covadjust(const RunConfig& c, const std::filesystem::path& dir, std::ostream& log) {
  if (c.covariates.empty()) throw ConfigError("no covariates: use plain LPCA (estimate)");
  const CsvOptions csv{c.missing_token, c.header};
  for (const auto& path : c.covariates) require_file(path, "covariate");
  const DataMatrix x = load_csv(c.input, csv);
  CovariatePanel w;
  for (const auto& path : c.covariates) {
    auto m = load_csv(path, csv);
    if (!m.all_observed()) throw DataError("covariate file has missing cells: " + path);
    w.w.push_back(std::move(m.values));
  }
  const RowSplit split = resolve_split(c, x.p(), "1/3,1/3,1/3");
  const LpcaOptions opt = lpca_options(c, x.n());
  const auto res = covadjusted_lpca(x, w, split, opt);
  write_split_file(dir, split);
  {
    auto f = open_out(dir, "theta.csv");
    f << "index,theta\n";
    for (Index l = 0; l < res.theta.theta.size(); ++l)
      f << (l + 1) << ',' << lpca::detail::format_double(res.theta.theta(l), 12) << '\n';
  }
  LpcaFit view;
  view.neighbors = res.neighbors;
  view.models = res.models;
  write_common(dir, view);
  save_matrix_csv((dir / "hhat.csv").string(), res.fitted);
  log << "theta =";
  for (Index l = 0; l < res.theta.theta.size(); ++l) log << ' ' << lpca::detail::format_double(res.theta.theta(l), 12);
  log << '\n';
}

inline void run_synth(const RunConfig& c, const std::filesystem::path& dir, std::ostream& log) {
  if (!c.treated || !c.p0) throw ConfigError("synth needs --treated and --p0");
  const DataMatrix y = load_csv(c.input, CsvOptions{c.missing_token, c.header});
  TreatmentDesign design{static_cast<Index>(*c.treated) - 1, static_cast<Index>(*c.p0)};
  validate_design(design, y.p(), y.n());
  LevelMode mode;
  if (c.level_mode == "additive") mode = LevelMode::Additive;
  else if (c.level_mode == "multiplicative") mode = LevelMode::Multiplicative;
  else throw ConfigError("mode must be 'additive' or 'multiplicative'");
  const RowSplit split = resolve_split(c, y.p(), "0.5,0.5");
  const LpcaOptions opt = lpca_options(c, y.n());
  auto res = synth_estimate(y, design, split, opt);
  if (c.initial_level) attach_levels(res, *c.initial_level, mode);

  write_split_file(dir, split);
  write_common(dir, res.fit);
  save_matrix_csv((dir / "hhat.csv").string(), res.fit.fitted);
  auto f12 = [](double v) { return lpca::detail::format_double(v, 12); };
  {
    auto f = open_out(dir, "effects.csv");
    f << "period,observed,counterfactual,effect\n";
    for (std::size_t t = 0; t < res.periods.size(); ++t) {
      const auto ti = static_cast<Index>(t);
      f << (res.periods[t] + 1) << ',' << f12(res.observed(ti)) << ',' << f12(res.counterfactual(ti)) << ','
        << f12(res.effects(ti)) << '\n';
    }
  }
  {
    auto f = open_out(dir, "summary.txt");
    f << "avg_effect=" << f12(res.avg_effect) << '\n';
    f << "avg_counterfactual_minus_observed=" << f12(-res.avg_effect) << '\n';
    f << "post_periods=" << res.periods.size() << '\n';
  }
  if (res.counterfactual_level) {
    auto f = open_out(dir, "levels.csv");
    f << "period,observed_level,counterfactual_level\n";
    for (std::size_t t = 0; t < res.periods.size(); ++t) {
      const auto ti = static_cast<Index>(t);
      f << (res.periods[t] + 1) << ',' << f12((*res.observed_level)(ti)) << ',' << f12((*res.counterfactual_level)(ti))
        << '\n';
    }
  }
  log << "average effect (observed - counterfactual): " << f12(res.avg_effect) << '\n';
}

inline void run_simulate(const RunConfig& c, const std::filesystem::path& dir, std::ostream& log) {
  sim::SimConfig cfg;
  cfg.model = sim::model_from_int(c.model);
  if (c.n < 10 || c.p < 2) throw ConfigError("simulate needs n >= 10 and p >= 2");
  if (c.reps < 1) throw ConfigError("reps must be at least 1");
  cfg.n = static_cast<Index>(c.n);
  cfg.p = static_cast<Index>(c.p);
  cfg.reps = static_cast<Index>(c.reps);
  cfg.k_const = c.k_const;
  cfg.seed = c.seed;
  cfg.distance = parse_distance_kind(c.distance);
  const auto f = fractions(c.split.empty() ? "0.5" : c.split);
  if (f.empty() || !(f[0] > 0.0 && f[0] < 1.0)) throw ConfigError("simulate split must be a matching fraction in (0, 1)");
  cfg.split_fraction = f[0];
  cfg.rule = parse_factor_rule(c.rule);
  cfg.kmax = static_cast<Index>(c.kmax);
  cfg.noise_sd = c.noise_sd;
  cfg.threads = Threads{c.threads};
  (void)cfg.k();

  const auto records = sim::run_replications(cfg);
  const auto summary = sim::aggregate(records);
  {
    auto out = open_out(dir, "summary.csv");
    sim::write_summary(out, summary);
  }
  if (c.per_rep) {
    auto out = open_out(dir, "replications.csv");
    sim::write_replications(out, records);
  }
  sim::write_summary(log, summary);
}

}  // namespace detail

/// Validates the config, runs the command and writes its artifacts. Returns
/// the process exit code; errors go to `err` as a message plus a JSON record.
inline int run(const RunConfig& c, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  try {
    if (c.command != "estimate" && c.command != "covadjust" && c.command != "synth" && c.command != "simulate")
      throw ConfigError("unknown command '" + c.command + "'");
    if (c.command != "simulate") detail::require_file(c.input, "input");
    const std::filesystem::path dir(c.out);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory " + c.out + ": " + ec.message());

    if (c.command == "estimate") detail::run_estimate(c, dir, log);
    else if (c.command == "covadjust") detail::run_covadjust(c, dir, log);
    else if (c.command == "synth") detail::run_synth(c, dir, log);
    else detail::run_simulate(c, dir, log);

    auto f = detail::open_out(dir, "manifest.txt");
    f << manifest(c);
    return kOk;
  } catch (const Error& e) {
    int code = kConfigError;
    if (e.kind() == ErrorKind::Data) code = kDataError;
    if (e.kind() == ErrorKind::Numerical) code = kNumericalError;
    err << "error: " << e.what() << '\n';
    err << nlohmann::json{{"error", {{"kind", to_string(e.kind())}, {"exit_code", code}, {"message", e.what()}}}}.dump()
        << '\n';
    return code;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    err << nlohmann::json{{"error", {{"kind", "internal"}, {"exit_code", kNumericalError}, {"message", e.what()}}}}.dump()
        << '\n';
    return kNumericalError;
  }
}

}  // namespace lpca::cli

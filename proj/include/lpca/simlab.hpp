#pragma once

// Monte Carlo harness: data-generating processes for the three simulation
// models, missing-entry planting at latent quantiles, and LPCA-vs-GPCA
// replication studies.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lpca/data.hpp"
#include "lpca/covadjust.hpp"
#include "lpca/gpca.hpp"
#include "lpca/pipeline.hpp"

namespace lpca::sim {

enum class SimModel { GaussianBump = 1, LaplaceKernel = 2, LogisticBernoulli = 3 };

inline SimModel model_from_int(int m) {
  if (m < 1 || m > 3) throw ConfigError("model must be 1, 2 or 3");
  return static_cast<SimModel>(m);
}

/// eta(alpha, varpi) for each model.
inline double eta(SimModel model, double alpha, double varpi) {
  const double gap = alpha - varpi;
  switch (model) {
    case SimModel::GaussianBump:
      return std::exp(-10.0 * gap * gap) / (0.1 * std::sqrt(2.0 * std::numbers::pi));
    case SimModel::LaplaceKernel:
      return std::exp(-10.0 * std::abs(gap));
    case SimModel::LogisticBernoulli:
      return 1.0 - 1.0 / (1.0 + std::exp(15.0 * std::pow(0.8 * std::abs(gap), 0.8) - 0.1));
  }
  throw ContractError("unknown model");
}

struct SimData {
  DataMatrix x;
  Vector alpha;  // n
  Vector varpi;  // p
  Matrix h;      // p x n true means
};

/// Draws alpha (n), then varpi (p), then the observation noise column by
/// column, all from one mt19937_64 stream seeded with `seed`. Models 1-2 add
/// N(0, noise_sd^2) noise; model 3 observes Bernoulli(eta).
inline SimData generate(SimModel model, Index n, Index p, std::uint64_t seed, double noise_sd = 0.5) {
  if (n < 2 || p < 2) throw ConfigError("simulation needs n, p >= 2");
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  SimData d;
  d.alpha.resize(n);
  d.varpi.resize(p);
  for (Index i = 0; i < n; ++i) d.alpha(i) = unif(gen);
  for (Index l = 0; l < p; ++l) d.varpi(l) = unif(gen);
  d.h.resize(p, n);
  for (Index i = 0; i < n; ++i)
    for (Index l = 0; l < p; ++l) d.h(l, i) = eta(model, d.alpha(i), d.varpi(l));

  Matrix x(p, n);
  if (model == SimModel::LogisticBernoulli) {
    for (Index i = 0; i < n; ++i)
      for (Index l = 0; l < p; ++l) {
        const double mean = d.h(l, i);
        if (!(mean > 0.0 && mean < 1.0)) throw ContractError("internal: Bernoulli mean outside (0, 1)");
        x(l, i) = std::bernoulli_distribution(mean)(gen) ? 1.0 : 0.0;
      }
  } else {
    std::normal_distribution<double> noise(0.0, 1.0);
    for (Index i = 0; i < n; ++i)
      for (Index l = 0; l < p; ++l) x(l, i) = d.h(l, i) + noise_sd * noise(gen);
  }
  d.x = DataMatrix(std::move(x));
  return d;
}

/// Linear factor panel X = F L' + noise with F (p x r) and L (n x r) standard
/// normal.
inline SimData generate_linear_factors(Index n, Index p, Index r, std::uint64_t seed, double noise_sd = 1.0) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix f(p, r), l(n, r);
  for (Index c = 0; c < r; ++c) {
    for (Index t = 0; t < p; ++t) f(t, c) = z(gen);
    for (Index i = 0; i < n; ++i) l(i, c) = z(gen);
  }
  SimData d;
  d.h = f * l.transpose();
  Matrix x = d.h;
  for (Index i = 0; i < n; ++i)
    for (Index t = 0; t < p; ++t) x(t, i) += noise_sd * z(gen);
  d.x = DataMatrix(std::move(x));
  d.alpha = l.col(0);
  d.varpi = f.col(0);
  return d;
}

/// One-dimensional noiseless linear model eta_l(alpha) = f_l * alpha with
/// alpha ~ U[0,1] and f_l ~ U[0.5, 1.5].
inline SimData generate_scalar_linear(Index n, Index p, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  SimData d;
  d.alpha.resize(n);
  d.varpi.resize(p);
  for (Index i = 0; i < n; ++i) d.alpha(i) = unif(gen);
  for (Index l = 0; l < p; ++l) d.varpi(l) = 0.5 + unif(gen);
  d.h = d.varpi * d.alpha.transpose();
  d.x = DataMatrix(d.h);
  return d;
}

struct CovariateSimData {
  DataMatrix x;
  CovariatePanel w;
  Vector alpha;
  Matrix h;  // eta part of the outcome only
};

/// Outcome x = sum_l theta_l W_l + eta + u. Each regressor is
/// W_l = exp(-10|alpha_i - varpi_{t,l}|) + e_l with e_l ~ N(0, 1) i.i.d. (the
/// high-rank part); eta follows model 2 and u ~ N(0, noise_sd^2).
inline CovariateSimData generate_covariate_panel(Index n, Index p, const Vector& theta, std::uint64_t seed,
                                                 double noise_sd = 0.5) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  CovariateSimData d;
  d.alpha.resize(n);
  for (Index i = 0; i < n; ++i) d.alpha(i) = unif(gen);
  Vector varpi(p);
  for (Index l = 0; l < p; ++l) varpi(l) = unif(gen);
  d.h.resize(p, n);
  for (Index i = 0; i < n; ++i)
    for (Index l = 0; l < p; ++l) d.h(l, i) = eta(SimModel::LaplaceKernel, d.alpha(i), varpi(l));

  Matrix x = d.h;
  for (Index q = 0; q < theta.size(); ++q) {
    Vector wv(p);
    for (Index l = 0; l < p; ++l) wv(l) = unif(gen);
    Matrix wq(p, n);
    for (Index i = 0; i < n; ++i)
      for (Index l = 0; l < p; ++l) wq(l, i) = eta(SimModel::LaplaceKernel, d.alpha(i), wv(l)) + z(gen);
    x += theta(q) * wq;
    d.w.w.push_back(std::move(wq));
  }
  for (Index i = 0; i < n; ++i)
    for (Index l = 0; l < p; ++l) x(l, i) += noise_sd * z(gen);
  d.x = DataMatrix(std::move(x));
  return d;
}

/// Units whose latent value is nearest to each empirical quantile (ties to
/// the lower index). The quantile is the order statistic
/// sorted[ceil(q * n) - 1], the inverse of the empirical distribution.
inline std::vector<Index> quantile_units(const Vector& alpha, std::span<const double> qs) {
  const Index n = alpha.size();
  std::vector<double> sorted(alpha.data(), alpha.data() + n);
  std::sort(sorted.begin(), sorted.end());
  std::vector<Index> out;
  for (double q : qs) {
    auto rank = static_cast<Index>(std::ceil(q * static_cast<double>(n) - 1e-9));
    rank = std::clamp<Index>(rank, 1, n);
    const double target = sorted[static_cast<std::size_t>(rank - 1)];
    Index best = 0;
    for (Index i = 1; i < n; ++i)
      if (std::abs(alpha(i) - target) < std::abs(alpha(best) - target)) best = i;
    out.push_back(best);
  }
  return out;
}

/// Zeroes and masks the last row of `x` at the given units.
inline DataMatrix mask_last_row(DataMatrix x, std::span<const Index> units) {
  const Index last = x.p() - 1;
  for (Index i : units) {
    detail::require(i >= 0 && i < x.n(), "mask_last_row: unit out of range");
    x.values(last, i) = 0.0;
    x.mask(last, i) = false;
  }
  return x;
}

struct PlantedMissing {
  DataMatrix x;
  std::array<Index, 3> units{};
};

/// Masks the last-row entries of the units at the 0.1, 0.5 and 0.9 quantiles
/// of alpha.
inline PlantedMissing plant_missing(const DataMatrix& x, const Vector& alpha) {
  if (x.n() < 10) throw ConfigError("plant_missing needs n >= 10");
  detail::require(alpha.size() == x.n(), "plant_missing: alpha length must equal n");
  constexpr std::array<double, 3> qs{0.1, 0.5, 0.9};
  const auto units = quantile_units(alpha, qs);
  PlantedMissing out;
  std::copy(units.begin(), units.end(), out.units.begin());
  out.x = mask_last_row(x, units);
  return out;
}

struct SimConfig {
  SimModel model = SimModel::GaussianBump;
  Index n = 400;
  Index p = 400;
  Index reps = 1;
  double k_const = 1.0;
  std::uint64_t seed = 1;
  DistanceKind distance = DistanceKind::pseudo_max();
  double split_fraction = 0.5;
  FactorCountRule rule = FactorCountRule::ratio_loglog();
  Index kmax = 8;
  std::optional<double> noise_sd;  // models 1-2 only; default 0.5
  Threads threads{};

  Index k() const { return k_from_constant(k_const, n); }
};

/// Seed of replication `rep`: splitmix64 finalizer applied to
/// seed + (rep + 1) * golden-ratio increment. Streams depend only on
/// (seed, rep), never on the order replications run in.
inline std::uint64_t rep_seed(std::uint64_t seed, Index rep) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(rep + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

struct MethodMetrics {
  double mae = 0.0;
  std::array<double, 3> pred_err{};  // units at the 0.1, 0.5, 0.9 quantiles
};

struct RepRecord {
  Index rep = 0;
  std::uint64_t seed = 0;
  MethodMetrics lpca;
  MethodMetrics gpca;
  Index gpca_r = 0;
  std::array<Index, 3> planted{};
};

struct RepArtifacts {
  SimData data;
  IndexList pca_rows;
  Matrix lpca_fitted;  // |pca_rows| x n
  Matrix gpca_fitted;  // p x n
};

struct SimResult {
  Index reps = 0;
  MethodMetrics lpca;
  MethodMetrics gpca;
};

inline Index sim_match_rows(const SimConfig& cfg) {
  const auto rows = static_cast<Index>(std::ceil(cfg.split_fraction * static_cast<double>(cfg.p) - 1e-9));
  if (rows < 1 || rows >= cfg.p) throw ConfigError("split fraction leaves an empty block");
  return rows;
}

inline RepRecord run_replication(const SimConfig& cfg, Index rep, RepArtifacts* artifacts = nullptr,
                                 Threads inner = Threads{1}) {
  RepRecord rec;
  rec.rep = rep;
  rec.seed = rep_seed(cfg.seed, rep);
  try {
    auto data = generate(cfg.model, cfg.n, cfg.p, rec.seed, cfg.noise_sd.value_or(0.5));
    const auto planted = plant_missing(data.x, data.alpha);
    rec.planted = planted.units;

    const RowSplit split = leading_split(cfg.p, sim_match_rows(cfg));
    LpcaOptions opt{cfg.k(), cfg.distance, cfg.rule, inner};
    const auto fit = run_lpca(planted.x.values, split, opt);
    const Matrix h_pca = select_rows(data.h, split.ddagger);
    const Index last = static_cast<Index>(split.ddagger.size()) - 1;

    const auto global = gpca_fit(DataMatrix(planted.x.values), cfg.kmax);
    const Matrix g_pca = select_rows(global.fitted, split.ddagger);
    rec.gpca_r = global.r;

    rec.lpca.mae = (fit.fitted - h_pca).cwiseAbs().maxCoeff();
    rec.gpca.mae = (g_pca - h_pca).cwiseAbs().maxCoeff();
    for (std::size_t k = 0; k < 3; ++k) {
      const Index i = rec.planted[k];
      rec.lpca.pred_err[k] = std::abs(fit.fitted(last, i) - h_pca(last, i));
      rec.gpca.pred_err[k] = std::abs(g_pca(last, i) - h_pca(last, i));
    }
    if (artifacts) {
      artifacts->pca_rows = split.ddagger;
      artifacts->lpca_fitted = fit.fitted;
      artifacts->gpca_fitted = global.fitted;
      artifacts->data = std::move(data);
    }
  } catch (const Error& e) {
    detail::throw_error(e.kind(), "replication " + std::to_string(rep + 1) + " (seed " + std::to_string(rec.seed) + "): " + e.what());
  }
  return rec;
}

/// Averages per-replication metrics in replication-index order.
inline SimResult aggregate(std::vector<RepRecord> records) {
  std::sort(records.begin(), records.end(), [](const RepRecord& a, const RepRecord& b) { return a.rep < b.rep; });
  SimResult out;
  out.reps = static_cast<Index>(records.size());
  if (records.empty()) return out;
  for (const auto& r : records) {
    out.lpca.mae += r.lpca.mae;
    out.gpca.mae += r.gpca.mae;
    for (std::size_t k = 0; k < 3; ++k) {
      out.lpca.pred_err[k] += r.lpca.pred_err[k];
      out.gpca.pred_err[k] += r.gpca.pred_err[k];
    }
  }
  const auto m = static_cast<double>(records.size());
  out.lpca.mae /= m;
  out.gpca.mae /= m;
  for (std::size_t k = 0; k < 3; ++k) {
    out.lpca.pred_err[k] /= m;
    out.gpca.pred_err[k] /= m;
  }
  return out;
}

inline std::vector<RepRecord> run_replications(const SimConfig& cfg) {
  if (cfg.reps < 1) throw ConfigError("reps must be at least 1");
  std::vector<RepRecord> records(static_cast<std::size_t>(cfg.reps));
  if (cfg.reps == 1) {
    records[0] = run_replication(cfg, 0, nullptr, cfg.threads);
  } else {
    parallel_for(records.size(), cfg.threads,
                 [&](std::size_t r) { records[r] = run_replication(cfg, static_cast<Index>(r)); });
  }
  return records;
}

inline SimResult run_study(const SimConfig& cfg) { return aggregate(run_replications(cfg)); }

inline void write_summary(std::ostream& out, const SimResult& r, int digits = 12) {
  auto f = [&](double v) { return detail::format_double(v, digits); };
  out << "method,mae,pred_q0.1,pred_q0.5,pred_q0.9\n";
  out << "LPCA," << f(r.lpca.mae) << ',' << f(r.lpca.pred_err[0]) << ',' << f(r.lpca.pred_err[1]) << ','
      << f(r.lpca.pred_err[2]) << '\n';
  out << "GPCA," << f(r.gpca.mae) << ',' << f(r.gpca.pred_err[0]) << ',' << f(r.gpca.pred_err[1]) << ','
      << f(r.gpca.pred_err[2]) << '\n';
}

inline void write_replications(std::ostream& out, const std::vector<RepRecord>& records, int digits = 12) {
  auto f = [&](double v) { return detail::format_double(v, digits); };
  out << "rep,seed,lpca_mae,gpca_mae,lpca_q0.1,lpca_q0.5,lpca_q0.9,gpca_q0.1,gpca_q0.5,gpca_q0.9,gpca_r\n";
  for (const auto& r : records) {
    out << (r.rep + 1) << ',' << r.seed << ',' << f(r.lpca.mae) << ',' << f(r.gpca.mae);
    for (double v : r.lpca.pred_err) out << ',' << f(v);
    for (double v : r.gpca.pred_err) out << ',' << f(v);
    out << ',' << r.gpca_r << '\n';
  }
}

}  // namespace lpca::sim

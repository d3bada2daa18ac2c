#pragma once

// Synthetic-control counterfactuals by local PCA matrix completion. The
// treated unit's post-treatment outcomes are zeroed and masked, local PCA runs
// on the perturbed panel, and the treated unit's fitted means on the
// post-treatment rows serve as the untreated counterfactual.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "lpca/data.hpp"
#include "lpca/pipeline.hpp"

namespace lpca {

/// Unit `treated` (0-based column) is treated from row `p0` on; rows
/// [0, p0) are pre-treatment. In 1-based terms p0 is the last pre-treatment
/// period.
struct TreatmentDesign {
  Index treated = 0;
  Index p0 = 0;
};

enum class LevelMode { Additive, Multiplicative };

struct SynthResult {
  std::vector<Index> periods;  // 0-based post-treatment rows
  Vector counterfactual;
  Vector observed;
  Vector effects;  // observed - counterfactual
  double avg_effect = 0.0;
  std::optional<Vector> counterfactual_level;
  std::optional<Vector> observed_level;
  LpcaFit fit;
};

inline void validate_design(const TreatmentDesign& d, Index p, Index n) {
  if (d.treated < 0 || d.treated >= n)
    throw ConfigError("treated unit " + std::to_string(d.treated + 1) + " outside [1, " + std::to_string(n) + "]");
  if (d.p0 < 1 || d.p0 >= p) throw ConfigError("p0 must lie in [1, p-1], got " + std::to_string(d.p0));
}

inline DataMatrix mask_treated(DataMatrix y, const TreatmentDesign& design) {
  validate_design(design, y.p(), y.n());
  for (Index l = design.p0; l < y.p(); ++l) {
    y.values(l, design.treated) = 0.0;
    y.mask(l, design.treated) = false;
  }
  return y;
}

/// Missing cells allowed in any row or column besides the treated unit's
/// post-treatment block: ceil(0.1 * min(p, n)).
inline Index missing_cell_limit(Index p, Index n) {
  return static_cast<Index>(std::ceil(0.1 * static_cast<double>(std::min(p, n))));
}

namespace detail {
inline void guard_missingness(const DataMatrix& masked, const TreatmentDesign& design) {
  const Index limit = missing_cell_limit(masked.p(), masked.n());
  for (Index l = 0; l < masked.p(); ++l) {
    const Index miss = masked.n() - masked.mask.row(l).count();
    if (miss > limit)
      throw ConfigError("row " + std::to_string(l + 1) + " has " + std::to_string(miss) +
                        " missing cells; at most " + std::to_string(limit) + " are supported");
  }
  for (Index i = 0; i < masked.n(); ++i) {
    Index miss = masked.p() - masked.mask.col(i).count();
    if (i == design.treated) miss -= masked.p() - design.p0;
    if (miss > limit)
      throw ConfigError("unit " + std::to_string(i + 1) + " has " + std::to_string(miss) +
                        " missing cells; at most " + std::to_string(limit) + " are supported");
  }
}
}  // namespace detail

/// Translates a growth path into levels: additive L_t = L_0 + sum_{s<=t} g_s,
/// multiplicative L_t = L_0 * prod_{s<=t} (1 + g_s).
inline Vector growth_to_level(double initial_level, const Vector& growth, LevelMode mode = LevelMode::Additive) {
  if (!std::isfinite(initial_level) || !growth.allFinite()) throw DataError("growth_to_level needs finite inputs");
  Vector out(growth.size());
  double level = initial_level;
  for (Index t = 0; t < growth.size(); ++t) {
    if (mode == LevelMode::Additive) {
      level += growth(t);
    } else {
      if (growth(t) <= -1.0) throw DataError("multiplicative growth must exceed -1");
      level *= 1.0 + growth(t);
    }
    out(t) = level;
  }
  return out;
}

inline SynthResult synth_estimate(const DataMatrix& y, const TreatmentDesign& design, const RowSplit& split,
                                  const LpcaOptions& opt) {
  validate_design(design, y.p(), y.n());
  validate_split(split, y.p());
  if (split.three_way()) throw ConfigError("synthetic control uses a two-way row split");

  std::vector<Index> pca_pos(static_cast<std::size_t>(y.p()), -1);
  for (std::size_t r = 0; r < split.ddagger.size(); ++r) pca_pos[static_cast<std::size_t>(split.ddagger[r])] = static_cast<Index>(r);
  for (Index l = design.p0; l < y.p(); ++l)
    if (pca_pos[static_cast<std::size_t>(l)] < 0)
      throw ConfigError("post-treatment period " + std::to_string(l + 1) + " falls in the matching rows");
  for (Index l = design.p0; l < y.p(); ++l)
    if (!y.mask(l, design.treated))
      throw DataError("treated unit's outcome is missing in post-treatment period " + std::to_string(l + 1));

  const DataMatrix x = mask_to_zero(mask_treated(y, design));
  detail::guard_missingness(x, design);

  SynthResult out;
  out.fit = run_lpca(x.values, split, opt);
  const Index post = y.p() - design.p0;
  out.counterfactual.resize(post);
  out.observed.resize(post);
  for (Index t = 0; t < post; ++t) {
    const Index l = design.p0 + t;
    out.periods.push_back(l);
    out.counterfactual(t) = out.fit.fitted(pca_pos[static_cast<std::size_t>(l)], design.treated);
    out.observed(t) = y.values(l, design.treated);
  }
  out.effects = out.observed - out.counterfactual;
  out.avg_effect = out.effects.mean();
  return out;
}

inline void attach_levels(SynthResult& r, double initial_level, LevelMode mode) {
  r.counterfactual_level = growth_to_level(initial_level, r.counterfactual, mode);
  r.observed_level = growth_to_level(initial_level, r.observed, mode);
}

}  // namespace lpca

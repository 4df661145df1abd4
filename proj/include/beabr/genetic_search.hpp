#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "beabr/planning_types.hpp"
#include "beabr/qoe_metrics.hpp"

namespace beabr {

struct GAConfig {
  std::size_t size_pop = 50;
  std::size_t max_iter = 200;
  /// Per-gene mutation probability.
  double prob_mut = 0.001;
  /// Quantization of continuous genes. Every gene here is a grid index, so it
  /// has no effect; kept so configs carry the full parameter set.
  double precision = 0.1;
  /// Stop after this many generations without a better individual.
  std::size_t early_stop = 5;
  std::uint64_t seed = 0;
  std::size_t tournament = 3;
  double crossover_rate = 0.9;

  void validate() const;
};

/// Best window QoE over every bitrate sequence when each pause is the
/// shortest feasible one. Ties go to the lexicographically smallest sequence.
struct QoeOptimum {
  double value = 0.0;
  DownloadPlan plan;
};

/// Exhaustive over ladder^rows with rows = state.predictions.rows().
QoeOptimum max_qoe(const ControllerState& state, const PlanContext& ctx);

/// Minimum acceptable QoE for retention ratio l: l * max when max >= 0 and
/// max - (1 - l) * |max| in general, so the optimum always qualifies.
double qoe_bound(double max_qoe, double loss_ratio);

struct SearchResult {
  DownloadPlan plan;
  PlanScore score;
  double reward = 0.0;
  bool fallback = false;
  std::size_t evaluations = 0;
  std::size_t generations = 0;
};

/// Constrained GA over (level, wait-grid index) genomes. Plans whose window
/// QoE falls below `bound` score -inf. When nothing feasible is found the
/// `fallback` plan is returned. Deterministic for a given seed.
SearchResult ga_search(const ControllerState& state, const PlanContext& ctx, double bound,
                       double gamma, double beta, std::span<const double> wait_grid,
                       const GAConfig& config, const DownloadPlan& fallback);

}  // namespace beabr

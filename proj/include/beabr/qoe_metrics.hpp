#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "beabr/buffer_dynamics.hpp"
#include "beabr/media_model.hpp"
#include "beabr/planning_types.hpp"

namespace beabr {

struct QoEWeights {
  double alpha1 = 1.0;
  double alpha2 = 600.0;
  double alpha3 = 1.0;
  QualityMode mode;

  /// alpha = (1, 600, 1) on raw bitrate.
  static QoEWeights linear();
  /// alpha = (1, 266, 1) on ln(R / R_min).
  static QoEWeights logarithmic(const BitrateLadder& ladder);

  void validate() const;
};

struct RewardConfig {
  /// Wastage weight per byte. Negative means "derive from the manifest",
  /// see default_beta().
  double beta = -1.0;
  /// Fraction of the step's maximum window QoE a plan must retain.
  double loss_ratio = 0.9;
  std::size_t lookahead = 5;
  std::size_t cv_window = 5;

  void validate() const;
  double beta_for(const VideoManifest& manifest) const;
};

/// One wastage unit per ten top-level chunks left in the buffer.
double default_beta(const VideoManifest& manifest);

struct ChunkRecord {
  double bitrate_kbps = 0.0;
  double rebuffer_s = 0.0;
};

/// Per-session bookkeeping for departure-time QoE. `chunks` holds every fully
/// downloaded chunk in order; the first `viewed` of them were watched to the
/// end.
struct SessionLedger {
  std::vector<ChunkRecord> chunks;
  std::size_t viewed = 0;
  double elapsed_s = 0.0;

  std::size_t downloaded() const { return chunks.size(); }
  void validate() const;
};

/// REB_k = (D_k - L_k)+.
double rebuffer_time(double download_s, double bvt_s);

/// Per-chunk means: quality over viewed chunks, stalls over downloaded ones
/// normalized by t0, switches over viewed chunks 2..k1.
double qoe_at_departure(const SessionLedger& ledger, double t0, const QoEWeights& weights);

/// Summed (not averaged) QoE on raw bitrate.
double qoe_lin(const SessionLedger& ledger, const QoEWeights& weights);
/// Summed QoE on ln(R / R_min).
double qoe_log(const SessionLedger& ledger, const QoEWeights& weights, double r_min_kbps);

/// Reward for a user leaving at t0 with `wastage_bytes` still buffered.
double session_reward(const SessionLedger& ledger, double t0, const QoEWeights& weights,
                      double beta, double wastage_bytes);

/// gamma = exp(-CV) of the samples (n-1 std). Fewer than two samples -> 1.
double fluctuation_gamma(std::span<const double> throughputs);

/// Inputs every window evaluation needs besides the plan itself.
struct PlanContext {
  const VideoManifest* manifest = nullptr;
  BufferConfig buffer;
  QoEWeights weights;
};

/// Predicted trajectory of one plan: per-step buffer, stall and wait.
struct PlanTrajectory {
  std::vector<double> bvt_s;
  std::vector<double> download_s;
  std::vector<double> rebuffer_s;
  std::vector<double> waits_s;
  double span_s = 0.0;
};

/// Simulates the plan under the predicted delays with the discrete buffer update.
/// Waits are clamped into the feasible bounds of each step.
PlanTrajectory predict_trajectory(const DownloadPlan& plan, const ControllerState& state,
                                  const PlanContext& ctx);

/// Expected window QoE of a plan.
double window_qoe(const DownloadPlan& plan, const ControllerState& state, const PlanContext& ctx);

/// Time-averaged buffered bytes over the plan's predicted span.
double window_was(const DownloadPlan& plan, const ControllerState& state, const PlanContext& ctx);

struct PlanScore {
  double qoe = 0.0;
  double was = 0.0;
};

/// Both window terms in one pass. `scratch` is reused between calls.
PlanScore score_plan(const DownloadPlan& plan, const ControllerState& state,
                     const PlanContext& ctx, SessionTimeline& scratch);

/// Window QoE with wastage discounted by gamma * beta.
double adaptive_reward(const PlanScore& score, double gamma, double beta);
double adaptive_reward(const DownloadPlan& plan, const ControllerState& state,
                       const PlanContext& ctx, double gamma, double beta);

}  // namespace beabr

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "beabr/buffer_dynamics.hpp"
#include "beabr/controller.hpp"
#include "beabr/departure.hpp"
#include "beabr/media_model.hpp"
#include "beabr/predictors.hpp"
#include "beabr/qoe_metrics.hpp"
#include "beabr/trace.hpp"

namespace beabr {

/// When the viewer leaves.
struct DepartureTarget {
  DepartureClock clock = DepartureClock::kMediaTime;
  /// Media seconds played (kMediaTime) or wall-clock seconds (kNaturalTime).
  /// Values beyond the video mean "watch to the end".
  double value = 0.0;

  static DepartureTarget watch_all();
  static DepartureTarget at_ratio(double r, double video_duration_s,
                                  DepartureClock clock = DepartureClock::kMediaTime);
  static DepartureTarget at_time(double t0_s);
};

struct SessionConfig {
  BufferConfig buffer;
  /// QoE the controllers optimize.
  QoEWeights planning_weights = QoEWeights::linear();
  /// Measure wall time of each decision. Off keeps results bit-reproducible.
  bool record_latency = false;
};

struct ChunkLog {
  std::size_t chunk_index = 0;
  std::size_t level = 0;
  double bitrate_kbps = 0.0;
  Bytes bytes = 0;
  double start_s = 0.0;
  double download_s = 0.0;
  double wait_s = 0.0;
  double requested_wait_s = 0.0;
  double bvt_before_s = 0.0;
  double rebuffer_s = 0.0;
  double predicted_download_s = 0.0;
  double expected_qoe = 0.0;
  double max_qoe = 0.0;
  double qoe_bound = 0.0;
  double gamma = 1.0;
  double plan_latency_ms = 0.0;
  /// False for the chunk still downloading when the viewer left.
  bool completed = true;
};

struct SessionResult {
  double departure_s = 0.0;
  /// Media played at departure over the video duration.
  double departure_ratio = 0.0;
  double qoe_lin = 0.0;
  double qoe_log = 0.0;
  Bytes wastage_bytes = 0;
  Bytes fetched_bytes = 0;
  Bytes consumed_bytes = 0;
  /// Continuous S(t0) from the timeline, for cross-checks.
  double bdv_at_departure = 0.0;
  double mean_bdv_bytes = 0.0;
  double mean_bvt_s = 0.0;
  double rebuffer_s = 0.0;
  double rebuffer_ratio = 0.0;
  double mean_quality_kbps = 0.0;
  double mean_switch_kbps = 0.0;
  double mean_plan_latency_ms = 0.0;
  SessionLedger ledger;
  std::vector<ChunkLog> chunks;
  /// Frozen playback during the startup download, excluded from rebuffering.
  double startup_delay_s = 0.0;
  /// Timeline of the whole session up to departure.
  std::vector<Breakpoint> breakpoints;
};

/// Runs one trace-driven session. `predictor` may be null for controllers
/// with horizon 0. Errors are rethrown with the chunk index attached.
SessionResult run_session(const VideoManifest& manifest, const NetworkTrace& trace,
                          Controller& controller, DelayPredictor* predictor,
                          const DepartureTarget& departure, const SessionConfig& config = {});

}  // namespace beabr

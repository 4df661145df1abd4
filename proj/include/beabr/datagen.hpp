#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "beabr/media_model.hpp"
#include "beabr/t3p_training.hpp"
#include "beabr/trace.hpp"

namespace beabr {

/// Synthetic download histories for delay-predictor training. Each session
/// replays a fresh trace with a random-walk bitrate policy and random pauses;
/// every chunk after the first `history` yields one example.
struct DatasetGenConfig {
  std::size_t windows = 50000;
  std::size_t history = 8;
  std::size_t chunks_per_session = 200;
  double chunk_duration_s = kChunkDurationShort;
  std::vector<double> ladder_kbps{350, 600, 1000, 2000, 3000};
  TraceSpec trace = default_training_trace();
  /// Probability of changing level per chunk, and of pausing after a chunk.
  double switch_prob = 0.3;
  double pause_prob = 0.4;
  std::vector<double> pause_grid{0.25, 0.5, 1.0, 2.0, 4.0};
  std::uint64_t seed = 1;

  static TraceSpec default_training_trace();
  void validate() const;
};

std::vector<DelayExample> generate_delay_dataset(const DatasetGenConfig& config);

}  // namespace beabr

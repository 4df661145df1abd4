#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "beabr/buffer_dynamics.hpp"
#include "beabr/media_model.hpp"

namespace beabr {

/// Predicted download durations (seconds) for chunks first_chunk.. and every
/// ladder level. Row i is chunk first_chunk + i.
class DelayMatrix {
 public:
  DelayMatrix() = default;
  DelayMatrix(std::size_t first_chunk, std::size_t rows, std::size_t levels)
      : first_chunk_(first_chunk), rows_(rows), levels_(levels), seconds_(rows * levels, 0.0) {}

  std::size_t first_chunk() const { return first_chunk_; }
  std::size_t rows() const { return rows_; }
  std::size_t levels() const { return levels_; }
  double& at(std::size_t row, std::size_t level) { return seconds_[row * levels_ + level]; }
  double at(std::size_t row, std::size_t level) const { return seconds_[row * levels_ + level]; }

 private:
  std::size_t first_chunk_ = 0;
  std::size_t rows_ = 0;
  std::size_t levels_ = 0;
  std::vector<double> seconds_;
};

/// Joint decision for the next chunks: ladder level and the pause after each
/// download.
struct DownloadPlan {
  std::vector<std::size_t> levels;
  std::vector<double> waits_s;

  std::size_t size() const { return levels.size(); }
  bool operator==(const DownloadPlan&) const = default;
};

/// Everything a controller sees when choosing chunk `next_chunk`.
struct ControllerState {
  std::size_t next_chunk = 0;
  std::optional<std::size_t> prev_level;
  BufferSnapshot buffer;
  /// Per-chunk measured throughput in bytes/s, oldest first.
  std::vector<double> throughput_history;
  DelayMatrix predictions;

  double bvt_s() const { return buffer.bvt_s(); }
  double bdv_bytes() const { return buffer.bdv_bytes(); }
};

}  // namespace beabr

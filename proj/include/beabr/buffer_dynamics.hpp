#pragma once

#include <cstddef>
#include <vector>

#include "beabr/media_model.hpp"

namespace beabr {

/// Client buffer limit in seconds of video.
struct BufferConfig {
  double l_max_s = 20.0;

  /// Throws InvalidArgument unless l_max exceeds one chunk duration.
  void validate(double chunk_duration_s) const;
};

struct WaitBounds {
  double min_s = 0.0;
  double max_s = 0.0;

  double clamp(double wait_s) const;
  bool contains(double wait_s, double tol = 1e-9) const;
};

/// Feasible pause after downloading a chunk: long enough that the next chunk
/// fits under l_max, short enough that the buffer does not run dry.
WaitBounds wait_bounds(double bvt_s, double download_s, double chunk_duration_s, double l_max_s);

/// Buffered video time at the next request. Throws ContractViolation when
/// `wait_s` lies outside `wait_bounds`.
double advance_bvt(double bvt_s, double download_s, double wait_s, double chunk_duration_s,
                   double l_max_s);

/// A chunk (or the unplayed tail of one) sitting in the client buffer.
struct BufferedSegment {
  std::size_t chunk_index = 0;
  double bitrate_kbps = 0.0;
  Bytes bytes = 0;
  double duration_s = 0.0;
  double unplayed_fraction = 1.0;

  double unplayed_seconds() const { return duration_s * unplayed_fraction; }
  double unplayed_bytes() const { return static_cast<double>(bytes) * unplayed_fraction; }
};

/// Buffer contents and clocks at one instant. The starting point for both a
/// live session and a planner look-ahead.
struct BufferSnapshot {
  double time_s = 0.0;
  double playhead_s = 0.0;
  std::vector<BufferedSegment> segments;

  double bvt_s() const;
  double bdv_bytes() const;
};

struct DownloadEvent {
  std::size_t chunk_index = 0;
  double bitrate_kbps = 0.0;
  Bytes bytes = 0;
  double start_s = 0.0;
  double download_s = 0.0;
  double wait_s = 0.0;

  double finish_s() const { return start_s + download_s; }
  double next_start_s() const { return start_s + download_s + wait_s; }
};

struct Breakpoint {
  double t = 0.0;
  double bvt_s = 0.0;
  double bdv_bytes = 0.0;
  double playhead_s = 0.0;
};

/// Exact piecewise-linear trajectories of buffered video time L(t), buffered
/// data volume S(t) and playback position V(t) between download events.
///
/// Playback consumes each chunk at its own byte rate (size / duration). The
/// in-flight chunk fills linearly over its download time. Playback freezes
/// whenever the buffer is empty, so V(t) has slope 1 or 0.
///
/// The timeline can be reset and reused; planners keep one scratch instance.
class SessionTimeline {
 public:
  SessionTimeline(double chunk_duration_s, BufferConfig config);

  /// Empty buffer at t = 0, playhead at 0.
  void reset();
  void reset(const BufferSnapshot& start);

  /// Appends a download that starts where the previous one ended. Throws
  /// ContractViolation if `wait_s` is outside the feasible wait bounds.
  const DownloadEvent& append(std::size_t chunk_index, double bitrate_kbps, Bytes bytes,
                              double download_s, double wait_s);

  /// Ends the timeline inside the last event (user departure).
  void truncate(double t);

  double start_time() const { return start_time_; }
  double end_time() const { return end_time_; }
  const std::vector<DownloadEvent>& events() const { return events_; }
  double chunk_duration() const { return chunk_duration_; }
  const BufferConfig& config() const { return config_; }

  /// BVT at the start of event `i` (L_k).
  double bvt_at_event(std::size_t i) const { return extra_[i].bvt_start; }

  double playback_position(double t) const;
  double bvt_at(double t) const;
  double bdv_at(double t) const;
  /// Bytes fetched so far, counting the accrued part of an in-flight chunk.
  double fetched_at(double t) const;
  /// Bytes played out between t1 and t2.
  double consumed_volume(double t1, double t2) const;
  /// Exact integral of S(t) over [ta, tb] in byte-seconds.
  double bdv_integral(double ta, double tb) const;
  /// Exact integral of L(t) over [ta, tb] in seconds^2.
  double bvt_integral(double ta, double tb) const;

  /// Total time playback was frozen inside [start, end].
  double frozen_time() const;

  std::vector<Breakpoint> breakpoints() const;
  BufferSnapshot snapshot(double t) const;

 private:
  struct MediaPiece {
    std::size_t chunk_index;
    double bitrate_kbps;
    Bytes bytes;
    double duration_s;
    double start_pos;
    double length;
    double rate;   // bytes per media second
    double cum_c;  // C at start_pos
    double cum_g;  // G at start_pos
  };
  struct EventExtra {
    double bvt_start;
    double playhead_start;
    double fetched_start;
    double downloaded_pos_start;
  };

  void check_time(double t) const;
  std::size_t event_index(double t) const;
  std::size_t piece_index(double pos) const;
  double cumulative_consumed(double pos) const;
  double cumulative_consumed_integral(double pos) const;
  double playhead_in(std::size_t i, double tau) const;
  void push_piece(std::size_t chunk, double kbps, Bytes bytes, double duration, double length);

  double chunk_duration_;
  BufferConfig config_;
  double start_time_ = 0.0;
  double end_time_ = 0.0;
  double start_playhead_ = 0.0;
  double start_fetched_ = 0.0;
  double downloaded_pos_ = 0.0;
  std::vector<MediaPiece> pieces_;
  std::vector<DownloadEvent> events_;
  std::vector<EventExtra> extra_;
};

}  // namespace beabr

#include "beabr/buffer_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "beabr/error.hpp"

namespace beabr {
namespace {

constexpr double kTimeTol = 1e-9;

double positive_part(double x) { return x > 0.0 ? x : 0.0; }

}  // namespace

void BufferConfig::validate(double chunk_duration_s) const {
  if (!(l_max_s > chunk_duration_s)) {
    throw InvalidArgument("l_max must exceed the chunk duration");
  }
}

double WaitBounds::clamp(double wait_s) const { return std::clamp(wait_s, min_s, max_s); }

bool WaitBounds::contains(double wait_s, double tol) const {
  return wait_s >= min_s - tol && wait_s <= max_s + tol;
}

WaitBounds wait_bounds(double bvt_s, double download_s, double chunk_duration_s, double l_max_s) {
  double after = positive_part(bvt_s - download_s) + chunk_duration_s;
  return {positive_part(after - l_max_s), after};
}

double advance_bvt(double bvt_s, double download_s, double wait_s, double chunk_duration_s,
                   double l_max_s) {
  auto bounds = wait_bounds(bvt_s, download_s, chunk_duration_s, l_max_s);
  if (!bounds.contains(wait_s)) {
    std::ostringstream os;
    os << "wait " << wait_s << " s outside [" << bounds.min_s << ", " << bounds.max_s << "]";
    throw ContractViolation(os.str());
  }
  return std::max(0.0, positive_part(bvt_s - download_s) + chunk_duration_s - wait_s);
}

double BufferSnapshot::bvt_s() const {
  double total = 0.0;
  for (const auto& s : segments) total += s.unplayed_seconds();
  return total;
}

double BufferSnapshot::bdv_bytes() const {
  double total = 0.0;
  for (const auto& s : segments) total += s.unplayed_bytes();
  return total;
}

SessionTimeline::SessionTimeline(double chunk_duration_s, BufferConfig config)
    : chunk_duration_(chunk_duration_s), config_(config) {
  if (!(chunk_duration_s > 0.0)) throw InvalidArgument("chunk duration must be positive");
  config_.validate(chunk_duration_s);
}

void SessionTimeline::reset() { reset(BufferSnapshot{}); }

void SessionTimeline::reset(const BufferSnapshot& start) {
  pieces_.clear();
  events_.clear();
  extra_.clear();
  start_time_ = end_time_ = start.time_s;
  start_playhead_ = start.playhead_s;
  downloaded_pos_ = start.playhead_s;
  start_fetched_ = 0.0;
  for (const auto& seg : start.segments) {
    double len = seg.unplayed_seconds();
    if (len <= 0.0) continue;
    push_piece(seg.chunk_index, seg.bitrate_kbps, seg.bytes, seg.duration_s, len);
    start_fetched_ += seg.unplayed_bytes();
  }
}

void SessionTimeline::push_piece(std::size_t chunk, double kbps, Bytes bytes, double duration,
                                 double length) {
  MediaPiece p{chunk, kbps, bytes, duration, downloaded_pos_, length,
               static_cast<double>(bytes) / duration, 0.0, 0.0};
  if (!pieces_.empty()) {
    const auto& q = pieces_.back();
    p.cum_c = q.cum_c + q.rate * q.length;
    p.cum_g = q.cum_g + q.cum_c * q.length + 0.5 * q.rate * q.length * q.length;
  }
  pieces_.push_back(p);
  downloaded_pos_ += length;
}

const DownloadEvent& SessionTimeline::append(std::size_t chunk_index, double bitrate_kbps,
                                             Bytes bytes, double download_s, double wait_s) {
  if (bytes <= 0) throw InvalidArgument("chunk bytes must be positive");
  if (!(download_s >= 0.0) || !(wait_s >= 0.0)) {
    throw InvalidArgument("download and wait times must be non-negative");
  }
  if (!events_.empty() && end_time_ < events_.back().next_start_s() - kTimeTol) {
    throw ContractViolation("cannot append to a truncated timeline");
  }
  double playhead = events_.empty() ? start_playhead_ : playback_position(end_time_);
  double bvt = downloaded_pos_ - playhead;
  auto bounds = wait_bounds(bvt, download_s, chunk_duration_, config_.l_max_s);
  if (!bounds.contains(wait_s)) {
    std::ostringstream os;
    os << "chunk " << chunk_index << ": wait " << wait_s << " s outside [" << bounds.min_s
       << ", " << bounds.max_s << "]";
    throw ContractViolation(os.str());
  }
  wait_s = bounds.clamp(wait_s);
  double fetched =
      events_.empty() ? start_fetched_ : extra_.back().fetched_start + events_.back().bytes;
  extra_.push_back({std::max(0.0, bvt), playhead, fetched, downloaded_pos_});
  events_.push_back({chunk_index, bitrate_kbps, bytes, end_time_, download_s, wait_s});
  push_piece(chunk_index, bitrate_kbps, bytes, chunk_duration_, chunk_duration_);
  end_time_ = events_.back().next_start_s();
  return events_.back();
}

void SessionTimeline::truncate(double t) {
  if (events_.empty()) throw ContractViolation("cannot truncate an empty timeline");
  if (t < events_.back().start_s - kTimeTol || t > end_time_ + kTimeTol) {
    throw ContractViolation("truncation time outside the last event");
  }
  end_time_ = std::clamp(t, events_.back().start_s, end_time_);
}

void SessionTimeline::check_time(double t) const {
  if (t < start_time_ - kTimeTol) {
    std::ostringstream os;
    os << "time " << t << " precedes session start " << start_time_;
    throw ContractViolation(os.str());
  }
  if (t > end_time_ + kTimeTol) {
    std::ostringstream os;
    os << "time " << t << " beyond session end " << end_time_;
    throw ContractViolation(os.str());
  }
}

std::size_t SessionTimeline::event_index(double t) const {
  auto it = std::upper_bound(events_.begin(), events_.end(), t,
                             [](double v, const DownloadEvent& e) { return v < e.start_s; });
  if (it == events_.begin()) return 0;
  return static_cast<std::size_t>(it - events_.begin()) - 1;
}

std::size_t SessionTimeline::piece_index(double pos) const {
  auto it = std::upper_bound(pieces_.begin(), pieces_.end(), pos,
                             [](double v, const MediaPiece& p) { return v < p.start_pos; });
  if (it == pieces_.begin()) return 0;
  return static_cast<std::size_t>(it - pieces_.begin()) - 1;
}

double SessionTimeline::cumulative_consumed(double pos) const {
  if (pieces_.empty()) return 0.0;
  const auto& p = pieces_[piece_index(pos)];
  double x = std::clamp(pos - p.start_pos, 0.0, p.length);
  return p.cum_c + p.rate * x;
}

double SessionTimeline::cumulative_consumed_integral(double pos) const {
  if (pieces_.empty()) return 0.0;
  const auto& p = pieces_[piece_index(pos)];
  double x = std::clamp(pos - p.start_pos, 0.0, p.length);
  double g = p.cum_g + p.cum_c * x + 0.5 * p.rate * x * x;
  // Past the last piece C stays flat.
  double over = pos - (p.start_pos + p.length);
  if (over > 0.0) g += (p.cum_c + p.rate * p.length) * over;
  return g;
}

double SessionTimeline::playhead_in(std::size_t i, double tau) const {
  const auto& e = extra_[i];
  double d = events_[i].download_s;
  return e.playhead_start + std::min(tau, e.bvt_start) +
         positive_part(tau - std::max(d, e.bvt_start));
}

double SessionTimeline::playback_position(double t) const {
  check_time(t);
  if (events_.empty()) return start_playhead_;
  std::size_t i = event_index(t);
  return playhead_in(i, std::max(0.0, t - events_[i].start_s));
}

double SessionTimeline::fetched_at(double t) const {
  check_time(t);
  if (events_.empty()) return start_fetched_;
  std::size_t i = event_index(t);
  const auto& ev = events_[i];
  double tau = std::max(0.0, t - ev.start_s);
  double frac = ev.download_s > 0.0 && t < ev.finish_s() ? std::min(tau / ev.download_s, 1.0) : 1.0;
  return extra_[i].fetched_start + static_cast<double>(ev.bytes) * frac;
}

double SessionTimeline::bvt_at(double t) const {
  check_time(t);
  if (events_.empty()) return downloaded_pos_ - start_playhead_;
  std::size_t i = event_index(t);
  const auto& ev = events_[i];
  double tau = std::max(0.0, t - ev.start_s);
  // Compare absolute times: start + (t - start) can round below the download time.
  bool done = t >= ev.finish_s() || tau >= ev.download_s;
  double downloaded = extra_[i].downloaded_pos_start + (done ? chunk_duration_ : 0.0);
  return std::max(0.0, downloaded - playhead_in(i, tau));
}

double SessionTimeline::bdv_at(double t) const {
  double s = fetched_at(t) - cumulative_consumed(playback_position(t));
  return std::max(0.0, s);
}

double SessionTimeline::consumed_volume(double t1, double t2) const {
  if (t2 < t1) throw ContractViolation("consumed_volume needs t1 <= t2");
  return cumulative_consumed(playback_position(t2)) - cumulative_consumed(playback_position(t1));
}

namespace {

// Sub-interval cut points of one event in local time: freeze start and
// download completion are the only places the slopes of V, F or L change.
template <typename F>
void for_each_linear_piece(double a, double b, double bvt_start, double download_s, F&& fn) {
  double cuts[4] = {a, b, b, b};
  int n = 1;
  if (download_s > bvt_start && bvt_start > a && bvt_start < b) cuts[n++] = bvt_start;
  if (download_s > a && download_s < b) cuts[n++] = download_s;
  cuts[n++] = b;
  std::sort(cuts, cuts + n);
  for (int j = 0; j + 1 < n; ++j) {
    double x = cuts[j], y = cuts[j + 1];
    if (y <= x) continue;
    bool frozen = download_s > bvt_start && x >= bvt_start - 1e-12 && y <= download_s + 1e-12;
    fn(x, y, frozen);
  }
}

}  // namespace

double SessionTimeline::bdv_integral(double ta, double tb) const {
  if (tb < ta) throw ContractViolation("bdv_integral needs ta <= tb");
  check_time(ta);
  check_time(tb);
  if (events_.empty()) return start_fetched_ * (tb - ta);
  double total = 0.0;
  for (std::size_t i = event_index(ta); i < events_.size(); ++i) {
    const auto& ev = events_[i];
    if (ev.start_s >= tb) break;
    double span_end = i + 1 < events_.size() ? events_[i + 1].start_s : end_time_;
    double a = std::max(ta, ev.start_s) - ev.start_s;
    double b = std::min(tb, span_end) - ev.start_s;
    if (b <= a) continue;
    const auto& ex = extra_[i];
    double fill_rate = ev.download_s > 0.0 ? static_cast<double>(ev.bytes) / ev.download_s : 0.0;
    auto fetched = [&](double tau) {
      if (ev.download_s <= 0.0) return ex.fetched_start + static_cast<double>(ev.bytes);
      return ex.fetched_start + fill_rate * std::min(tau, ev.download_s);
    };
    for_each_linear_piece(a, b, ex.bvt_start, ev.download_s, [&](double x, double y, bool frozen) {
      double w = y - x;
      double f_area = 0.5 * w * (fetched(x) + fetched(y));
      double c_area;
      if (frozen) {
        c_area = cumulative_consumed(playhead_in(i, x)) * w;
      } else {
        c_area = cumulative_consumed_integral(playhead_in(i, y)) -
                 cumulative_consumed_integral(playhead_in(i, x));
      }
      total += f_area - c_area;
    });
  }
  return total;
}

double SessionTimeline::bvt_integral(double ta, double tb) const {
  if (tb < ta) throw ContractViolation("bvt_integral needs ta <= tb");
  check_time(ta);
  check_time(tb);
  if (events_.empty()) return (downloaded_pos_ - start_playhead_) * (tb - ta);
  double total = 0.0;
  for (std::size_t i = event_index(ta); i < events_.size(); ++i) {
    const auto& ev = events_[i];
    if (ev.start_s >= tb) break;
    double span_end = i + 1 < events_.size() ? events_[i + 1].start_s : end_time_;
    double a = std::max(ta, ev.start_s) - ev.start_s;
    double b = std::min(tb, span_end) - ev.start_s;
    if (b <= a) continue;
    const auto& ex = extra_[i];
    for_each_linear_piece(a, b, ex.bvt_start, ev.download_s, [&](double x, double y, bool) {
      double w = y - x;
      double mid = 0.5 * (x + y);
      double downloaded = ex.downloaded_pos_start + (mid >= ev.download_s ? chunk_duration_ : 0.0);
      total += w * (downloaded - 0.5 * (playhead_in(i, x) + playhead_in(i, y)));
    });
  }
  return total;
}

double SessionTimeline::frozen_time() const {
  double total = 0.0;
  for (std::size_t i = 0; i < events_.size(); ++i) {
    const auto& ev = events_[i];
    double bvt = extra_[i].bvt_start;
    if (ev.download_s <= bvt) continue;
    double span_end = i + 1 < events_.size() ? events_[i + 1].start_s : end_time_;
    double from = ev.start_s + bvt;
    double to = std::min(ev.finish_s(), span_end);
    total += positive_part(to - from);
  }
  return total;
}

std::vector<Breakpoint> SessionTimeline::breakpoints() const {
  std::vector<double> times;
  times.push_back(start_time_);
  for (std::size_t i = 0; i < events_.size(); ++i) {
    const auto& ev = events_[i];
    times.push_back(ev.start_s);
    if (ev.download_s > extra_[i].bvt_start) times.push_back(ev.start_s + extra_[i].bvt_start);
    times.push_back(ev.finish_s());
  }
  times.push_back(end_time_);
  std::vector<Breakpoint> out;
  for (double t : times) {
    if (t > end_time_) continue;
    if (!out.empty() && t <= out.back().t) continue;
    out.push_back({t, bvt_at(t), bdv_at(t), playback_position(t)});
  }
  return out;
}

BufferSnapshot SessionTimeline::snapshot(double t) const {
  BufferSnapshot snap;
  snap.time_s = t;
  snap.playhead_s = playback_position(t);
  double downloaded = snap.playhead_s + bvt_at(t);
  for (const auto& p : pieces_) {
    double piece_end = p.start_pos + p.length;
    if (piece_end <= snap.playhead_s + kTimeTol) continue;
    if (p.start_pos >= downloaded - kTimeTol) break;
    double unplayed = piece_end - std::max(snap.playhead_s, p.start_pos);
    BufferedSegment seg{p.chunk_index, p.bitrate_kbps, p.bytes, p.duration_s,
                        std::clamp(unplayed / p.duration_s, 0.0, 1.0)};
    snap.segments.push_back(seg);
  }
  return snap;
}

}  // namespace beabr

#include "beabr/session.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "beabr/error.hpp"

namespace beabr {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Earliest t in [lo, hi] with playback_position(t) >= pos; V is monotone.
double time_of_position(const SessionTimeline& tl, double lo, double hi, double pos) {
  if (tl.playback_position(lo) >= pos) return lo;
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (tl.playback_position(mid) >= pos) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

}  // namespace

DepartureTarget DepartureTarget::watch_all() { return {DepartureClock::kMediaTime, kInf}; }

DepartureTarget DepartureTarget::at_ratio(double r, double video_duration_s,
                                          DepartureClock clock) {
  if (!(r >= 0.0) || r > 1.0) throw InvalidArgument("departure ratio must be in [0, 1]");
  if (r >= 1.0 && clock == DepartureClock::kMediaTime) return watch_all();
  return {clock, r * video_duration_s};
}

DepartureTarget DepartureTarget::at_time(double t0_s) {
  if (!(t0_s > 0.0)) throw InvalidArgument("departure time must be positive");
  return {DepartureClock::kNaturalTime, t0_s};
}

SessionResult run_session(const VideoManifest& manifest, const NetworkTrace& trace,
                          Controller& controller, DelayPredictor* predictor,
                          const DepartureTarget& departure, const SessionConfig& config) {
  config.buffer.validate(manifest.chunk_duration());
  if (controller.horizon() > 0 && predictor == nullptr) {
    throw ConfigError("controller " + controller.name() + " needs a delay predictor");
  }
  if (predictor) predictor->reset();
  const double L = manifest.chunk_duration();
  const std::size_t K = manifest.chunk_count();
  const double video_s = manifest.duration();
  const auto& ladder = manifest.ladder();
  const bool media_clock = departure.clock == DepartureClock::kMediaTime;
  // Media target 0 would never be "reached"; the smallest meaningful target
  // is the first instant of playback.
  const double target_pos = media_clock ? std::max(departure.value, 1e-9) : kInf;
  const double target_time = media_clock ? kInf : departure.value;

  SessionTimeline timeline(L, config.buffer);
  timeline.reset();
  PlanContext ctx{&manifest, config.buffer, config.planning_weights};
  SessionResult res;
  std::vector<double> throughputs;
  std::optional<std::size_t> prev_level;
  double t = 0.0;
  double t0 = kInf;
  bool inflight = false;
  double latency_sum = 0.0;

  for (std::size_t k = 0; k < K; ++k) {
    if (t >= target_time) {
      t0 = target_time;
      break;
    }
    ChunkLog log;
    try {
      ControllerState state;
      state.next_chunk = k;
      state.prev_level = prev_level;
      state.buffer = timeline.snapshot(t);
      state.throughput_history = throughputs;
      std::size_t rows = std::min(controller.horizon(), K - k);
      if (rows > 0) state.predictions = predictor->predict(manifest, k, rows, t);

      auto t_start = std::chrono::steady_clock::now();
      Decision d = controller.decide(state, ctx);
      auto t_end = std::chrono::steady_clock::now();
      if (config.record_latency) {
        log.plan_latency_ms = std::chrono::duration<double, std::milli>(t_end - t_start).count();
      }
      if (d.level >= ladder.size()) throw ContractViolation("controller chose an invalid level");

      Bytes bytes = manifest.size(k, d.level);
      double D = simulate_download(trace, t, static_cast<double>(bytes));
      double bvt = state.bvt_s();
      auto bounds = wait_bounds(bvt, D, L, config.buffer.l_max_s);
      // After the last chunk the client idles until playback ends.
      double wait = k + 1 == K ? bounds.max_s : bounds.clamp(d.wait_s);

      log.chunk_index = k;
      log.level = d.level;
      log.bitrate_kbps = ladder[d.level];
      log.bytes = bytes;
      log.start_s = t;
      log.download_s = D;
      log.wait_s = wait;
      log.requested_wait_s = d.wait_s;
      log.bvt_before_s = bvt;
      log.rebuffer_s = k == 0 ? 0.0 : rebuffer_time(D, bvt);
      if (rows > 0) log.predicted_download_s = state.predictions.at(0, d.level);
      log.expected_qoe = d.expected_qoe;
      log.max_qoe = d.max_qoe;
      log.qoe_bound = d.bound;
      log.gamma = d.gamma;

      timeline.append(k, ladder[d.level], bytes, D, wait);
      const auto& ev = timeline.events().back();
      latency_sum += log.plan_latency_ms;

      double end = ev.next_start_s();
      double leave = kInf;
      if (target_time < end) leave = target_time;
      if (media_clock && timeline.playback_position(end) >= target_pos) {
        leave = std::min(leave, time_of_position(timeline, ev.start_s, end, target_pos));
      }
      if (leave < kInf) {
        t0 = std::max(leave, ev.start_s);
        inflight = t0 < ev.finish_s();
        log.completed = !inflight;
        res.chunks.push_back(log);
        if (!inflight) {
          throughputs.push_back(static_cast<double>(bytes) / D);
        }
        break;
      }
      res.chunks.push_back(log);
      if (D > 0.0) {
        throughputs.push_back(static_cast<double>(bytes) / D);
        if (predictor) predictor->observe({k, d.level, bytes, t, D});
      }
      prev_level = d.level;
      t = end;
    } catch (const Error& e) {
      throw Error("chunk " + std::to_string(k) + ": " + e.what());
    }
  }
  if (!(t0 < kInf)) t0 = timeline.end_time();
  if (t0 < timeline.end_time()) timeline.truncate(t0);

  // Ledger and byte accounting at departure.
  const double played = timeline.playback_position(t0);
  res.departure_s = t0;
  res.departure_ratio = std::min(1.0, played / video_s);
  for (const auto& c : res.chunks) {
    if (!c.completed) {
      double frac = c.download_s > 0.0 ? (t0 - c.start_s) / c.download_s : 1.0;
      auto accrued = static_cast<Bytes>(std::llround(static_cast<double>(c.bytes) *
                                                     std::clamp(frac, 0.0, 1.0)));
      res.fetched_bytes += accrued;
      res.wastage_bytes += accrued;
      continue;
    }
    res.ledger.chunks.push_back({c.bitrate_kbps, c.rebuffer_s});
    res.rebuffer_s += c.rebuffer_s;
    double pos = static_cast<double>(c.chunk_index) * L;
    double frac = std::clamp((played - pos) / L, 0.0, 1.0);
    auto consumed = static_cast<Bytes>(std::llround(static_cast<double>(c.bytes) * frac));
    res.fetched_bytes += c.bytes;
    res.consumed_bytes += consumed;
    res.wastage_bytes += c.bytes - consumed;
    if (played >= pos + L - 1e-9) res.ledger.viewed += 1;
  }
  res.ledger.elapsed_s = t0;
  if (!res.chunks.empty()) {
    const auto& first = res.chunks.front();
    res.startup_delay_s = std::min(first.download_s, t0 - first.start_s);
  }
  res.bdv_at_departure = t0 > 0.0 ? timeline.bdv_at(t0) : 0.0;
  if (t0 > 0.0) {
    res.mean_bdv_bytes = timeline.bdv_integral(0.0, t0) / t0;
    res.mean_bvt_s = timeline.bvt_integral(0.0, t0) / t0;
    res.rebuffer_ratio = res.rebuffer_s / t0;
  }
  QoEWeights lin = QoEWeights::linear();
  QoEWeights log_w = QoEWeights::logarithmic(ladder);
  res.qoe_lin = qoe_lin(res.ledger, lin);
  res.qoe_log = qoe_log(res.ledger, log_w, ladder.min());
  if (res.ledger.viewed > 0) {
    double q = 0.0, sw = 0.0;
    for (std::size_t i = 0; i < res.ledger.viewed; ++i) {
      q += res.ledger.chunks[i].bitrate_kbps;
      if (i > 0) sw += std::abs(res.ledger.chunks[i].bitrate_kbps - res.ledger.chunks[i - 1].bitrate_kbps);
    }
    res.mean_quality_kbps = q / static_cast<double>(res.ledger.viewed);
    if (res.ledger.viewed > 1) res.mean_switch_kbps = sw / static_cast<double>(res.ledger.viewed - 1);
  }
  if (!res.chunks.empty()) {
    res.mean_plan_latency_ms = latency_sum / static_cast<double>(res.chunks.size());
  }
  res.breakpoints = timeline.breakpoints();
  return res;
}

}  // namespace beabr

#pragma once

// Brute-force references shared by the unit and acceptance tests. They do
// not reuse any library arithmetic beyond choosing feasible waits.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <random>
#include <vector>

#include "beabr/buffer_dynamics.hpp"
#include "beabr/media_model.hpp"

namespace oracle {

struct Event {
  double kbps = 0.0;
  beabr::Bytes bytes = 0;
  std::int64_t start_ms = 0;
  std::int64_t download_ms = 0;
  std::int64_t wait_ms = 0;
};

struct Session {
  double chunk_s = 2.0;
  double l_max_s = 20.0;
  std::vector<Event> events;
  std::int64_t end_ms = 0;
};

// S at every whole millisecond of a session that starts empty at t = 0.
// Completed chunks play in order at their own byte rate; playback pauses
// while nothing is complete. The in-flight chunk contributes what it has
// received so far.
inline std::vector<double> bdv_series(const Session& s) {
  struct Seg {
    double bytes;
    double left_s;
  };
  std::deque<Seg> queue;
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(s.end_ms) + 1);
  std::size_t done = 0;
  const double dt = 1e-3;
  for (std::int64_t k = 0; k <= s.end_ms; ++k) {
    while (done < s.events.size() &&
           s.events[done].start_ms + s.events[done].download_ms <= k) {
      queue.push_back({static_cast<double>(s.events[done].bytes), s.chunk_s});
      ++done;
    }
    double total = 0.0;
    for (const auto& g : queue) total += g.bytes * g.left_s / s.chunk_s;
    if (done < s.events.size() && k >= s.events[done].start_ms) {
      const auto& e = s.events[done];
      total += static_cast<double>(e.bytes) * static_cast<double>(k - e.start_ms) /
               static_cast<double>(e.download_ms);
    }
    out.push_back(total);
    double budget = dt;
    while (budget > 1e-12 && !queue.empty()) {
      double take = std::min(budget, queue.front().left_s);
      queue.front().left_s -= take;
      budget -= take;
      if (queue.front().left_s <= 1e-12) queue.pop_front();
    }
  }
  return out;
}

// Trapezoid sum of the series between two grid points (byte-seconds).
inline double bdv_integral(const std::vector<double>& series, std::int64_t a_ms,
                           std::int64_t b_ms) {
  double sum = 0.0;
  for (std::int64_t k = a_ms; k < b_ms; ++k) {
    sum += 0.5 * (series[static_cast<std::size_t>(k)] + series[static_cast<std::size_t>(k + 1)]);
  }
  return sum * 1e-3;
}

// Random session on a millisecond grid: SD bitrates with jittered sizes,
// downloads of 50 ms to 5 s, feasible waits. The last wait drains the buffer.
inline Session random_session(std::mt19937_64& rng, std::size_t chunks) {
  Session s;
  std::uniform_int_distribution<int> level(0, 4);
  std::uniform_int_distribution<std::int64_t> dl(50, 5000);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double lmax_choices[] = {8.0, 12.0, 20.0, 30.0};
  s.l_max_s = lmax_choices[rng() % 4];
  auto ladder = beabr::BitrateLadder::sd();
  double bvt = 0.0;
  std::int64_t t = 0;
  for (std::size_t k = 0; k < chunks; ++k) {
    Event e;
    e.kbps = ladder[static_cast<std::size_t>(level(rng))];
    e.bytes = static_cast<beabr::Bytes>(
        std::llround(e.kbps * 125.0 * s.chunk_s * (0.85 + 0.3 * unit(rng))));
    e.start_ms = t;
    e.download_ms = dl(rng);
    double d = static_cast<double>(e.download_ms) * 1e-3;
    auto b = beabr::wait_bounds(bvt, d, s.chunk_s, s.l_max_s);
    auto lo = static_cast<std::int64_t>(std::ceil(b.min_s * 1000.0 - 1e-6));
    auto hi = static_cast<std::int64_t>(std::floor(b.max_s * 1000.0 + 1e-6));
    if (k + 1 == chunks) {
      e.wait_ms = hi;
    } else {
      e.wait_ms = lo + static_cast<std::int64_t>(unit(rng) * static_cast<double>(hi - lo));
    }
    bvt = beabr::advance_bvt(bvt, d, static_cast<double>(e.wait_ms) * 1e-3, s.chunk_s, s.l_max_s);
    t += e.download_ms + e.wait_ms;
    s.events.push_back(e);
  }
  s.end_ms = t;
  return s;
}

inline beabr::SessionTimeline build_timeline(const Session& s) {
  beabr::SessionTimeline tl(s.chunk_s, beabr::BufferConfig{s.l_max_s});
  tl.reset();
  for (std::size_t k = 0; k < s.events.size(); ++k) {
    const auto& e = s.events[k];
    tl.append(k, e.kbps, e.bytes, static_cast<double>(e.download_ms) * 1e-3,
              static_cast<double>(e.wait_ms) * 1e-3);
  }
  return tl;
}

// Relative error with a floor so values near an empty buffer compare against
// the size of one chunk instead of zero.
inline double rel_err(double got, double want, double floor) {
  return std::abs(got - want) / std::max(std::abs(want), floor);
}

}  // namespace oracle

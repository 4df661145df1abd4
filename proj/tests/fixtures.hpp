#pragma once

#include <cmath>
#include <random>

#include "beabr/planning_types.hpp"

namespace fixture {

using namespace beabr;

/// Every chunk encoded at exactly its nominal bitrate.
inline VideoManifest flat_manifest(const BitrateLadder& ladder, double chunk_s,
                                   std::size_t chunks) {
  std::vector<std::vector<Bytes>> sizes(chunks);
  for (auto& row : sizes) {
    for (double r : ladder.levels()) row.push_back(static_cast<Bytes>(r * 125.0 * chunk_s));
  }
  return VideoManifest(chunk_s, ladder, sizes);
}

/// Planner state before chunk `next` with `bvt_s` seconds buffered, filled
/// with whole chunks at `level` and a partial oldest one.
inline ControllerState state_at(const VideoManifest& m, double bvt_s, std::size_t next,
                                std::size_t rows, std::size_t level = 1) {
  ControllerState st;
  st.next_chunk = next;
  if (next > 0) st.prev_level = level;
  const double L = m.chunk_duration();
  st.buffer.time_s = 4.0 * static_cast<double>(next);
  std::size_t whole = static_cast<std::size_t>(std::floor(bvt_s / L + 1e-12));
  double frac = bvt_s / L - static_cast<double>(whole);
  std::size_t count = whole + (frac > 1e-12 ? 1 : 0);
  if (count > next) throw std::logic_error("fixture: buffer larger than downloaded chunks");
  for (std::size_t c = next - count; c < next; ++c) {
    double f = (c == next - count && frac > 1e-12) ? frac : 1.0;
    st.buffer.segments.push_back({c, m.ladder()[level], m.size(c, level), L, f});
  }
  st.buffer.playhead_s = static_cast<double>(next) * L - bvt_s;
  st.predictions = DelayMatrix(next, rows, m.ladder().size());
  return st;
}

/// Delays from a single throughput per row, with log-uniform spread.
inline void fill_random_delays(ControllerState& st, const VideoManifest& m, std::mt19937_64& rng,
                               double lo_Bps, double hi_Bps) {
  std::uniform_real_distribution<double> u(std::log(lo_Bps), std::log(hi_Bps));
  for (std::size_t i = 0; i < st.predictions.rows(); ++i) {
    double b = std::exp(u(rng));
    for (std::size_t j = 0; j < st.predictions.levels(); ++j) {
      st.predictions.at(i, j) = static_cast<double>(m.size(st.next_chunk + i, j)) / b;
    }
  }
}

}  // namespace fixture

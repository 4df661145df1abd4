#include "beabr/datagen.hpp"

#include <algorithm>
#include <random>

#include "beabr/error.hpp"
#include "beabr/predictors.hpp"

namespace beabr {

TraceSpec DatasetGenConfig::default_training_trace() {
  TraceSpec t;
  t.kind = TraceKind::kRegime;
  t.regime_means_Bps = {2.5e5, 5.0e5, 9.0e5, 1.4e6};
  t.rho = 0.85;
  t.cv = 0.25;
  t.switch_prob = 0.03;
  t.interval_s = 1.0;
  t.duration_s = 900.0;
  t.request_latency_s = 0.08;
  return t;
}

void DatasetGenConfig::validate() const {
  if (history == 0) throw ConfigError("history must be positive");
  if (chunks_per_session <= history) throw ConfigError("sessions must be longer than the history");
  if (switch_prob < 0.0 || switch_prob > 1.0 || pause_prob < 0.0 || pause_prob > 1.0) {
    throw ConfigError("probabilities must be in [0, 1]");
  }
  if (pause_grid.empty()) throw ConfigError("pause grid is empty");
  trace.validate();
}

std::vector<DelayExample> generate_delay_dataset(const DatasetGenConfig& config) {
  config.validate();
  BitrateLadder ladder(config.ladder_kbps);
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pause_pick(0, config.pause_grid.size() - 1);
  std::uniform_int_distribution<int> step(-2, 2);
  std::vector<DelayExample> out;
  out.reserve(config.windows);

  for (std::uint64_t session = 0; out.size() < config.windows; ++session) {
    std::uint64_t s = rng();
    NetworkTrace trace = synth_trace(config.trace, s);
    VideoManifest manifest = synth_manifest(ladder, config.chunks_per_session,
                                            config.chunk_duration_s, s ^ 0x5bd1e995ULL);
    std::vector<HistorySample> samples;
    auto level = static_cast<int>(rng() % ladder.size());
    double t = 0.0;
    for (std::size_t k = 0; k < manifest.chunk_count() && out.size() < config.windows; ++k) {
      if (unit(rng) < config.switch_prob) {
        level = std::clamp(level + step(rng), 0, static_cast<int>(ladder.size()) - 1);
      }
      auto bytes = static_cast<double>(manifest.size(k, static_cast<std::size_t>(level)));
      double D = simulate_download(trace, t, bytes);
      if (samples.size() >= config.history) {
        DelayExample ex;
        ex.window.samples.assign(samples.end() - static_cast<std::ptrdiff_t>(config.history),
                                 samples.end());
        ex.window.now_s = t;
        ex.d_star_bytes = bytes;
        ex.target_s = D;
        out.push_back(std::move(ex));
      }
      samples.push_back({bytes, bytes / D, sample_midpoint(t, D)});
      double pause = unit(rng) < config.pause_prob ? config.pause_grid[pause_pick(rng)] : 0.0;
      t += D + pause;
    }
  }
  return out;
}

}  // namespace beabr

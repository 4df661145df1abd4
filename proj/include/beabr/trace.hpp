#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace beabr {

struct TracePoint {
  double time_s = 0.0;
  double throughput_Bps = 0.0;
};

/// Piecewise-constant bandwidth. Point i holds from its timestamp until the
/// next one; the last point holds for as long as the interval before it (a
/// single point holds forever). Times before the first point use the first
/// throughput.
class NetworkTrace {
 public:
  NetworkTrace() = default;
  /// `request_latency_s` is a fixed delay before the first byte of every
  /// download arrives.
  NetworkTrace(std::vector<TracePoint> points, bool loop = true, double request_latency_s = 0.0);

  const std::vector<TracePoint>& points() const { return points_; }
  bool loop() const { return loop_; }
  double request_latency() const { return latency_s_; }
  double start_time() const { return points_.front().time_s; }
  /// End of the last interval; infinity for a single-point trace.
  double end_time() const { return end_; }
  double throughput_at(double t) const;
  double mean_throughput() const;

 private:
  std::vector<TracePoint> points_;
  bool loop_ = true;
  double latency_s_ = 0.0;
  double end_ = 0.0;
  double period_bytes_ = 0.0;
  std::vector<double> cum_bytes_;
  friend double simulate_download(const NetworkTrace&, double, double);
};

/// Time to receive `bytes` starting at `start_s`: the request latency plus
/// the smallest d with the integral of throughput over d equal to `bytes`.
/// Throws TraceExhausted past the end of a non-looping trace.
double simulate_download(const NetworkTrace& trace, double start_s, double bytes);

enum class TraceKind { kConstant, kStep, kAr1, kRegime };

struct TraceSpec {
  TraceKind kind = TraceKind::kConstant;
  double mean_Bps = 1.0e6;
  /// kStep: switch from mean_Bps to step_Bps at step_at_s.
  double step_Bps = 2.0e6;
  double step_at_s = 60.0;
  /// kAr1 / kRegime: b' = mu + rho (b - mu) + sigma eps, sigma = cv * mu.
  double rho = 0.9;
  double cv = 0.2;
  /// Initial value for kAr1; negative means mu.
  double start_Bps = -1.0;
  /// kRegime: means of the regimes and per-sample switch probability.
  std::vector<double> regime_means_Bps{3.0e5, 6.0e5, 1.2e6};
  double switch_prob = 0.02;
  /// Lower clamp as a fraction of the current mean.
  double floor_frac = 0.05;
  double interval_s = 1.0;
  double duration_s = 600.0;
  double request_latency_s = 0.0;
  bool loop = true;

  void validate() const;
};

TraceKind parse_trace_kind(const std::string& name);
NetworkTrace synth_trace(const TraceSpec& spec, std::uint64_t seed);

/// `time_s,throughput_Bps` CSV.
NetworkTrace parse_trace_csv(const std::string& text, bool loop = true, double latency_s = 0.0);
NetworkTrace load_trace(const std::filesystem::path& path, bool loop = true,
                        double latency_s = 0.0);
std::string trace_to_csv(const NetworkTrace& trace);
void save_trace(const std::filesystem::path& path, const NetworkTrace& trace);

/// Packet delivery log (one millisecond timestamp per delivery opportunity)
/// bucketed into fixed bins. Empty bins get a small positive floor.
NetworkTrace trace_from_packet_log(const std::string& text, double bytes_per_packet = 1500.0,
                                   double bin_ms = 100.0, bool loop = true);

}  // namespace beabr

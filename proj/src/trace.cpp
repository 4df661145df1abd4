#include "beabr/trace.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "beabr/error.hpp"

namespace beabr {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double parse_number(const std::string& field, std::size_t line_no) {
  std::string s = field;
  s.erase(0, s.find_first_not_of(" \t\r"));
  s.erase(s.find_last_not_of(" \t\r") + 1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError("trace line " + std::to_string(line_no) + ": bad number '" + field + "'");
  }
  return v;
}

}  // namespace

NetworkTrace::NetworkTrace(std::vector<TracePoint> points, bool loop, double request_latency_s)
    : points_(std::move(points)), loop_(loop), latency_s_(request_latency_s) {
  if (points_.empty()) throw InvalidArgument("trace needs at least one point");
  if (!(latency_s_ >= 0.0)) throw InvalidArgument("request latency must be non-negative");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!(points_[i].throughput_Bps > 0.0) || !std::isfinite(points_[i].throughput_Bps)) {
      throw InvalidArgument("trace point " + std::to_string(i) + " has non-positive throughput");
    }
    if (i > 0 && !(points_[i].time_s > points_[i - 1].time_s)) {
      throw InvalidArgument("trace timestamps must be strictly increasing (point " +
                            std::to_string(i) + ")");
    }
  }
  if (points_.size() == 1) {
    end_ = kInf;
    return;
  }
  std::size_t n = points_.size();
  end_ = points_[n - 1].time_s + (points_[n - 1].time_s - points_[n - 2].time_s);
  cum_bytes_.resize(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double next = i + 1 < n ? points_[i + 1].time_s : end_;
    cum_bytes_[i + 1] = cum_bytes_[i] + points_[i].throughput_Bps * (next - points_[i].time_s);
  }
  period_bytes_ = cum_bytes_[n];
}

double NetworkTrace::throughput_at(double t) const {
  if (points_.size() == 1 || t < points_.front().time_s) return points_.front().throughput_Bps;
  if (t >= end_) {
    if (!loop_) throw TraceExhausted("time " + std::to_string(t) + " beyond trace end");
    double period = end_ - points_.front().time_s;
    t = points_.front().time_s + std::fmod(t - points_.front().time_s, period);
  }
  auto it = std::upper_bound(points_.begin(), points_.end(), t,
                             [](double v, const TracePoint& p) { return v < p.time_s; });
  return std::prev(it)->throughput_Bps;
}

double NetworkTrace::mean_throughput() const {
  if (points_.size() == 1) return points_.front().throughput_Bps;
  return period_bytes_ / (end_ - points_.front().time_s);
}

double simulate_download(const NetworkTrace& trace, double start_s, double bytes) {
  if (!(bytes > 0.0)) throw InvalidArgument("download size must be positive");
  if (!std::isfinite(start_s)) throw InvalidArgument("download start must be finite");
  const auto& pts = trace.points_;
  double t = start_s + trace.latency_s_;
  const double begin = t;
  if (pts.size() == 1) return trace.latency_s_ + bytes / pts.front().throughput_Bps;

  double remaining = bytes;
  // Before the first point the first throughput applies.
  if (t < pts.front().time_s) {
    double span = pts.front().time_s - t;
    double cap = span * pts.front().throughput_Bps;
    if (cap >= remaining) return trace.latency_s_ + remaining / pts.front().throughput_Bps;
    remaining -= cap;
    t = pts.front().time_s;
  }
  const double t_first = pts.front().time_s;
  const double period = trace.end_ - t_first;
  double offset = 0.0;  // t - offset lies inside the base period
  if (t >= trace.end_) {
    if (!trace.loop_) throw TraceExhausted("download starts after the trace ends");
    double wraps = std::floor((t - t_first) / period);
    offset = wraps * period;
    if (t - offset >= trace.end_) offset += period;
  }
  double local = t - offset;
  auto it = std::upper_bound(pts.begin(), pts.end(), local,
                             [](double v, const TracePoint& p) { return v < p.time_s; });
  std::size_t i = static_cast<std::size_t>(std::prev(it) - pts.begin());
  while (true) {
    double seg_end = i + 1 < pts.size() ? pts[i + 1].time_s : trace.end_;
    double rate = pts[i].throughput_Bps;
    double cap = std::max(0.0, seg_end - local) * rate;
    if (cap >= remaining) return (local + remaining / rate + offset) - begin + trace.latency_s_;
    remaining -= cap;
    local = seg_end;
    if (++i == pts.size()) {
      if (!trace.loop_) throw TraceExhausted("download runs past the end of the trace");
      i = 0;
      local = t_first;
      offset += period;
      // Skip whole periods when the request is large.
      if (remaining > trace.period_bytes_) {
        double whole = std::floor(remaining / trace.period_bytes_);
        remaining -= whole * trace.period_bytes_;
        offset += whole * period;
        if (remaining <= 0.0) return offset + t_first - begin + trace.latency_s_;
      }
    }
  }
}

void TraceSpec::validate() const {
  if (!(mean_Bps > 0.0)) throw InvalidArgument("trace mean must be positive");
  if (!(interval_s > 0.0) || !(duration_s >= interval_s)) {
    throw InvalidArgument("trace interval/duration invalid");
  }
  if (rho < 0.0 || rho >= 1.0) throw InvalidArgument("rho must be in [0, 1)");
  if (cv < 0.0) throw InvalidArgument("cv must be non-negative");
  if (kind == TraceKind::kStep && !(step_Bps > 0.0)) throw InvalidArgument("step level must be positive");
  if (kind == TraceKind::kRegime) {
    if (regime_means_Bps.empty()) throw InvalidArgument("regime trace needs regimes");
    for (double m : regime_means_Bps) {
      if (!(m > 0.0)) throw InvalidArgument("regime means must be positive");
    }
    if (switch_prob < 0.0 || switch_prob > 1.0) throw InvalidArgument("switch_prob outside [0, 1]");
  }
  if (!(floor_frac > 0.0)) throw InvalidArgument("floor fraction must be positive");
  if (request_latency_s < 0.0) throw InvalidArgument("request latency must be non-negative");
}

TraceKind parse_trace_kind(const std::string& name) {
  if (name == "constant") return TraceKind::kConstant;
  if (name == "step") return TraceKind::kStep;
  if (name == "ar1") return TraceKind::kAr1;
  if (name == "regime") return TraceKind::kRegime;
  throw InvalidArgument("unknown trace kind '" + name + "'");
}

NetworkTrace synth_trace(const TraceSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::vector<TracePoint> pts;
  auto n = static_cast<std::size_t>(std::floor(spec.duration_s / spec.interval_s + 1e-9));
  switch (spec.kind) {
    case TraceKind::kConstant:
      pts.push_back({0.0, spec.mean_Bps});
      break;
    case TraceKind::kStep:
      pts.push_back({0.0, spec.mean_Bps});
      pts.push_back({spec.step_at_s, spec.step_Bps});
      break;
    case TraceKind::kAr1:
    case TraceKind::kRegime: {
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> eps(0.0, 1.0);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      bool regime = spec.kind == TraceKind::kRegime;
      std::size_t r = 0;
      if (regime) r = static_cast<std::size_t>(unit(rng) * static_cast<double>(spec.regime_means_Bps.size())) %
                      spec.regime_means_Bps.size();
      double mu = regime ? spec.regime_means_Bps[r] : spec.mean_Bps;
      double b = (!regime && spec.start_Bps > 0.0) ? spec.start_Bps : mu;
      for (std::size_t i = 0; i < n; ++i) {
        pts.push_back({static_cast<double>(i) * spec.interval_s, b});
        if (regime && unit(rng) < spec.switch_prob && spec.regime_means_Bps.size() > 1) {
          std::size_t next = r;
          while (next == r) {
            next = static_cast<std::size_t>(unit(rng) * static_cast<double>(spec.regime_means_Bps.size())) %
                   spec.regime_means_Bps.size();
          }
          r = next;
          mu = spec.regime_means_Bps[r];
        }
        b = mu + spec.rho * (b - mu) + spec.cv * mu * eps(rng);
        b = std::max(b, spec.floor_frac * mu);
      }
      break;
    }
  }
  return NetworkTrace(std::move(pts), spec.loop, spec.request_latency_s);
}

NetworkTrace parse_trace_csv(const std::string& text, bool loop, double latency_s) {
  std::istringstream in(text);
  std::string line;
  std::vector<TracePoint> pts;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (line_no == 1 && line.find("time") != std::string::npos) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw ParseError("trace line " + std::to_string(line_no) + ": expected time_s,throughput_Bps");
    }
    pts.push_back({parse_number(line.substr(0, comma), line_no),
                   parse_number(line.substr(comma + 1), line_no)});
  }
  if (pts.empty()) throw ParseError("trace has no data rows");
  try {
    return NetworkTrace(std::move(pts), loop, latency_s);
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("invalid trace: ") + e.what());
  }
}

NetworkTrace load_trace(const std::filesystem::path& path, bool loop, double latency_s) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open trace " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_trace_csv(ss.str(), loop, latency_s);
}

std::string trace_to_csv(const NetworkTrace& trace) {
  std::ostringstream out;
  out.precision(17);
  out << "time_s,throughput_Bps\n";
  for (const auto& p : trace.points()) out << p.time_s << ',' << p.throughput_Bps << '\n';
  return out.str();
}

void save_trace(const std::filesystem::path& path, const NetworkTrace& trace) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write trace " + path.string());
  out << trace_to_csv(trace);
}

NetworkTrace trace_from_packet_log(const std::string& text, double bytes_per_packet,
                                   double bin_ms, bool loop) {
  if (!(bin_ms > 0.0) || !(bytes_per_packet > 0.0)) {
    throw InvalidArgument("bin width and packet size must be positive");
  }
  std::istringstream in(text);
  std::string line;
  std::vector<std::size_t> counts;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    double ms = parse_number(line, line_no);
    if (ms < 0.0) throw ParseError("negative packet timestamp at line " + std::to_string(line_no));
    auto bin = static_cast<std::size_t>(ms / bin_ms);
    if (bin >= counts.size()) counts.resize(bin + 1, 0);
    ++counts[bin];
  }
  if (counts.empty()) throw ParseError("packet log is empty");
  const double bin_s = bin_ms / 1000.0;
  const double floor_Bps = bytes_per_packet / bin_s * 0.01;
  std::vector<TracePoint> pts;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    double rate = static_cast<double>(counts[i]) * bytes_per_packet / bin_s;
    pts.push_back({static_cast<double>(i) * bin_s, std::max(rate, floor_Bps)});
  }
  return NetworkTrace(std::move(pts), loop);
}

}  // namespace beabr

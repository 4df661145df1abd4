#include "beabr/batch.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "beabr/error.hpp"

namespace beabr {

std::string default_predictor(const std::string& controller) {
  if (controller == "be-abr" || controller == "ablation-t3p-mpc") return "t3p";
  if (controller == "mpc" || controller == "ablation-hm-be") return "hm";
  if (controller == "robust-mpc") return "robust-hm";
  if (controller == "bba") return "";
  throw ConfigError("unknown controller '" + controller + "'");
}

ControllerBundle make_controller(const ControllerOptions& options, const VideoManifest& manifest) {
  ControllerBundle b;
  b.label = options.name;
  const std::string& n = options.name;
  if (n == "be-abr" || n == "ablation-hm-be") {
    double beta = options.beta ? *options.beta : options.planner.reward.beta_for(manifest);
    b.controller = std::make_unique<BeAbrController>(options.planner, beta);
  } else if (n == "mpc" || n == "ablation-t3p-mpc") {
    b.controller = std::make_unique<MpcController>(options.mpc_horizon, n);
  } else if (n == "robust-mpc") {
    b.controller = std::make_unique<MpcController>(options.mpc_horizon, n);
  } else if (n == "bba") {
    b.controller = std::make_unique<BbaController>(options.bba_reservoir_s, options.bba_cushion_s);
  } else {
    throw ConfigError("unknown controller '" + n + "'");
  }
  std::string pred = options.predictor.empty() ? default_predictor(n) : options.predictor;
  if (b.controller->horizon() == 0) return b;
  if (pred == "hm") {
    b.predictor = std::make_unique<HmPredictor>(options.cold_start_Bps);
  } else if (pred == "robust-hm") {
    b.predictor = std::make_unique<RobustHmPredictor>(options.cold_start_Bps);
  } else if (pred == "t3p") {
    if (!options.model) throw ConfigError(n + " uses the T3P predictor; supply a trained model");
    b.predictor = std::make_unique<T3pPredictor>(options.model, options.cold_start_Bps);
  } else {
    throw ConfigError("unknown predictor '" + pred + "'");
  }
  return b;
}

BatchRow summarize(const SessionResult& r) {
  BatchRow row;
  row.departure_s = r.departure_s;
  row.qoe_lin = r.qoe_lin;
  row.qoe_log = r.qoe_log;
  row.wastage_bytes = r.wastage_bytes;
  row.mean_bdv_bytes = r.mean_bdv_bytes;
  row.mean_bvt_s = r.mean_bvt_s;
  row.rebuffer_ratio = r.rebuffer_ratio;
  row.mean_quality = r.mean_quality_kbps;
  row.mean_switch = r.mean_switch_kbps;
  row.mean_plan_latency_ms = r.mean_plan_latency_ms;
  return row;
}

DepartureTarget cell_departure(const DepartureModel& departure, double video_duration_s,
                               DepartureClock clock, std::uint64_t seed, std::size_t manifest,
                               std::size_t trace, std::size_t departure_index) {
  if (departure.kind == DepartureKind::kFixed) return DepartureTarget::at_time(departure.fixed_s);
  std::seed_seq seq{seed, static_cast<std::uint64_t>(manifest), static_cast<std::uint64_t>(trace),
                    static_cast<std::uint64_t>(departure_index)};
  std::mt19937_64 rng(seq);
  return DepartureTarget::at_ratio(sample_departure_ratio(departure, rng), video_duration_s, clock);
}

BatchResult run_batch(const ExperimentSpec& spec) {
  if (spec.controllers.empty() || spec.traces.empty() || spec.manifests.empty() ||
      spec.departures.empty() || spec.seeds.empty()) {
    throw ConfigError("experiment needs controllers, traces, manifests, departures and seeds");
  }
  BatchResult out;
  std::size_t id = 0;
  for (std::size_t mi = 0; mi < spec.manifests.size(); ++mi) {
    const auto& man = spec.manifests[mi];
    for (std::size_t ti = 0; ti < spec.traces.size(); ++ti) {
      for (std::size_t di = 0; di < spec.departures.size(); ++di) {
        const auto& dep = spec.departures[di];
        for (std::uint64_t seed : spec.seeds) {
          DepartureTarget target =
              cell_departure(dep, man.manifest.duration(), spec.clock, seed, mi, ti, di);
          for (const auto& copt : spec.controllers) {
            BatchRow row;
            try {
              auto bundle = make_controller(copt, man.manifest);
              auto res = run_session(man.manifest, spec.traces[ti].trace, *bundle.controller,
                                     bundle.predictor.get(), target, spec.session);
              row = summarize(res);
            } catch (const std::exception& e) {
              row = BatchRow{};
              row.error = e.what();
            }
            row.session_id = id++;
            row.controller = copt.name;
            row.trace = spec.traces[ti].name;
            row.manifest = man.name;
            row.departure = dep.label();
            row.seed = seed;
            out.rows.push_back(std::move(row));
          }
        }
      }
    }
  }
  out.aggregates = aggregate(out.rows);
  return out;
}

std::vector<AggregateRow> aggregate(const std::vector<BatchRow>& rows) {
  std::vector<AggregateRow> out;
  std::map<std::string, std::size_t> index;
  for (const auto& r : rows) {
    auto it = index.find(r.controller);
    if (it == index.end()) {
      it = index.emplace(r.controller, out.size()).first;
      out.push_back(AggregateRow{r.controller});
    }
    if (!r.error.empty()) continue;
    auto& a = out[it->second];
    a.sessions += 1;
    a.departure_s += r.departure_s;
    a.qoe_lin += r.qoe_lin;
    a.qoe_log += r.qoe_log;
    a.wastage_bytes += static_cast<double>(r.wastage_bytes);
    a.mean_bdv_bytes += r.mean_bdv_bytes;
    a.mean_bvt_s += r.mean_bvt_s;
    a.rebuffer_ratio += r.rebuffer_ratio;
    a.mean_quality += r.mean_quality;
    a.mean_switch += r.mean_switch;
    a.mean_plan_latency_ms += r.mean_plan_latency_ms;
  }
  for (auto& a : out) {
    if (a.sessions == 0) continue;
    double n = static_cast<double>(a.sessions);
    for (double* v : {&a.departure_s, &a.qoe_lin, &a.qoe_log, &a.wastage_bytes, &a.mean_bdv_bytes,
                      &a.mean_bvt_s, &a.rebuffer_ratio, &a.mean_quality, &a.mean_switch,
                      &a.mean_plan_latency_ms}) {
      *v /= n;
    }
  }
  return out;
}

namespace {

std::string fmt(double v) {
  if (!std::isfinite(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

std::vector<double> values(const AggregateRow& a) {
  return {a.departure_s,  a.qoe_lin,     a.qoe_log,        a.wastage_bytes,
          a.mean_bdv_bytes, a.mean_bvt_s, a.rebuffer_ratio, a.mean_quality,
          a.mean_switch,  a.mean_plan_latency_ms};
}

void write_aggregate(std::ostringstream& out, const std::string& id, const std::string& controller,
                     const std::vector<double>& v) {
  out << id << ',' << csv_escape(controller) << ",*,,";
  for (std::size_t i = 0; i < v.size(); ++i) out << fmt(v[i]) << (i + 1 < v.size() ? "," : "");
  out << ",*,*,\n";
}

}  // namespace

std::string batch_to_csv(const BatchResult& result, const std::string& normalize_to) {
  std::ostringstream out;
  out << "session_id,controller,trace,seed,departure_s,qoe_lin,qoe_log,wastage_bytes,"
         "mean_bdv_bytes,mean_bvt_s,rebuffer_ratio,mean_quality,mean_switch,"
         "mean_plan_latency_ms,manifest,departure_mode,error\n";
  for (const auto& r : result.rows) {
    out << r.session_id << ',' << csv_escape(r.controller) << ',' << csv_escape(r.trace) << ','
        << r.seed << ',';
    if (r.error.empty()) {
      out << fmt(r.departure_s) << ',' << fmt(r.qoe_lin) << ',' << fmt(r.qoe_log) << ','
          << r.wastage_bytes << ',' << fmt(r.mean_bdv_bytes) << ',' << fmt(r.mean_bvt_s) << ','
          << fmt(r.rebuffer_ratio) << ',' << fmt(r.mean_quality) << ',' << fmt(r.mean_switch)
          << ',' << fmt(r.mean_plan_latency_ms);
    } else {
      out << ",,,,,,,,,";
    }
    out << ',' << csv_escape(r.manifest) << ',' << csv_escape(r.departure) << ','
        << csv_escape(r.error) << '\n';
  }
  const AggregateRow* ref = nullptr;
  for (const auto& a : result.aggregates) {
    if (a.controller == normalize_to && a.sessions > 0) ref = &a;
  }
  if (!normalize_to.empty() && ref == nullptr) {
    throw ConfigError("cannot normalize: no successful sessions for '" + normalize_to + "'");
  }
  for (const auto& a : result.aggregates) {
    write_aggregate(out, "mean", a.controller, values(a));
  }
  if (ref) {
    auto base = values(*ref);
    for (const auto& a : result.aggregates) {
      auto v = values(a);
      for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = base[i] != 0.0 ? v[i] / base[i] : std::nan("");
      }
      write_aggregate(out, "norm", a.controller, v);
    }
  }
  return out.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw ParseError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw ParseError("cannot move " + tmp.string() + " into place: " + ec.message());
}

}  // namespace beabr

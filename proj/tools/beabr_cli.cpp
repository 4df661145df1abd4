// beabr: simulate sessions, sweep experiments, train and evaluate the delay
// predictor, and generate traces/manifests.
//
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "beabr/batch.hpp"
#include "beabr/datagen.hpp"
#include "beabr/error.hpp"
#include "beabr/predictors.hpp"
#include "beabr/t3p_training.hpp"

using namespace beabr;
using json = nlohmann::json;

namespace {

struct UsageError : Error {
  using Error::Error;
};

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

// Options shared by run and sweep. Flags left unset keep the config file's
// (or the library's) values.
struct SimArgs {
  std::string config_path;
  std::vector<std::string> controllers;
  std::string predictor;
  std::string model_path;
  std::vector<std::string> traces;
  std::size_t trace_count = 1;
  std::uint64_t trace_seed = 1;
  double request_latency = 0.0;
  std::string manifest = "synth:sd:100";
  std::string departure = "none";
  std::optional<double> p, a, beta, loss_ratio, l_max;
  std::optional<std::size_t> lookahead;
  std::string clock = "media";
  std::string qoe = "lin";
  std::uint64_t seed = 1;
  std::size_t seeds = 1;
  bool record_latency = false;
  std::string out;
  std::string normalize;
  std::string chunks_out;
};

void add_sim_flags(CLI::App* cmd, SimArgs& a, bool sweep) {
  cmd->add_option("--config", a.config_path, "JSON config with controller/planner/session keys")
      ->check(CLI::ExistingFile);
  if (sweep) {
    cmd->add_option("--controller", a.controllers, "controllers (repeat or comma-separate)")
        ->delimiter(',');
  } else {
    cmd->add_option("--controller", a.controllers,
                    "be-abr|mpc|robust-mpc|bba|ablation-hm-be|ablation-t3p-mpc")
        ->expected(1);
  }
  cmd->add_option("--predictor", a.predictor, "hm|robust-hm|t3p (default depends on controller)");
  cmd->add_option("--model", a.model_path, "T3P checkpoint")->check(CLI::ExistingFile);
  cmd->add_option("--trace", a.traces,
                  "trace CSV path or synth:<kind>[:<mean B/s>] (repeatable)")
      ->required();
  cmd->add_option("--trace-count", a.trace_count, "synthetic traces per synth: entry")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--trace-seed", a.trace_seed, "seed of the first synthetic trace");
  cmd->add_option("--request-latency", a.request_latency, "per-download latency in seconds")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--manifest", a.manifest, "manifest JSON path or synth:<sd|uhd>:<chunks>");
  cmd->add_option("--departure", a.departure, "none|f1|f2|fixed:<s>");
  cmd->add_option("--p", a.p, "completion probability");
  cmd->add_option("--a", a.a, "f2 skew coefficient");
  cmd->add_option("--departure-clock", a.clock, "media|natural")
      ->check(CLI::IsMember({"media", "natural"}));
  cmd->add_option("--beta", a.beta, "wastage weight per byte")->check(CLI::NonNegativeNumber);
  cmd->add_option("--loss-ratio", a.loss_ratio, "share of the window QoE optimum to keep")
      ->check(CLI::Range(0.0, 1.0));
  cmd->add_option("--lookahead", a.lookahead, "planning lookahead N")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--l-max", a.l_max, "buffer limit in seconds");
  cmd->add_option("--qoe", a.qoe, "planning objective: lin|log")
      ->check(CLI::IsMember({"lin", "log"}));
  cmd->add_option("--seed", a.seed, "base seed for departures and the GA");
  if (sweep) {
    cmd->add_option("--seeds", a.seeds, "departure draws per trace")->check(CLI::PositiveNumber);
    cmd->add_option("--normalize", a.normalize, "add rows relative to this controller");
  } else {
    cmd->add_option("--chunks-out", a.chunks_out, "per-chunk log CSV");
  }
  cmd->add_flag("--record-latency", a.record_latency,
                "measure planning wall time (output is then not reproducible)");
  cmd->add_option("--out", a.out, "CSV output path (stdout if omitted)");
}

struct Config {
  ControllerOptions controller;
  SessionConfig session;
  std::string qoe = "lin";
};

void apply_ga(const json& j, GAConfig& ga) {
  for (auto& [k, v] : j.items()) {
    if (k == "size_pop") ga.size_pop = v.get<std::size_t>();
    else if (k == "max_iter") ga.max_iter = v.get<std::size_t>();
    else if (k == "prob_mut") ga.prob_mut = v.get<double>();
    else if (k == "precision") ga.precision = v.get<double>();
    else if (k == "early_stop") ga.early_stop = v.get<std::size_t>();
    else if (k == "seed") ga.seed = v.get<std::uint64_t>();
    else if (k == "tournament") ga.tournament = v.get<std::size_t>();
    else if (k == "crossover_rate") ga.crossover_rate = v.get<double>();
    else throw ConfigError("unknown ga key '" + k + "'");
  }
}

Config load_config(const std::string& path) {
  Config c;
  if (path.empty()) return c;
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  try {
    for (auto& [k, v] : j.items()) {
      auto& o = c.controller;
      auto& pl = o.planner;
      if (k == "controller") o.name = v.get<std::string>();
      else if (k == "predictor") o.predictor = v.get<std::string>();
      else if (k == "lookahead") pl.reward.lookahead = v.get<std::size_t>();
      else if (k == "loss_ratio") pl.reward.loss_ratio = v.get<double>();
      else if (k == "beta") o.beta = v.get<double>();
      else if (k == "cv_window") pl.reward.cv_window = v.get<std::size_t>();
      else if (k == "wait_grid") pl.wait_grid = v.get<std::vector<double>>();
      else if (k == "ga") apply_ga(v, pl.ga);
      else if (k == "mpc_horizon") o.mpc_horizon = v.get<std::size_t>();
      else if (k == "bba_reservoir_s") o.bba_reservoir_s = v.get<double>();
      else if (k == "bba_cushion_s") o.bba_cushion_s = v.get<double>();
      else if (k == "cold_start_Bps") o.cold_start_Bps = v.get<double>();
      else if (k == "l_max_s") c.session.buffer.l_max_s = v.get<double>();
      else if (k == "qoe") c.qoe = v.get<std::string>();
      else throw ConfigError("unknown config key '" + k + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return c;
}

VideoManifest resolve_manifest(const std::string& spec, std::uint64_t seed) {
  if (spec.rfind("synth:", 0) != 0) return load_manifest(spec);
  auto parts = split(spec, ':');
  if (parts.size() != 3) throw UsageError("manifest must be synth:<sd|uhd>:<chunks>");
  BitrateLadder ladder = parts[1] == "uhd" ? BitrateLadder::uhd() : BitrateLadder::sd();
  if (parts[1] != "sd" && parts[1] != "uhd") throw UsageError("unknown ladder '" + parts[1] + "'");
  std::size_t chunks = 0;
  try {
    chunks = std::stoul(parts[2]);
  } catch (const std::exception&) {
    throw UsageError("bad chunk count '" + parts[2] + "'");
  }
  return synth_manifest(ladder, chunks, kChunkDurationShort, seed);
}

std::vector<NamedTrace> resolve_traces(const SimArgs& a) {
  std::vector<NamedTrace> out;
  for (const auto& t : a.traces) {
    if (t.rfind("synth:", 0) != 0) {
      out.push_back({std::filesystem::path(t).stem().string(),
                     load_trace(t, true, a.request_latency)});
      continue;
    }
    auto parts = split(t, ':');
    if (parts.size() < 2 || parts.size() > 3) throw UsageError("trace must be synth:<kind>[:<mean>]");
    TraceSpec ts = parts[1] == "regime" ? DatasetGenConfig::default_training_trace() : TraceSpec{};
    ts.kind = parse_trace_kind(parts[1]);
    ts.request_latency_s = a.request_latency;
    if (parts.size() == 3) {
      double mean = 0.0;
      try {
        mean = std::stod(parts[2]);
      } catch (const std::exception&) {
        throw UsageError("bad trace mean '" + parts[2] + "'");
      }
      if (ts.kind == TraceKind::kRegime) {
        double old = 0.0;
        for (double m : ts.regime_means_Bps) old += m;
        old /= static_cast<double>(ts.regime_means_Bps.size());
        for (double& m : ts.regime_means_Bps) m *= mean / old;
      } else {
        ts.mean_Bps = mean;
      }
    }
    for (std::size_t i = 0; i < a.trace_count; ++i) {
      std::uint64_t seed = a.trace_seed + i;
      out.push_back({parts[1] + "-" + std::to_string(seed), synth_trace(ts, seed)});
    }
  }
  return out;
}

ExperimentSpec build_spec(const SimArgs& a) {
  Config cfg = load_config(a.config_path);
  ControllerOptions base = cfg.controller;
  if (!a.predictor.empty()) base.predictor = a.predictor;
  if (a.beta) base.beta = *a.beta;
  if (a.loss_ratio) base.planner.reward.loss_ratio = *a.loss_ratio;
  if (a.lookahead) base.planner.reward.lookahead = *a.lookahead;
  base.planner.ga.seed = a.seed;
  if (!a.model_path.empty()) {
    base.model = std::make_shared<const T3pModel>(T3pModel::load(a.model_path));
  }

  ExperimentSpec spec;
  spec.session = cfg.session;
  if (a.l_max) spec.session.buffer.l_max_s = *a.l_max;
  spec.session.record_latency = a.record_latency;

  // The flag wins over the config file's controller.
  std::vector<std::string> names = a.controllers;
  if (names.empty()) names = {cfg.controller.name};
  for (const auto& n : names) {
    ControllerOptions o = base;
    o.name = n;
    spec.controllers.push_back(o);
  }
  std::string manifest_name = a.manifest.rfind("synth:", 0) == 0
                                  ? a.manifest.substr(6)
                                  : std::filesystem::path(a.manifest).stem().string();
  spec.manifests.push_back({manifest_name, resolve_manifest(a.manifest, a.seed)});
  // Fail fast on bad controller options instead of once per cell.
  for (const auto& c : spec.controllers) make_controller(c, spec.manifests[0].manifest);
  std::string qoe = a.qoe != "lin" ? a.qoe : cfg.qoe;
  if (qoe == "log") {
    spec.session.planning_weights = QoEWeights::logarithmic(spec.manifests[0].manifest.ladder());
  } else if (qoe != "lin") {
    throw ConfigError("qoe must be lin or log");
  }
  spec.traces = resolve_traces(a);
  spec.departures = {DepartureModel::parse(a.departure, a.p.value_or(0.2), a.a.value_or(10.0))};
  spec.clock = a.clock == "natural" ? DepartureClock::kNaturalTime : DepartureClock::kMediaTime;
  spec.seeds.clear();
  for (std::size_t i = 0; i < a.seeds; ++i) spec.seeds.push_back(a.seed + i);
  return spec;
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
  } else {
    write_file_atomic(path, text);
  }
}

std::string chunk_log_csv(const SessionResult& r) {
  std::ostringstream out;
  out << "chunk,level,bitrate_kbps,bytes,start_s,download_s,wait_s,bvt_before_s,rebuffer_s,"
         "predicted_download_s,expected_qoe,max_qoe,qoe_bound,gamma,completed\n";
  char buf[512];
  for (const auto& c : r.chunks) {
    std::snprintf(buf, sizeof(buf), "%zu,%zu,%.0f,%llu,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%d\n",
                  c.chunk_index, c.level, c.bitrate_kbps, static_cast<unsigned long long>(c.bytes),
                  c.start_s, c.download_s, c.wait_s, c.bvt_before_s, c.rebuffer_s,
                  c.predicted_download_s, c.expected_qoe, c.max_qoe, c.qoe_bound, c.gamma,
                  c.completed ? 1 : 0);
    out << buf;
  }
  return out.str();
}

int cmd_run(const SimArgs& a) {
  if (a.traces.size() != 1 || a.trace_count != 1) throw UsageError("run takes exactly one trace");
  ExperimentSpec spec = build_spec(a);
  auto res = run_batch(spec);
  const auto& row = res.rows.at(0);
  if (!row.error.empty()) throw Error(row.error);
  emit(a.out, batch_to_csv(res));
  if (!a.chunks_out.empty()) {
    // Re-run the single cell to recover the per-chunk log.
    const auto& m = spec.manifests[0].manifest;
    auto bundle = make_controller(spec.controllers[0], m);
    auto target = cell_departure(spec.departures[0], m.duration(), spec.clock, spec.seeds[0], 0, 0, 0);
    auto r = run_session(m, spec.traces[0].trace, *bundle.controller, bundle.predictor.get(),
                         target, spec.session);
    write_file_atomic(a.chunks_out, chunk_log_csv(r));
  }
  return 0;
}

int cmd_sweep(const SimArgs& a) {
  ExperimentSpec spec = build_spec(a);
  auto res = run_batch(spec);
  emit(a.out, batch_to_csv(res, a.normalize));
  std::size_t failed = 0;
  for (const auto& r : res.rows) failed += r.error.empty() ? 0 : 1;
  for (const auto& g : res.aggregates) {
    std::fprintf(stderr, "%-18s sessions=%zu qoe_lin=%.1f wastage=%.0f mean_bdv=%.0f\n",
                 g.controller.c_str(), g.sessions, g.qoe_lin, g.wastage_bytes, g.mean_bdv_bytes);
  }
  if (failed > 0) std::fprintf(stderr, "%zu session(s) failed; see the error column\n", failed);
  return 0;
}

struct DataArgs {
  std::string dataset;
  std::size_t windows = 50000;
  std::size_t history = 8;
  std::uint64_t data_seed = 1;
};

std::vector<DelayExample> obtain_dataset(const DataArgs& d) {
  if (!d.dataset.empty()) return load_dataset(d.dataset);
  DatasetGenConfig g;
  g.windows = d.windows;
  g.history = d.history;
  g.seed = d.data_seed;
  return generate_delay_dataset(g);
}

void add_data_flags(CLI::App* cmd, DataArgs& d) {
  cmd->add_option("--dataset", d.dataset, "dataset CSV (generated when omitted)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--windows", d.windows, "windows to generate")->check(CLI::PositiveNumber);
  cmd->add_option("--data-seed", d.data_seed, "seed for dataset generation and splitting");
}

struct TrainArgs {
  DataArgs data;
  T3pConfig model;
  TrainConfig train;
  std::uint64_t seed = 1;
  std::string out;
  std::string save_dataset;
};

int cmd_train(TrainArgs& a) {
  a.data.history = a.model.history;
  a.model.validate();
  auto data = obtain_dataset(a.data);
  if (!a.save_dataset.empty()) save_dataset(a.save_dataset, data);
  auto split = split_dataset(std::move(data), a.data.data_seed);
  T3pModel model(a.model, a.seed);
  a.train.seed = a.seed;
  auto report = train_model(model, split.train, split.validation, a.train,
                            [](const EpochLog& l) {
                              std::fprintf(stderr, "epoch %zu step %zu train %.5f val %.5f\n",
                                           l.epoch, l.steps, l.train_mse, l.val_mse);
                            });
  model.save(a.out);
  auto pred = predict_seconds(model, split.test);
  std::vector<double> y;
  for (const auto& e : split.test) y.push_back(e.target_s);
  auto m = eval_metrics(pred, y);
  std::printf("initial_val_mse,best_val_mse,best_epoch,steps,test_mae_s,test_rmse_s,test_mape\n");
  std::printf("%.6f,%.6f,%zu,%zu,%.6f,%.6f,%.6f\n", report.initial_val_mse, report.best_val_mse,
              report.best_epoch, report.steps, m.mae, m.rmse, m.mape);
  return 0;
}

struct EvalArgs {
  DataArgs data;
  std::string model;
  bool whole = false;
  std::string out;
};

int cmd_eval(EvalArgs& a) {
  auto model = T3pModel::load(a.model);
  a.data.history = model.config().history;
  auto data = obtain_dataset(a.data);
  std::vector<DelayExample> test =
      a.whole ? data : split_dataset(std::move(data), a.data.data_seed).test;
  std::vector<double> y, hm;
  for (const auto& e : test) {
    y.push_back(e.target_s);
    hm.push_back(hm_predict(e.window, e.d_star_bytes));
  }
  auto t3p = predict_seconds(model, test);
  std::ostringstream out;
  out << "predictor,count,mae_s,rmse_s,mape,mape_excluded\n";
  char buf[256];
  for (auto [name, pred] : {std::pair{"t3p", &t3p}, std::pair{"hm", &hm}}) {
    auto m = eval_metrics(*pred, y);
    std::snprintf(buf, sizeof(buf), "%s,%zu,%.6f,%.6f,%.6f,%zu\n", name, m.count, m.mae, m.rmse,
                  m.mape, m.mape_excluded);
    out << buf;
  }
  emit(a.out, out.str());
  return 0;
}

struct TraceArgs {
  std::string kind = "regime";
  std::optional<double> mean;
  TraceSpec spec;
  std::uint64_t seed = 1;
  std::string packet_log;
  double bin_ms = 100.0;
  std::string out;
};

int cmd_gen_trace(TraceArgs& a) {
  NetworkTrace trace;
  if (!a.packet_log.empty()) {
    trace = trace_from_packet_log(read_text(a.packet_log), 1500.0, a.bin_ms);
  } else {
    TraceSpec ts = a.spec;
    ts.kind = parse_trace_kind(a.kind);
    if (a.mean) ts.mean_Bps = *a.mean;
    trace = synth_trace(ts, a.seed);
  }
  emit(a.out, trace_to_csv(trace));
  return 0;
}

struct ManifestArgs {
  std::string ladder = "sd";
  std::size_t chunks = 100;
  double chunk_duration = kChunkDurationShort;
  double jitter = 0.15;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_gen_manifest(const ManifestArgs& a) {
  auto ladder = a.ladder == "uhd" ? BitrateLadder::uhd() : BitrateLadder::sd();
  auto m = synth_manifest(ladder, a.chunks, a.chunk_duration, a.seed, a.jitter);
  emit(a.out, manifest_to_json(m) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wastage-aware adaptive bitrate streaming simulator"};
  app.require_subcommand(1);

  SimArgs run_args;
  auto* run = app.add_subcommand("run", "simulate one session");
  add_sim_flags(run, run_args, false);

  SimArgs sweep_args;
  auto* sweep = app.add_subcommand("sweep", "controllers x traces x departure draws");
  add_sim_flags(sweep, sweep_args, true);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train-predictor", "train the T3P delay predictor");
  add_data_flags(train, train_args.data);
  train->add_option("--T", train_args.model.history, "history length");
  train->add_option("--s", train_args.model.state_width, "state width");
  train->add_option("--d-model", train_args.model.d_model, "encoder width");
  train->add_option("--heads", train_args.model.heads, "attention heads");
  train->add_option("--ff", train_args.model.ff_width, "feed-forward width");
  train->add_option("--batch", train_args.train.batch_size, "batch size");
  train->add_option("--warmup", train_args.train.warmup_steps, "learning-rate warmup steps");
  train->add_option("--max-epochs", train_args.train.max_epochs, "epoch cap");
  train->add_option("--max-steps", train_args.train.max_steps, "optimizer step cap (0 = none)");
  train->add_option("--patience", train_args.train.patience, "early-stopping patience");
  train->add_option("--seed", train_args.seed, "initialization and shuffling seed");
  train->add_option("--save-dataset", train_args.save_dataset, "also write the dataset CSV");
  train->add_option("--out", train_args.out, "checkpoint path")->required();

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval-predictor", "T3P vs harmonic mean on a test split");
  add_data_flags(eval, eval_args.data);
  eval->add_option("--model", eval_args.model, "T3P checkpoint")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_flag("--all", eval_args.whole, "score every example instead of the test split");
  eval->add_option("--out", eval_args.out, "metrics CSV (stdout if omitted)");

  TraceArgs trace_args;
  auto* gen_trace = app.add_subcommand("gen-trace", "write a throughput trace CSV");
  gen_trace->add_option("--kind", trace_args.kind, "constant|step|ar1|regime");
  gen_trace->add_option("--mean", trace_args.mean, "mean throughput in bytes/s");
  gen_trace->add_option("--rho", trace_args.spec.rho, "AR(1) coefficient");
  gen_trace->add_option("--cv", trace_args.spec.cv, "noise relative to the mean");
  gen_trace->add_option("--duration", trace_args.spec.duration_s, "seconds");
  gen_trace->add_option("--interval", trace_args.spec.interval_s, "seconds per point");
  gen_trace->add_option("--seed", trace_args.seed, "generator seed");
  gen_trace->add_option("--from-packet-log", trace_args.packet_log,
                        "convert a millisecond packet-delivery log instead")
      ->check(CLI::ExistingFile);
  gen_trace->add_option("--bin-ms", trace_args.bin_ms, "packet-log bin width");
  gen_trace->add_option("--out", trace_args.out, "CSV path (stdout if omitted)");

  ManifestArgs man_args;
  auto* gen_manifest = app.add_subcommand("gen-manifest", "write a synthetic manifest JSON");
  gen_manifest->add_option("--ladder", man_args.ladder, "sd|uhd")
      ->check(CLI::IsMember({"sd", "uhd"}));
  gen_manifest->add_option("--chunks", man_args.chunks, "chunk count")
      ->check(CLI::PositiveNumber);
  gen_manifest->add_option("--chunk-duration", man_args.chunk_duration, "seconds");
  gen_manifest->add_option("--jitter", man_args.jitter, "relative size jitter");
  gen_manifest->add_option("--seed", man_args.seed, "generator seed");
  gen_manifest->add_option("--out", man_args.out, "JSON path (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*run) return cmd_run(run_args);
    if (*sweep) return cmd_sweep(sweep_args);
    if (*train) return cmd_train(train_args);
    if (*eval) return cmd_eval(eval_args);
    if (*gen_trace) return cmd_gen_trace(trace_args);
    if (*gen_manifest) return cmd_gen_manifest(man_args);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

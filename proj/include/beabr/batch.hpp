#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "beabr/controller.hpp"
#include "beabr/departure.hpp"
#include "beabr/predictors.hpp"
#include "beabr/session.hpp"
#include "beabr/t3p_model.hpp"
#include "beabr/trace.hpp"

namespace beabr {

/// Controller plus the predictor it consumes. Names: be-abr, mpc,
/// robust-mpc, bba, ablation-hm-be (BE-ABR planner on harmonic-mean delays),
/// ablation-t3p-mpc (MPC on T3P delays).
struct ControllerOptions {
  std::string name = "be-abr";
  /// hm | robust-hm | t3p. Empty picks the controller's usual predictor.
  std::string predictor;
  PlannerConfig planner;
  /// Wastage weight; unset derives it from the manifest.
  std::optional<double> beta;
  std::size_t mpc_horizon = 5;
  double bba_reservoir_s = 5.0;
  double bba_cushion_s = 10.0;
  double cold_start_Bps = 125000.0;
  std::shared_ptr<const T3pModel> model;
};

struct ControllerBundle {
  std::unique_ptr<Controller> controller;
  std::unique_ptr<DelayPredictor> predictor;
  std::string label;
};

/// Throws ConfigError for unknown names or a T3P predictor without a model.
ControllerBundle make_controller(const ControllerOptions& options, const VideoManifest& manifest);

/// The predictor a controller uses unless overridden.
std::string default_predictor(const std::string& controller);

struct NamedTrace {
  std::string name;
  NetworkTrace trace;
};

struct NamedManifest {
  std::string name;
  VideoManifest manifest;
};

struct ExperimentSpec {
  std::vector<ControllerOptions> controllers;
  std::vector<NamedTrace> traces;
  std::vector<NamedManifest> manifests;
  std::vector<DepartureModel> departures{DepartureModel{}};
  DepartureClock clock = DepartureClock::kMediaTime;
  std::vector<std::uint64_t> seeds{1};
  SessionConfig session;
};

struct BatchRow {
  std::size_t session_id = 0;
  std::string controller;
  std::string trace;
  std::string manifest;
  std::string departure;
  std::uint64_t seed = 0;
  double departure_s = 0.0;
  double qoe_lin = 0.0;
  double qoe_log = 0.0;
  Bytes wastage_bytes = 0;
  double mean_bdv_bytes = 0.0;
  double mean_bvt_s = 0.0;
  double rebuffer_ratio = 0.0;
  double mean_quality = 0.0;
  double mean_switch = 0.0;
  double mean_plan_latency_ms = 0.0;
  /// Empty unless the session failed.
  std::string error;
};

struct AggregateRow {
  std::string controller;
  std::size_t sessions = 0;
  double departure_s = 0.0;
  double qoe_lin = 0.0;
  double qoe_log = 0.0;
  double wastage_bytes = 0.0;
  double mean_bdv_bytes = 0.0;
  double mean_bvt_s = 0.0;
  double rebuffer_ratio = 0.0;
  double mean_quality = 0.0;
  double mean_switch = 0.0;
  double mean_plan_latency_ms = 0.0;
};

struct BatchResult {
  std::vector<BatchRow> rows;
  std::vector<AggregateRow> aggregates;
};

BatchRow summarize(const SessionResult& result);

/// Departure of one experiment cell, drawn from a generator seeded by the
/// cell coordinates.
DepartureTarget cell_departure(const DepartureModel& departure, double video_duration_s,
                               DepartureClock clock, std::uint64_t seed, std::size_t manifest,
                               std::size_t trace, std::size_t departure_index);

/// Every (manifest, trace, departure, seed, controller) cell in that order.
/// A cell's departure time depends on everything but the controller, so
/// controllers face identical viewers. Failed cells keep their error text.
BatchResult run_batch(const ExperimentSpec& spec);

/// Per-controller means over successful rows, in first-appearance order.
std::vector<AggregateRow> aggregate(const std::vector<BatchRow>& rows);

/// Rows, then one "mean" row per controller. With `normalize_to` set, adds
/// "norm" rows dividing each mean by that controller's mean.
std::string batch_to_csv(const BatchResult& result, const std::string& normalize_to = "");

/// Writes through a temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace beabr

#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "beabr/genetic_search.hpp"
#include "beabr/planning_types.hpp"
#include "beabr/qoe_metrics.hpp"

namespace beabr {

struct PlannerConfig {
  /// Candidate pauses in seconds, strictly increasing, starting at 0.
  std::vector<double> wait_grid{0.0, 0.25, 0.5, 1.0, 2.0, 4.0};
  /// Lookahead N, loss ratio l, beta and the gamma window.
  RewardConfig reward;
  GAConfig ga;

  std::size_t lookahead() const { return reward.lookahead; }
  void validate() const;
};

/// What a controller wants for the next chunk. `wait_s` is a request; the
/// session clamps it into the bounds implied by the realized download.
struct Decision {
  std::size_t level = 0;
  double wait_s = 0.0;
  std::optional<DownloadPlan> plan;
  double expected_qoe = 0.0;
  double max_qoe = 0.0;
  double bound = 0.0;
  double gamma = 1.0;
  bool fallback = false;
};

/// gamma over the last `reward.cv_window` throughput samples.
double step_gamma(const ControllerState& state, const RewardConfig& reward);

/// One receding-horizon step: QoE optimum, bound, constrained GA, first move.
/// `state.predictions` must cover min(N+1, remaining) chunks.
Decision plan_step(const ControllerState& state, const PlanContext& ctx,
                   const PlannerConfig& config, double beta);

/// Level chosen by QoE maximization with minimal pauses over the predicted
/// rows in `state`.
std::size_t mpc_plan(const ControllerState& state, const PlanContext& ctx);

/// Buffer-based selection: reservoir, then a linear map across the cushion,
/// rounded down to a ladder level.
std::size_t bba_select(double bvt_s, const BitrateLadder& ladder, double reservoir_s = 5.0,
                       double cushion_s = 10.0);

class Controller {
 public:
  virtual ~Controller() = default;
  virtual std::string name() const = 0;
  /// Rows of delay predictions wanted per step (0 when none are used).
  virtual std::size_t horizon() const = 0;
  virtual Decision decide(const ControllerState& state, const PlanContext& ctx) = 0;
};

class BeAbrController : public Controller {
 public:
  BeAbrController(PlannerConfig config, double beta);
  std::string name() const override { return "be-abr"; }
  std::size_t horizon() const override { return config_.lookahead() + 1; }
  Decision decide(const ControllerState& state, const PlanContext& ctx) override;
  const PlannerConfig& config() const { return config_; }

 private:
  PlannerConfig config_;
  double beta_;
};

/// Covers MPC and RobustMPC; they differ only in the predictor feeding them.
class MpcController : public Controller {
 public:
  explicit MpcController(std::size_t horizon = 5, std::string name = "mpc");
  std::string name() const override { return name_; }
  std::size_t horizon() const override { return horizon_; }
  Decision decide(const ControllerState& state, const PlanContext& ctx) override;

 private:
  std::size_t horizon_;
  std::string name_;
};

class BbaController : public Controller {
 public:
  BbaController(double reservoir_s = 5.0, double cushion_s = 10.0);
  std::string name() const override { return "bba"; }
  std::size_t horizon() const override { return 0; }
  Decision decide(const ControllerState& state, const PlanContext& ctx) override;

 private:
  double reservoir_s_, cushion_s_;
};

}  // namespace beabr

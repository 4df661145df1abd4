#include "beabr/controller.hpp"

#include <algorithm>
#include <cmath>

#include "beabr/error.hpp"

namespace beabr {

void PlannerConfig::validate() const {
  reward.validate();
  ga.validate();
  if (wait_grid.empty() || wait_grid.front() != 0.0) {
    throw ConfigError("wait grid must start at 0");
  }
  for (std::size_t i = 1; i < wait_grid.size(); ++i) {
    if (!(wait_grid[i] > wait_grid[i - 1])) throw ConfigError("wait grid must be increasing");
  }
}

double step_gamma(const ControllerState& state, const RewardConfig& reward) {
  const auto& h = state.throughput_history;
  std::size_t n = std::min(reward.cv_window, h.size());
  return fluctuation_gamma(std::span(h).last(n));
}

Decision plan_step(const ControllerState& state, const PlanContext& ctx,
                   const PlannerConfig& config, double beta) {
  config.validate();
  auto optimum = max_qoe(state, ctx);
  Decision d;
  d.gamma = step_gamma(state, config.reward);
  d.max_qoe = optimum.value;
  d.bound = qoe_bound(optimum.value, config.reward.loss_ratio);
  GAConfig ga = config.ga;
  ga.seed = config.ga.seed ^ (0x9e3779b97f4a7c15ULL * (state.next_chunk + 1));
  auto res = ga_search(state, ctx, d.bound, d.gamma, beta, config.wait_grid, ga, optimum.plan);
  auto tr = predict_trajectory(res.plan, state, ctx);
  d.level = res.plan.levels.front();
  d.wait_s = tr.waits_s.front();
  d.expected_qoe = res.score.qoe;
  d.fallback = res.fallback;
  d.plan = std::move(res.plan);
  return d;
}

std::size_t mpc_plan(const ControllerState& state, const PlanContext& ctx) {
  return max_qoe(state, ctx).plan.levels.front();
}

std::size_t bba_select(double bvt_s, const BitrateLadder& ladder, double reservoir_s,
                       double cushion_s) {
  if (bvt_s < 0.0) throw InvalidArgument("buffer level must be non-negative");
  if (!(cushion_s > 0.0)) throw InvalidArgument("cushion must be positive");
  const std::size_t top = ladder.size() - 1;
  if (bvt_s <= reservoir_s) return 0;
  if (bvt_s >= reservoir_s + cushion_s) return top;
  double frac = (bvt_s - reservoir_s) / cushion_s;
  auto idx = static_cast<std::size_t>(std::floor(frac * static_cast<double>(top)));
  return std::min(idx, top);
}

BeAbrController::BeAbrController(PlannerConfig config, double beta)
    : config_(std::move(config)), beta_(beta) {
  config_.validate();
  if (beta_ < 0.0) throw ConfigError("beta must be non-negative");
}

Decision BeAbrController::decide(const ControllerState& state, const PlanContext& ctx) {
  return plan_step(state, ctx, config_, beta_);
}

MpcController::MpcController(std::size_t horizon, std::string name)
    : horizon_(horizon), name_(std::move(name)) {
  if (horizon_ == 0) throw ConfigError("MPC horizon must be positive");
}

Decision MpcController::decide(const ControllerState& state, const PlanContext& ctx) {
  auto optimum = max_qoe(state, ctx);
  Decision d;
  d.level = optimum.plan.levels.front();
  d.expected_qoe = optimum.value;
  d.max_qoe = optimum.value;
  d.bound = optimum.value;
  d.plan = std::move(optimum.plan);
  return d;
}

BbaController::BbaController(double reservoir_s, double cushion_s)
    : reservoir_s_(reservoir_s), cushion_s_(cushion_s) {
  if (reservoir_s_ < 0.0 || !(cushion_s_ > 0.0)) throw ConfigError("bad BBA reservoir/cushion");
}

Decision BbaController::decide(const ControllerState& state, const PlanContext& ctx) {
  Decision d;
  d.level = bba_select(state.bvt_s(), ctx.manifest->ladder(), reservoir_s_, cushion_s_);
  return d;
}

}  // namespace beabr

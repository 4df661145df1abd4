#include "beabr/qoe_metrics.hpp"

#include <cmath>
#include <numeric>

#include "beabr/error.hpp"

namespace beabr {

QoEWeights QoEWeights::linear() { return {1.0, 600.0, 1.0, QualityMode::linear()}; }

QoEWeights QoEWeights::logarithmic(const BitrateLadder& ladder) {
  return {1.0, 266.0, 1.0, QualityMode::logarithmic(ladder)};
}

void QoEWeights::validate() const {
  if (alpha1 < 0.0 || alpha2 < 0.0 || alpha3 < 0.0) {
    throw InvalidArgument("QoE weights must be non-negative");
  }
  if (mode.scale == QualityScale::kLogarithmic && !(mode.r_min_kbps > 0.0)) {
    throw InvalidArgument("logarithmic quality needs r_min > 0");
  }
}

void RewardConfig::validate() const {
  if (loss_ratio < 0.0 || loss_ratio > 1.0) throw InvalidArgument("loss ratio must be in [0, 1]");
  if (lookahead < 1) throw InvalidArgument("lookahead must be >= 1");
  if (cv_window < 2) throw InvalidArgument("cv window must be >= 2");
}

double default_beta(const VideoManifest& manifest) {
  return 1.0 / (manifest.mean_top_chunk_bytes() * 10.0);
}

double RewardConfig::beta_for(const VideoManifest& manifest) const {
  return beta < 0.0 ? default_beta(manifest) : beta;
}

void SessionLedger::validate() const {
  if (viewed > chunks.size()) throw InvalidArgument("viewed chunks exceed downloaded chunks");
  for (const auto& c : chunks) {
    if (c.rebuffer_s < 0.0) throw InvalidArgument("negative rebuffer time in ledger");
  }
}

double rebuffer_time(double download_s, double bvt_s) {
  return download_s > bvt_s ? download_s - bvt_s : 0.0;
}

namespace {

struct LedgerSums {
  double quality = 0.0;
  double variation = 0.0;
  double rebuffer = 0.0;
};

LedgerSums sum_ledger(const SessionLedger& ledger, const QualityMode& mode) {
  ledger.validate();
  LedgerSums s;
  for (std::size_t i = 0; i < ledger.viewed; ++i) {
    double q = quality_unchecked(ledger.chunks[i].bitrate_kbps, mode);
    s.quality += q;
    if (i > 0) s.variation += std::abs(q - quality_unchecked(ledger.chunks[i - 1].bitrate_kbps, mode));
  }
  for (const auto& c : ledger.chunks) s.rebuffer += c.rebuffer_s;
  return s;
}

}  // namespace

double qoe_at_departure(const SessionLedger& ledger, double t0, const QoEWeights& weights) {
  if (!(t0 > 0.0)) throw InvalidArgument("departure time must be positive");
  weights.validate();
  auto s = sum_ledger(ledger, weights.mode);
  double k1 = static_cast<double>(ledger.viewed);
  double quality_term = ledger.viewed > 0 ? s.quality / k1 : 0.0;
  double variation_term = ledger.viewed > 1 ? s.variation / (k1 - 1.0) : 0.0;
  return weights.alpha1 * quality_term - weights.alpha2 * s.rebuffer / t0 -
         weights.alpha3 * variation_term;
}

double qoe_lin(const SessionLedger& ledger, const QoEWeights& weights) {
  auto s = sum_ledger(ledger, QualityMode::linear());
  return weights.alpha1 * s.quality - weights.alpha2 * s.rebuffer - weights.alpha3 * s.variation;
}

double qoe_log(const SessionLedger& ledger, const QoEWeights& weights, double r_min_kbps) {
  if (!(r_min_kbps > 0.0)) throw InvalidArgument("r_min must be positive");
  auto s = sum_ledger(ledger, {QualityScale::kLogarithmic, r_min_kbps});
  return weights.alpha1 * s.quality - weights.alpha2 * s.rebuffer - weights.alpha3 * s.variation;
}

double session_reward(const SessionLedger& ledger, double t0, const QoEWeights& weights,
                      double beta, double wastage_bytes) {
  return qoe_at_departure(ledger, t0, weights) - beta * wastage_bytes;
}

double fluctuation_gamma(std::span<const double> throughputs) {
  if (throughputs.size() < 2) return 1.0;
  double n = static_cast<double>(throughputs.size());
  double mean = std::accumulate(throughputs.begin(), throughputs.end(), 0.0) / n;
  if (!(mean > 0.0)) throw InvalidArgument("throughput samples must be positive");
  double ss = 0.0;
  for (double b : throughputs) ss += (b - mean) * (b - mean);
  double cv = std::sqrt(ss / (n - 1.0)) / mean;
  return std::exp(-cv);
}

PlanTrajectory predict_trajectory(const DownloadPlan& plan, const ControllerState& state,
                                  const PlanContext& ctx) {
  const auto& manifest = *ctx.manifest;
  const auto& pred = state.predictions;
  std::size_t n = plan.levels.size();
  if (n == 0 || plan.waits_s.size() != n) throw InvalidArgument("plan levels/waits mismatch");
  if (state.next_chunk + n > manifest.chunk_count()) {
    throw InvalidArgument("plan runs past the last chunk");
  }
  if (pred.first_chunk() != state.next_chunk || pred.rows() < n ||
      pred.levels() != manifest.ladder().size()) {
    throw InvalidArgument("delay predictions do not cover the plan window");
  }
  PlanTrajectory tr;
  tr.bvt_s.reserve(n);
  tr.download_s.reserve(n);
  tr.rebuffer_s.reserve(n);
  tr.waits_s.reserve(n);
  double bvt = state.bvt_s();
  double chunk = manifest.chunk_duration();
  for (std::size_t i = 0; i < n; ++i) {
    if (plan.levels[i] >= manifest.ladder().size()) throw InvalidArgument("plan level out of range");
    double d = pred.at(i, plan.levels[i]);
    if (!std::isfinite(d) || d < 0.0) {
      throw InvalidArgument("missing delay prediction for chunk " +
                            std::to_string(state.next_chunk + i));
    }
    bool startup = state.next_chunk + i == 0;
    auto bounds = wait_bounds(bvt, d, chunk, ctx.buffer.l_max_s);
    double wait = bounds.clamp(plan.waits_s[i]);
    tr.bvt_s.push_back(bvt);
    tr.download_s.push_back(d);
    tr.rebuffer_s.push_back(startup ? 0.0 : rebuffer_time(d, bvt));
    tr.waits_s.push_back(wait);
    tr.span_s += d + wait;
    bvt = std::max(0.0, (bvt > d ? bvt - d : 0.0) + chunk - wait);
  }
  return tr;
}

namespace {

double qoe_from_trajectory(const DownloadPlan& plan, const ControllerState& state,
                           const PlanContext& ctx, const PlanTrajectory& tr) {
  const auto& ladder = ctx.manifest->ladder();
  const auto& w = ctx.weights;
  double n = static_cast<double>(plan.levels.size());
  double quality_sum = 0.0, variation_sum = 0.0, rebuffer_sum = 0.0;
  std::optional<double> prev;
  if (state.prev_level) prev = quality_unchecked(ladder[*state.prev_level], w.mode);
  for (std::size_t i = 0; i < plan.levels.size(); ++i) {
    double q = quality_unchecked(ladder[plan.levels[i]], w.mode);
    quality_sum += q;
    if (prev) variation_sum += std::abs(q - *prev);
    prev = q;
    rebuffer_sum += tr.rebuffer_s[i];
  }
  double rebuffer_term = tr.span_s > 0.0 ? rebuffer_sum / tr.span_s : 0.0;
  return w.alpha1 * quality_sum / n - w.alpha2 * rebuffer_term - w.alpha3 * variation_sum / n;
}

}  // namespace

double window_qoe(const DownloadPlan& plan, const ControllerState& state, const PlanContext& ctx) {
  return qoe_from_trajectory(plan, state, ctx, predict_trajectory(plan, state, ctx));
}

PlanScore score_plan(const DownloadPlan& plan, const ControllerState& state,
                     const PlanContext& ctx, SessionTimeline& scratch) {
  auto tr = predict_trajectory(plan, state, ctx);
  PlanScore score;
  score.qoe = qoe_from_trajectory(plan, state, ctx, tr);
  if (!(tr.span_s > 0.0)) {
    score.was = state.bdv_bytes();
    return score;
  }
  const auto& manifest = *ctx.manifest;
  scratch.reset(state.buffer);
  for (std::size_t i = 0; i < plan.levels.size(); ++i) {
    std::size_t chunk = state.next_chunk + i;
    std::size_t level = plan.levels[i];
    scratch.append(chunk, manifest.ladder()[level], manifest.size(chunk, level), tr.download_s[i],
                   tr.waits_s[i]);
  }
  score.was = std::max(0.0, scratch.bdv_integral(scratch.start_time(), scratch.end_time()) /
                                (scratch.end_time() - scratch.start_time()));
  return score;
}

double window_was(const DownloadPlan& plan, const ControllerState& state, const PlanContext& ctx) {
  SessionTimeline scratch(ctx.manifest->chunk_duration(), ctx.buffer);
  return score_plan(plan, state, ctx, scratch).was;
}

double adaptive_reward(const PlanScore& score, double gamma, double beta) {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw InvalidArgument("gamma must be in (0, 1]");
  if (beta < 0.0) throw InvalidArgument("beta must be non-negative");
  return score.qoe - gamma * beta * score.was;
}

double adaptive_reward(const DownloadPlan& plan, const ControllerState& state,
                       const PlanContext& ctx, double gamma, double beta) {
  SessionTimeline scratch(ctx.manifest->chunk_duration(), ctx.buffer);
  return adaptive_reward(score_plan(plan, state, ctx, scratch), gamma, beta);
}

}  // namespace beabr

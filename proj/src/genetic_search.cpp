#include "beabr/genetic_search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <unordered_map>

#include "beabr/error.hpp"

namespace beabr {

void GAConfig::validate() const {
  if (size_pop < 2) throw ConfigError("GA population must be at least 2");
  if (max_iter < 1) throw ConfigError("GA needs at least one iteration");
  if (prob_mut < 0.0 || prob_mut > 1.0) throw ConfigError("mutation probability must be in [0, 1]");
  if (crossover_rate < 0.0 || crossover_rate > 1.0) {
    throw ConfigError("crossover rate must be in [0, 1]");
  }
  if (tournament < 1) throw ConfigError("tournament size must be at least 1");
  if (early_stop < 1) throw ConfigError("early_stop must be at least 1");
}

namespace {

struct Enumerator {
  const ControllerState& state;
  const PlanContext& ctx;
  std::size_t rows;
  std::vector<double> quality;
  std::vector<std::size_t> current;
  QoeOptimum best;
  bool found = false;

  void run(std::size_t i, double bvt, double qsum, double vsum, double rsum, double span,
           double prev_q, bool has_prev) {
    const auto& w = ctx.weights;
    if (i == rows) {
      double n = static_cast<double>(rows);
      double rebuffer_term = span > 0.0 ? rsum / span : 0.0;
      double value = w.alpha1 * qsum / n - w.alpha2 * rebuffer_term - w.alpha3 * vsum / n;
      if (!found || value > best.value) {
        best.value = value;
        best.plan.levels = current;
        found = true;
      }
      return;
    }
    const double chunk = ctx.manifest->chunk_duration();
    const bool startup = state.next_chunk + i == 0;
    for (std::size_t j = 0; j < quality.size(); ++j) {
      double d = state.predictions.at(i, j);
      double wait = wait_bounds(bvt, d, chunk, ctx.buffer.l_max_s).min_s;
      double reb = startup ? 0.0 : rebuffer_time(d, bvt);
      double next = std::max(0.0, (bvt > d ? bvt - d : 0.0) + chunk - wait);
      double var = has_prev ? std::abs(quality[j] - prev_q) : 0.0;
      current[i] = j;
      run(i + 1, next, qsum + quality[j], vsum + var, rsum + reb, span + d + wait, quality[j],
          true);
    }
  }
};

// One byte per gene; std::string compares bytes as unsigned.
using Genome = std::string;

DownloadPlan decode(const Genome& g, std::size_t rows, std::span<const double> grid) {
  DownloadPlan p;
  p.levels.resize(rows);
  p.waits_s.resize(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    p.levels[i] = static_cast<std::uint8_t>(g[i]);
    p.waits_s[i] = grid[static_cast<std::uint8_t>(g[rows + i])];
  }
  return p;
}

struct Scored {
  double fitness = -std::numeric_limits<double>::infinity();
  PlanScore score;
};

// Higher fitness wins; equal fitness goes to the smaller genome (lower
// bitrates first, then shorter waits).
bool better(double fa, const Genome& a, double fb, const Genome& b) {
  if (fa != fb) return fa > fb;
  return a < b;
}

}  // namespace

QoeOptimum max_qoe(const ControllerState& state, const PlanContext& ctx) {
  const auto& ladder = ctx.manifest->ladder();
  std::size_t rows = state.predictions.rows();
  if (rows == 0) throw InvalidArgument("max_qoe needs at least one predicted row");
  Enumerator e{state, ctx, rows, {}, std::vector<std::size_t>(rows, 0), {}, false};
  for (std::size_t j = 0; j < ladder.size(); ++j) {
    e.quality.push_back(quality_unchecked(ladder[j], ctx.weights.mode));
  }
  double prev_q = state.prev_level ? e.quality.at(*state.prev_level) : 0.0;
  e.run(0, state.bvt_s(), 0.0, 0.0, 0.0, 0.0, prev_q, state.prev_level.has_value());
  QoeOptimum out = std::move(e.best);
  out.plan.waits_s.assign(rows, 0.0);
  // Report the value exactly as window_qoe computes it, so the constraint
  // check and the optimum agree bit for bit.
  out.value = window_qoe(out.plan, state, ctx);
  return out;
}

double qoe_bound(double max_qoe, double loss_ratio) {
  if (loss_ratio < 0.0 || loss_ratio > 1.0) throw InvalidArgument("loss ratio must be in [0, 1]");
  if (loss_ratio == 1.0) return max_qoe;
  return max_qoe - (1.0 - loss_ratio) * std::abs(max_qoe);
}

SearchResult ga_search(const ControllerState& state, const PlanContext& ctx, double bound,
                       double gamma, double beta, std::span<const double> wait_grid,
                       const GAConfig& config, const DownloadPlan& fallback) {
  config.validate();
  if (!(gamma > 0.0 && gamma <= 1.0)) throw InvalidArgument("gamma must be in (0, 1]");
  if (wait_grid.empty()) throw InvalidArgument("wait grid is empty");
  const std::size_t rows = state.predictions.rows();
  const std::size_t levels = ctx.manifest->ladder().size();
  if (fallback.size() != rows) throw InvalidArgument("fallback plan length mismatch");
  if (levels > 255 || wait_grid.size() > 255) throw InvalidArgument("grid too large for GA genes");

  std::mt19937_64 rng(config.seed);
  SessionTimeline scratch(ctx.manifest->chunk_duration(), ctx.buffer);
  std::unordered_map<Genome, Scored> memo;
  SearchResult result;

  auto evaluate = [&](const Genome& g) -> const Scored& {
    auto it = memo.find(g);
    if (it != memo.end()) return it->second;
    ++result.evaluations;
    Scored s;
    s.score = score_plan(decode(g, rows, wait_grid), state, ctx, scratch);
    if (s.score.qoe >= bound) s.fitness = adaptive_reward(s.score, gamma, beta);
    return memo.emplace(g, s).first->second;
  };

  std::uniform_int_distribution<int> level_dist(0, static_cast<int>(levels) - 1);
  std::uniform_int_distribution<int> wait_dist(0, static_cast<int>(wait_grid.size()) - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto random_gene = [&](std::size_t pos) {
    return static_cast<char>(pos < rows ? level_dist(rng) : wait_dist(rng));
  };

  // The QoE-optimal plan with the shortest pauses seeds the population.
  Genome seed(2 * rows, 0);
  std::size_t zero_wait = static_cast<std::size_t>(
      std::min_element(wait_grid.begin(), wait_grid.end()) - wait_grid.begin());
  for (std::size_t i = 0; i < rows; ++i) {
    seed[i] = static_cast<char>(fallback.levels[i]);
    seed[rows + i] = static_cast<char>(zero_wait);
  }
  std::vector<Genome> pop;
  pop.push_back(seed);
  while (pop.size() < config.size_pop) {
    Genome g(2 * rows, 0);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = random_gene(k);
    pop.push_back(std::move(g));
  }

  Genome best = seed;
  double best_fit = -std::numeric_limits<double>::infinity();
  bool have_best = false;
  std::size_t stall = 0;
  std::vector<double> fit(pop.size());

  for (std::size_t iter = 0; iter < config.max_iter; ++iter) {
    ++result.generations;
    bool improved = false;
    for (std::size_t i = 0; i < pop.size(); ++i) {
      fit[i] = evaluate(pop[i]).fitness;
      if (!have_best || better(fit[i], pop[i], best_fit, best)) {
        if (!have_best || fit[i] > best_fit) improved = true;
        best = pop[i];
        best_fit = fit[i];
        have_best = true;
      }
    }
    stall = improved ? 0 : stall + 1;
    if (stall >= config.early_stop) break;

    auto pick = [&]() -> const Genome& {
      std::uniform_int_distribution<std::size_t> idx(0, pop.size() - 1);
      std::size_t w = idx(rng);
      for (std::size_t t = 1; t < config.tournament; ++t) {
        std::size_t c = idx(rng);
        if (better(fit[c], pop[c], fit[w], pop[w])) w = c;
      }
      return pop[w];
    };
    std::vector<Genome> next;
    next.reserve(pop.size());
    next.push_back(best);
    while (next.size() < pop.size()) {
      Genome a = pick();
      Genome b = pick();
      if (unit(rng) < config.crossover_rate && a.size() > 1) {
        std::uniform_int_distribution<std::size_t> cut(0, a.size());
        std::size_t c1 = cut(rng), c2 = cut(rng);
        if (c1 > c2) std::swap(c1, c2);
        for (std::size_t k = c1; k < c2; ++k) std::swap(a[k], b[k]);
      }
      for (Genome* g : {&a, &b}) {
        for (std::size_t k = 0; k < g->size(); ++k) {
          if (unit(rng) < config.prob_mut) (*g)[k] = random_gene(k);
        }
      }
      next.push_back(std::move(a));
      if (next.size() < pop.size()) next.push_back(std::move(b));
    }
    pop = std::move(next);
    fit.assign(pop.size(), 0.0);
  }

  if (!std::isfinite(best_fit)) {
    result.plan = fallback;
    result.score = score_plan(fallback, state, ctx, scratch);
    result.reward = adaptive_reward(result.score, gamma, beta);
    result.fallback = true;
    return result;
  }
  const Scored& s = evaluate(best);
  result.plan = decode(best, rows, wait_grid);
  result.score = s.score;
  result.reward = s.fitness;
  return result;
}

}  // namespace beabr

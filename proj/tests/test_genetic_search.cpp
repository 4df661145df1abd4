#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "beabr/error.hpp"
#include "beabr/genetic_search.hpp"
#include "fixtures.hpp"

using namespace beabr;

namespace {

const BitrateLadder kThree({300.0, 1200.0, 3000.0});

// Every level sequence with zero requested waits (clamped up to the minimum).
QoeOptimum brute_max_qoe(const ControllerState& st, const PlanContext& ctx) {
  const std::size_t rows = st.predictions.rows(), levels = ctx.manifest->ladder().size();
  QoeOptimum best;
  best.value = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> seq(rows, 0);
  std::size_t total = 1;
  for (std::size_t i = 0; i < rows; ++i) total *= levels;
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (std::size_t i = rows; i-- > 0;) {
      seq[i] = c % levels;
      c /= levels;
    }
    DownloadPlan p{seq, std::vector<double>(rows, 0.0)};
    double v = window_qoe(p, st, ctx);
    if (v > best.value) best = {v, p};
  }
  return best;
}

struct BruteReward {
  double reward = -std::numeric_limits<double>::infinity();
  std::size_t evaluations = 0;
};

BruteReward brute_reward(const ControllerState& st, const PlanContext& ctx, double bound,
                         double gamma, double beta, const std::vector<double>& grid) {
  const std::size_t rows = st.predictions.rows(), levels = ctx.manifest->ladder().size();
  const std::size_t genes = levels * grid.size();
  std::size_t total = 1;
  for (std::size_t i = 0; i < rows; ++i) total *= genes;
  BruteReward out;
  DownloadPlan p{std::vector<std::size_t>(rows), std::vector<double>(rows)};
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (std::size_t i = 0; i < rows; ++i) {
      p.levels[i] = (c % genes) / grid.size();
      p.waits_s[i] = grid[(c % genes) % grid.size()];
      c /= genes;
    }
    ++out.evaluations;
    double q = window_qoe(p, st, ctx);
    if (q < bound) continue;
    double r = q - gamma * beta * window_was(p, st, ctx);
    out.reward = std::max(out.reward, r);
  }
  return out;
}

}  // namespace

TEST_SUITE("genetic_search") {

TEST_CASE("max_qoe against exhaustive window evaluation") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> bvt(0.0, 12.0);
  for (auto weights : {QoEWeights::linear(), QoEWeights::logarithmic(kThree)}) {
    for (int n = 0; n < 40; ++n) {
      auto m = fixture::flat_manifest(kThree, 2.0, 20);
      PlanContext ctx{&m, BufferConfig{20.0}, weights};
      std::size_t next = 8;
      auto st = fixture::state_at(m, n % 5 == 0 ? 0.0 : bvt(rng), next, n % 2 ? 2 : 3);
      fixture::fill_random_delays(st, m, rng, 3e4, 1e6);
      auto got = max_qoe(st, ctx);
      auto want = brute_max_qoe(st, ctx);
      CHECK(got.value == doctest::Approx(want.value).epsilon(1e-9));
      CHECK(window_qoe(got.plan, st, ctx) == got.value);
      CHECK(got.plan.waits_s == std::vector<double>(st.predictions.rows(), 0.0));
    }
  }
}

TEST_CASE("max_qoe edge cases") {
  auto m = fixture::flat_manifest(kThree, 2.0, 10);
  PlanContext ctx{&m, BufferConfig{20.0}, QoEWeights::linear()};

  SUBCASE("instant downloads pick the top level") {
    auto st = fixture::state_at(m, 6.0, 4, 3, 2);
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) st.predictions.at(i, j) = 1e-6;
    }
    auto opt = max_qoe(st, ctx);
    CHECK(opt.plan.levels == std::vector<std::size_t>{2, 2, 2});
    CHECK(opt.value == doctest::Approx(3000.0));
  }

  SUBCASE("single level ladder") {
    BitrateLadder one({800.0});
    auto m1 = fixture::flat_manifest(one, 2.0, 10);
    PlanContext c1{&m1, BufferConfig{20.0}, QoEWeights::linear()};
    auto st = fixture::state_at(m1, 4.0, 4, 3, 0);
    for (std::size_t i = 0; i < 3; ++i) st.predictions.at(i, 0) = 1.0;
    auto opt = max_qoe(st, c1);
    CHECK(opt.plan.levels == std::vector<std::size_t>{0, 0, 0});
    CHECK(opt.value == doctest::Approx(800.0));
  }

  SUBCASE("no rows") {
    auto st = fixture::state_at(m, 2.0, 4, 0);
    CHECK_THROWS_AS(max_qoe(st, ctx), InvalidArgument);
  }
}

TEST_CASE("bound") {
  CHECK(qoe_bound(1000.0, 0.9) == doctest::Approx(900.0));
  CHECK(qoe_bound(1000.0, 1.0) == 1000.0);
  CHECK(qoe_bound(-200.0, 0.9) == doctest::Approx(-220.0));
  CHECK(qoe_bound(-200.0, 1.0) == -200.0);
  CHECK(qoe_bound(0.0, 0.5) == 0.0);
  CHECK_THROWS_AS(qoe_bound(1.0, 1.5), InvalidArgument);
  CHECK_THROWS_AS(qoe_bound(1.0, -0.1), InvalidArgument);
}

TEST_CASE("GA reaches the exhaustive optimum on small instances") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> bvt(0.0, 14.0);
  const std::vector<double> grid{0.0, 1.0, 3.0};
  int hits = 0;
  const int instances = 30;
  for (int n = 0; n < instances; ++n) {
    auto m = fixture::flat_manifest(kThree, 2.0, 20);
    PlanContext ctx{&m, BufferConfig{20.0}, QoEWeights::linear()};
    auto st = fixture::state_at(m, bvt(rng), 8, 3);
    fixture::fill_random_delays(st, m, rng, 1e5, 2e6);
    st.throughput_history = {4e5, 6e5, 5e5};
    double gamma = fluctuation_gamma(st.throughput_history);
    double beta = default_beta(m);
    auto opt = max_qoe(st, ctx);
    double bound = qoe_bound(opt.value, 0.9);
    GAConfig ga;
    ga.seed = static_cast<std::uint64_t>(n);
    auto res = ga_search(st, ctx, bound, gamma, beta, grid, ga, opt.plan);
    auto brute = brute_reward(st, ctx, bound, gamma, beta, grid);
    CHECK(brute.evaluations == 729);
    CHECK(res.reward <= brute.reward + 1e-9 * std::abs(brute.reward));
    CHECK(window_qoe(res.plan, st, ctx) >= bound);
    CHECK_FALSE(res.fallback);
    if (res.reward >= brute.reward - 0.05 * std::abs(brute.reward)) ++hits;
  }
  CHECK(hits >= instances * 9 / 10);
}

TEST_CASE("GA properties") {
  auto m = fixture::flat_manifest(kThree, 2.0, 20);
  PlanContext ctx{&m, BufferConfig{20.0}, QoEWeights::linear()};
  std::mt19937_64 rng(5);
  auto st = fixture::state_at(m, 8.0, 8, 4);
  fixture::fill_random_delays(st, m, rng, 8e5, 2e6);
  const std::vector<double> grid{0.0, 0.5, 1.0, 2.0, 4.0};
  auto opt = max_qoe(st, ctx);
  GAConfig ga;
  ga.seed = 11;

  SUBCASE("deterministic for a seed") {
    auto a = ga_search(st, ctx, qoe_bound(opt.value, 0.9), 1.0, 1e-5, grid, ga, opt.plan);
    auto b = ga_search(st, ctx, qoe_bound(opt.value, 0.9), 1.0, 1e-5, grid, ga, opt.plan);
    CHECK(a.plan == b.plan);
    CHECK(a.reward == b.reward);
    CHECK(a.evaluations == b.evaluations);
  }

  SUBCASE("l = 1 keeps the full optimum") {
    auto r = ga_search(st, ctx, qoe_bound(opt.value, 1.0), 1.0, 1e-5, grid, ga, opt.plan);
    CHECK(r.score.qoe >= opt.value);
  }

  SUBCASE("zero wastage weight still returns a feasible plan") {
    auto r = ga_search(st, ctx, qoe_bound(opt.value, 0.9), 1.0, 0.0, grid, ga, opt.plan);
    CHECK(r.score.qoe >= qoe_bound(opt.value, 0.9));
    CHECK(r.reward == doctest::Approx(r.score.qoe));
  }

  SUBCASE("unreachable bound falls back") {
    auto r = ga_search(st, ctx, opt.value + 1e6, 1.0, 1e-5, grid, ga, opt.plan);
    CHECK(r.fallback);
    CHECK(r.plan == opt.plan);
  }

  SUBCASE("argument checks") {
    CHECK_THROWS_AS(ga_search(st, ctx, 0.0, 0.0, 1e-5, grid, ga, opt.plan), InvalidArgument);
    CHECK_THROWS_AS(ga_search(st, ctx, 0.0, 1.0, 1e-5, {}, ga, opt.plan), InvalidArgument);
    DownloadPlan short_plan{{0}, {0.0}};
    CHECK_THROWS_AS(ga_search(st, ctx, 0.0, 1.0, 1e-5, grid, ga, short_plan), InvalidArgument);
    GAConfig bad = ga;
    bad.size_pop = 1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = ga;
    bad.prob_mut = 2.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  }
}

}

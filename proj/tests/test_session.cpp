#include <doctest.h>

#include <random>

#include "beabr/controller.hpp"
#include "beabr/departure.hpp"
#include "beabr/error.hpp"
#include "beabr/predictors.hpp"
#include "beabr/session.hpp"
#include "beabr/trace.hpp"
#include "fixtures.hpp"

using namespace beabr;

namespace {

class FixedLevel : public Controller {
 public:
  explicit FixedLevel(std::size_t level, double wait = 0.0) : level_(level), wait_(wait) {}
  std::string name() const override { return "fixed"; }
  std::size_t horizon() const override { return 0; }
  Decision decide(const ControllerState&, const PlanContext&) override {
    Decision d;
    d.level = level_;
    d.wait_s = wait_;
    return d;
  }

 private:
  std::size_t level_;
  double wait_;
};

}  // namespace

TEST_SUITE("session") {

TEST_CASE("timing on a constant link") {
  auto m = fixture::flat_manifest(BitrateLadder::sd(), 2.0, 20);
  NetworkTrace trace({{0.0, 1e6}});
  FixedLevel ctl(0);
  auto r = run_session(m, trace, ctl, nullptr, DepartureTarget::at_ratio(0.5, m.duration()));
  CHECK(r.departure_ratio == doctest::Approx(0.5));
  CHECK(r.departure_s == doctest::Approx(0.0875 + 20.0));
  CHECK(r.startup_delay_s == doctest::Approx(0.0875));
  CHECK(r.rebuffer_s == 0.0);
  CHECK(r.ledger.viewed == 10);
  // Buffer holds l_max minus at most one chunk plus what is in flight.
  CHECK(r.wastage_bytes > 0);
  CHECK(r.mean_quality_kbps == 350.0);
  CHECK(r.mean_switch_kbps == 0.0);
}

TEST_CASE("watching to the end wastes nothing") {
  auto m = synth_manifest(BitrateLadder::sd(), 30, 2.0, 2);
  NetworkTrace trace({{0.0, 6e5}});
  BbaController bba;
  auto r = run_session(m, trace, bba, nullptr, DepartureTarget::watch_all());
  CHECK(r.wastage_bytes == 0);
  CHECK(r.fetched_bytes == r.consumed_bytes);
  CHECK(r.ledger.viewed == 30);
  CHECK(r.departure_ratio == doctest::Approx(1.0));
  CHECK(r.bdv_at_departure == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("byte conservation with random departures") {
  auto sd = BitrateLadder::sd();
  auto m = synth_manifest(sd, 40, 2.0, 7);
  std::mt19937_64 rng(21);
  auto f1 = DepartureModel::parse("f1");
  TraceSpec spec;
  spec.kind = TraceKind::kAr1;
  spec.mean_Bps = 5e5;
  spec.cv = 0.4;
  for (int n = 0; n < 30; ++n) {
    auto trace = synth_trace(spec, 100 + n);
    double r = sample_departure_ratio(f1, rng);
    DepartureTarget dep = n % 3 == 0 ? DepartureTarget::at_time(1.0 + 2.3 * n)
                                     : DepartureTarget::at_ratio(r, m.duration());
    SessionResult res;
    if (n % 2 == 0) {
      BbaController bba;
      res = run_session(m, trace, bba, nullptr, dep);
    } else {
      MpcController mpc(3);
      HmPredictor hm;
      res = run_session(m, trace, mpc, &hm, dep);
    }
    CHECK(res.fetched_bytes == res.consumed_bytes + res.wastage_bytes);
    // Integer rounding costs at most a byte per buffered chunk.
    CHECK(std::abs(static_cast<double>(res.wastage_bytes) - res.bdv_at_departure) <= 12.0);
    if (n % 3 == 0) CHECK(res.departure_s == doctest::Approx(1.0 + 2.3 * n));
  }
}

TEST_CASE("departure while a chunk downloads") {
  auto m = fixture::flat_manifest(BitrateLadder::sd(), 2.0, 20);
  NetworkTrace trace({{0.0, 1e5}});
  FixedLevel ctl(4);
  // A top chunk is 750000 bytes: 7.5 s each on this link.
  auto r = run_session(m, trace, ctl, nullptr, DepartureTarget::at_time(10.0));
  REQUIRE(r.chunks.size() == 2);
  CHECK_FALSE(r.chunks.back().completed);
  CHECK(r.fetched_bytes == 750000 + 250000);
  CHECK(r.consumed_bytes == 750000);
  CHECK(r.wastage_bytes == 250000);
  CHECK(r.ledger.downloaded() == 1);
}

TEST_CASE("determinism") {
  auto m = synth_manifest(BitrateLadder::sd(), 30, 2.0, 4);
  TraceSpec spec;
  spec.kind = TraceKind::kRegime;
  auto trace = synth_trace(spec, 8);
  auto run = [&] {
    PlannerConfig cfg;
    BeAbrController be(cfg, default_beta(m));
    HmPredictor hm;
    return run_session(m, trace, be, &hm, DepartureTarget::at_ratio(0.7, m.duration()));
  };
  auto a = run(), b = run();
  CHECK(a.qoe_lin == b.qoe_lin);
  CHECK(a.wastage_bytes == b.wastage_bytes);
  CHECK(a.mean_bdv_bytes == b.mean_bdv_bytes);
  REQUIRE(a.chunks.size() == b.chunks.size());
  for (std::size_t i = 0; i < a.chunks.size(); ++i) {
    CHECK(a.chunks[i].level == b.chunks[i].level);
    CHECK(a.chunks[i].wait_s == b.chunks[i].wait_s);
  }
}

TEST_CASE("errors") {
  auto m = fixture::flat_manifest(BitrateLadder::sd(), 2.0, 20);
  NetworkTrace trace({{0.0, 1e6}});
  MpcController mpc(3);
  CHECK_THROWS_AS(run_session(m, trace, mpc, nullptr, DepartureTarget::watch_all()), ConfigError);
  FixedLevel bad(9);
  CHECK_THROWS_WITH(run_session(m, trace, bad, nullptr, DepartureTarget::watch_all()),
                    doctest::Contains("chunk 0"));
  NetworkTrace short_trace({{0.0, 1e5}, {1.0, 1e5}}, false);
  FixedLevel top(4);
  CHECK_THROWS_AS(run_session(m, short_trace, top, nullptr, DepartureTarget::watch_all()), Error);
  SessionConfig cfg;
  cfg.buffer.l_max_s = 1.0;
  CHECK_THROWS_AS(run_session(m, trace, top, nullptr, DepartureTarget::watch_all(), cfg),
                  InvalidArgument);
  CHECK_THROWS_AS(DepartureTarget::at_time(0.0), InvalidArgument);
  CHECK_THROWS_AS(DepartureTarget::at_ratio(1.5, 10.0), InvalidArgument);
}

}

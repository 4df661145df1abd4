#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "beabr/datagen.hpp"
#include "beabr/error.hpp"
#include "beabr/t3p_training.hpp"

using namespace beabr;

namespace {

T3pConfig tiny_config() {
  T3pConfig c;
  c.history = 4;
  c.state_width = 8;
  c.d_model = 16;
  c.heads = 2;
  c.ff_width = 32;
  c.decoupler_width = 16;
  c.head_width = 16;
  return c;
}

std::vector<DelayExample> ar1_data(std::size_t windows, std::uint64_t seed) {
  DatasetGenConfig g;
  g.windows = windows;
  g.history = 4;
  g.chunks_per_session = 100;
  g.seed = seed;
  g.trace.kind = TraceKind::kAr1;
  g.trace.mean_Bps = 6e5;
  g.trace.rho = 0.9;
  g.trace.cv = 0.3;
  g.trace.duration_s = 600;
  return generate_delay_dataset(g);
}

}  // namespace

TEST_SUITE("t3p_training") {

TEST_CASE("learning-rate schedule") {
  CHECK(lr_schedule(5000, 64, 5000) == doctest::Approx(1.768e-3).epsilon(1e-3));
  double peak = lr_schedule(5000, 64, 5000);
  CHECK(lr_schedule(2500, 64, 5000) == doctest::Approx(peak / 2.0));
  CHECK(lr_schedule(20000, 64, 5000) == doctest::Approx(peak / 2.0));
  CHECK(lr_schedule(1, 64, 5000) < lr_schedule(2, 64, 5000));
  CHECK_THROWS_AS(lr_schedule(0, 64, 5000), InvalidArgument);
}

TEST_CASE("error metrics") {
  std::vector<double> y{1, 2, 3};
  auto same = eval_metrics(y, y);
  CHECK(same.mae == 0.0);
  CHECK(same.rmse == 0.0);
  CHECK(same.mape == 0.0);

  auto one = eval_metrics(std::vector<double>{2}, std::vector<double>{1});
  CHECK(one.mae == 1.0);
  CHECK(one.rmse == 1.0);
  CHECK(one.mape == doctest::Approx(100.0));

  auto two = eval_metrics(std::vector<double>{1, 3}, std::vector<double>{2, 2});
  CHECK(two.mae == 1.0);
  CHECK(two.rmse == 1.0);
  CHECK(two.mape == doctest::Approx(50.0));

  auto zero = eval_metrics(std::vector<double>{1, 3}, std::vector<double>{0, 2});
  CHECK(zero.mape_excluded == 1);
  CHECK(zero.mape == doctest::Approx(50.0));
  CHECK_THROWS_AS(eval_metrics(std::vector<double>{1}, std::vector<double>{}), InvalidArgument);
}

TEST_CASE("dataset generation, splitting and CSV") {
  auto data = ar1_data(500, 3);
  REQUIRE(data.size() == 500);
  for (const auto& e : data) {
    CHECK(e.window.samples.size() == 4);
    CHECK(e.target_s > 0.0);
    CHECK_NOTHROW(e.window.validate());
  }
  CHECK(ar1_data(50, 3).front().target_s == data.front().target_s);

  auto split = split_dataset(data, 9);
  CHECK(split.train.size() == 400);
  CHECK(split.validation.size() == 50);
  CHECK(split.test.size() == 50);
  auto again = split_dataset(data, 9);
  CHECK(again.test.front().target_s == split.test.front().target_s);

  auto dir = std::filesystem::temp_directory_path() / "beabr_ds_test";
  std::filesystem::create_directories(dir);
  save_dataset(dir / "d.csv", data);
  auto back = load_dataset(dir / "d.csv");
  REQUIRE(back.size() == data.size());
  for (std::size_t i = 0; i < data.size(); i += 37) {
    CHECK(back[i].target_s == data[i].target_s);
    CHECK(back[i].d_star_bytes == data[i].d_star_bytes);
    CHECK(back[i].window.now_s == data[i].window.now_s);
    CHECK(back[i].window.samples[2].throughput_Bps == data[i].window.samples[2].throughput_Bps);
  }
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(parse_dataset("a,b\n1,2\n"), ParseError);
  CHECK_THROWS_AS(
      parse_dataset("chunk_bytes,throughput_Bps,sample_time_s,target_delay_s\n1,2,3,\n"),
      ParseError);
}

TEST_CASE("a perfect model does not move") {
  auto data = ar1_data(64, 4);
  T3pModel m(tiny_config(), 2);
  m.set_scaling(fit_scaling(data));
  std::vector<HistoryWindow> w;
  std::vector<double> d;
  for (const auto& e : data) {
    w.push_back(e.window);
    d.push_back(e.d_star_bytes);
  }
  auto batch = m.make_batch(w, d);
  T3pCache cache;
  batch.target = m.forward_batch(batch, cache);
  auto before = m.params();
  AdamState adam(m.config(), 0.9, 0.98, 1e-9);
  TrainConfig tc;
  CHECK(train_step(m, adam, batch, 1, tc) == 0.0);
  bool same = true;
  auto after = m.params();
  std::vector<const Matrix*> a, b;
  before.visit([&](const std::string&, const Matrix& t) { a.push_back(&t); });
  after.visit([&](const std::string&, const Matrix& t) { b.push_back(&t); });
  for (std::size_t i = 0; i < a.size(); ++i) same = same && (*a[i] == *b[i]);
  CHECK(same);
}

TEST_CASE("non-finite gradients are reported") {
  auto data = ar1_data(16, 4);
  T3pModel m(tiny_config(), 2);
  m.set_scaling(fit_scaling(data));
  std::vector<HistoryWindow> w;
  std::vector<double> d, y;
  for (const auto& e : data) {
    w.push_back(e.window);
    d.push_back(e.d_star_bytes);
    y.push_back(e.target_s);
  }
  auto batch = m.make_batch(w, d, y);
  batch.target(0) = std::nan("");
  AdamState adam(m.config(), 0.9, 0.98, 1e-9);
  CHECK_THROWS_AS(train_step(m, adam, batch, 1, TrainConfig{}), NumericError);
}

TEST_CASE("training halves the validation error") {
  auto split = split_dataset(ar1_data(6000, 5), 1);
  T3pModel m(tiny_config(), 8);
  TrainConfig tc;
  tc.batch_size = 64;
  tc.warmup_steps = 400;
  tc.max_steps = 2000;
  tc.patience = 50;
  auto report = train_model(m, split.train, split.validation, tc);
  CHECK(report.steps == 2000);
  CHECK(report.best_val_mse <= 0.5 * report.initial_val_mse);
  CHECK(m.scaling().log_residual_var ==
        doctest::Approx(report.best_val_mse * m.scaling().log_target_std *
                        m.scaling().log_target_std));

  SUBCASE("fixed seeds reproduce the run") {
    T3pModel again(tiny_config(), 8);
    tc.max_steps = 300;
    T3pModel first(tiny_config(), 8);
    train_model(first, split.train, split.validation, tc);
    train_model(again, split.train, split.validation, tc);
    CHECK(first == again);
  }
}

}

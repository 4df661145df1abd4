#include "beabr/t3p_training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "beabr/error.hpp"

namespace beabr {
namespace {

constexpr const char* kDatasetHeader = "chunk_bytes,throughput_Bps,sample_time_s,target_delay_s";
constexpr std::size_t kEvalBatch = 1024;

// Row subset of a prebuilt normalized batch.
T3pBatch gather(const T3pBatch& all, std::span<const std::size_t> idx, std::size_t T) {
  T3pBatch b;
  b.size = idx.size();
  const auto t = static_cast<Eigen::Index>(T);
  b.features.resize(static_cast<Eigen::Index>(idx.size()) * t, 2);
  b.deltas.resize(static_cast<Eigen::Index>(idx.size()) * t);
  b.d_star.resize(static_cast<Eigen::Index>(idx.size()));
  b.target.resize(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    auto src = static_cast<Eigen::Index>(idx[i]);
    auto dst = static_cast<Eigen::Index>(i);
    b.features.middleRows(dst * t, t) = all.features.middleRows(src * t, t);
    b.deltas.segment(dst * t, t) = all.deltas.segment(src * t, t);
    b.d_star(dst) = all.d_star(src);
    b.target(dst) = all.target(src);
  }
  return b;
}

T3pBatch full_batch(const T3pModel& model, std::span<const DelayExample> examples) {
  std::vector<HistoryWindow> windows;
  std::vector<double> d_star, target;
  windows.reserve(examples.size());
  for (const auto& e : examples) {
    windows.push_back(e.window);
    d_star.push_back(e.d_star_bytes);
    target.push_back(e.target_s);
  }
  return model.make_batch(windows, d_star, target);
}

double mean_sq_error(const T3pModel& model, const T3pBatch& all) {
  if (all.size == 0) return 0.0;
  double sum = 0.0;
  std::vector<std::size_t> idx;
  T3pCache cache;
  for (std::size_t start = 0; start < all.size; start += kEvalBatch) {
    std::size_t end = std::min(all.size, start + kEvalBatch);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), start);
    auto b = gather(all, idx, model.config().history);
    Vector out = model.forward_batch(b, cache);
    sum += (out - b.target).squaredNorm();
  }
  return sum / static_cast<double>(all.size);
}

double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v, double mean) {
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  double sd = std::sqrt(acc / static_cast<double>(v.size()));
  return sd > 1e-12 ? sd : 1.0;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::optional<double> parse_field(std::string s, std::size_t line_no) {
  s.erase(0, s.find_first_not_of(" \t\r"));
  s.erase(s.find_last_not_of(" \t\r") + 1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError("dataset line " + std::to_string(line_no) + ": bad number '" + s + "'");
  }
  return v;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (warmup_steps == 0) throw ConfigError("warmup_steps must be at least 1");
  if (patience == 0) throw ConfigError("patience must be at least 1");
  if (max_epochs == 0) throw ConfigError("max_epochs must be at least 1");
}

double lr_schedule(std::size_t step, std::size_t d_model, std::size_t warmup_steps) {
  if (step == 0) throw InvalidArgument("lr_schedule step starts at 1");
  auto s = static_cast<double>(step);
  auto w = static_cast<double>(warmup_steps);
  return std::pow(static_cast<double>(d_model), -0.5) *
         std::min(std::pow(s, -0.5), s * std::pow(w, -1.5));
}

DatasetSplit split_dataset(std::vector<DelayExample> examples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::shuffle(examples.begin(), examples.end(), rng);
  const std::size_t n = examples.size();
  const std::size_t n_train = n * 8 / 10;
  const std::size_t n_val = n / 10;
  DatasetSplit split;
  auto it = std::make_move_iterator(examples.begin());
  split.train.assign(it, it + static_cast<std::ptrdiff_t>(n_train));
  split.validation.assign(it + static_cast<std::ptrdiff_t>(n_train),
                          it + static_cast<std::ptrdiff_t>(n_train + n_val));
  split.test.assign(it + static_cast<std::ptrdiff_t>(n_train + n_val),
                    std::make_move_iterator(examples.end()));
  return split;
}

FeatureScaling fit_scaling(std::span<const DelayExample> train) {
  if (train.empty()) throw InvalidArgument("cannot fit scaling on an empty training set");
  std::vector<double> lb, lt, dl, ly;
  for (const auto& e : train) {
    for (const auto& s : e.window.samples) {
      lb.push_back(std::log(s.chunk_bytes));
      lt.push_back(std::log(s.throughput_Bps));
      dl.push_back(e.window.now_s - s.sample_time_s);
    }
    lb.push_back(std::log(e.d_star_bytes));
    ly.push_back(std::log(e.target_s));
  }
  FeatureScaling f;
  f.log_bytes_mean = mean_of(lb);
  f.log_bytes_std = std_of(lb, f.log_bytes_mean);
  f.log_tput_mean = mean_of(lt);
  f.log_tput_std = std_of(lt, f.log_tput_mean);
  double dm = mean_of(dl);
  f.delta_scale = dm > 1e-12 ? dm : 1.0;
  f.log_target_mean = mean_of(ly);
  f.log_target_std = std_of(ly, f.log_target_mean);
  return f;
}

AdamState::AdamState(const T3pConfig& cfg, double beta1, double beta2, double eps)
    : m_(T3pParams::zeros_like(cfg)), v_(T3pParams::zeros_like(cfg)),
      beta1_(beta1), beta2_(beta2), eps_(eps) {}

void AdamState::apply(T3pParams& params, const T3pParams& grad, double lr, std::size_t t) {
  std::vector<Matrix*> p, m, v;
  std::vector<const Matrix*> g;
  params.visit([&](const std::string&, Matrix& x) { p.push_back(&x); });
  m_.visit([&](const std::string&, Matrix& x) { m.push_back(&x); });
  v_.visit([&](const std::string&, Matrix& x) { v.push_back(&x); });
  grad.visit([&](const std::string&, const Matrix& x) { g.push_back(&x); });
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t));
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i]->array() = beta1_ * m[i]->array() + (1.0 - beta1_) * g[i]->array();
    v[i]->array() = beta2_ * v[i]->array() + (1.0 - beta2_) * g[i]->array().square();
    p[i]->array() -= lr * (m[i]->array() / c1) / ((v[i]->array() / c2).sqrt() + eps_);
  }
}

double train_step(T3pModel& model, AdamState& adam, const T3pBatch& batch, std::size_t step,
                  const TrainConfig& config) {
  if (batch.size == 0) throw InvalidArgument("empty training batch");
  T3pCache cache;
  Vector out = model.forward_batch(batch, cache);
  Vector err = out - batch.target;
  const double n = static_cast<double>(batch.size);
  double loss = err.squaredNorm() / n;
  if (!std::isfinite(loss)) throw NumericError("non-finite training loss");
  Vector dout = err * (2.0 / n);
  T3pParams grad = model.backward(batch, cache, dout);
  grad.visit([](const std::string& name, const Matrix& g) {
    if (!g.allFinite()) throw NumericError("non-finite gradient for " + name);
  });
  double lr = lr_schedule(step, model.config().d_model, config.warmup_steps);
  adam.apply(model.params(), grad, lr, step);
  return loss;
}

double evaluate_mse(const T3pModel& model, std::span<const DelayExample> examples) {
  if (examples.empty()) return 0.0;
  return mean_sq_error(model, full_batch(model, examples));
}

std::vector<double> predict_seconds(const T3pModel& model,
                                    std::span<const DelayExample> examples) {
  std::vector<double> out;
  out.reserve(examples.size());
  T3pCache cache;
  for (std::size_t start = 0; start < examples.size(); start += kEvalBatch) {
    auto chunk = examples.subspan(start, std::min(kEvalBatch, examples.size() - start));
    Vector y = model.forward_batch(full_batch(model, chunk), cache);
    for (Eigen::Index i = 0; i < y.size(); ++i) out.push_back(model.to_seconds(y(i)));
  }
  return out;
}

TrainReport train_model(T3pModel& model, std::span<const DelayExample> train,
                        std::span<const DelayExample> validation, const TrainConfig& config,
                        const std::function<void(const EpochLog&)>& on_epoch,
                        bool keep_scaling) {
  config.validate();
  if (train.empty()) throw InvalidArgument("empty training set");
  if (!keep_scaling) model.set_scaling(fit_scaling(train));
  const std::size_t T = model.config().history;
  const T3pBatch all_train = full_batch(model, train);
  const T3pBatch all_val = full_batch(model, validation.empty() ? train : validation);

  TrainReport report;
  report.initial_val_mse = mean_sq_error(model, all_val);
  report.best_val_mse = report.initial_val_mse;
  T3pParams best = model.params();
  AdamState adam(model.config(), config.adam_beta1, config.adam_beta2, config.adam_eps);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(all_train.size);
  std::iota(order.begin(), order.end(), 0);
  std::size_t since_best = 0;
  std::size_t step = 0;
  bool capped = false;

  for (std::size_t epoch = 1; epoch <= config.max_epochs && !capped; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      std::size_t len = std::min(config.batch_size, order.size() - start);
      auto batch = gather(all_train, std::span(order).subspan(start, len), T);
      loss_sum += train_step(model, adam, batch, ++step, config) * static_cast<double>(len);
      seen += len;
      if (config.max_steps != 0 && step >= config.max_steps) {
        capped = true;
        break;
      }
    }
    EpochLog log{epoch, step, loss_sum / static_cast<double>(seen), mean_sq_error(model, all_val)};
    report.epochs.push_back(log);
    if (on_epoch) on_epoch(log);
    if (log.val_mse < report.best_val_mse) {
      report.best_val_mse = log.val_mse;
      report.best_epoch = epoch;
      best = model.params();
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  model.params() = best;
  auto scaling = model.scaling();
  scaling.log_residual_var = report.best_val_mse * scaling.log_target_std * scaling.log_target_std;
  model.set_scaling(scaling);
  report.steps = step;
  return report;
}

ErrorMetrics eval_metrics(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size() || predictions.empty()) {
    throw InvalidArgument("metrics need equal, nonzero lengths");
  }
  ErrorMetrics m;
  m.count = predictions.size();
  double abs_sum = 0.0, sq_sum = 0.0, pct_sum = 0.0;
  std::size_t pct_n = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    double e = predictions[i] - targets[i];
    abs_sum += std::abs(e);
    sq_sum += e * e;
    if (targets[i] > 0.0) {
      pct_sum += std::abs(e) / targets[i];
      ++pct_n;
    } else {
      ++m.mape_excluded;
    }
  }
  const double n = static_cast<double>(m.count);
  m.mae = abs_sum / n;
  m.rmse = std::sqrt(sq_sum / n);
  m.mape = pct_n > 0 ? 100.0 * pct_sum / static_cast<double>(pct_n) : 0.0;
  return m;
}

void save_dataset(const std::filesystem::path& path, std::span<const DelayExample> examples) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write dataset " + path.string());
  out.precision(17);
  out << kDatasetHeader << '\n';
  for (const auto& e : examples) {
    for (const auto& s : e.window.samples) {
      out << s.chunk_bytes << ',' << s.throughput_Bps << ',' << s.sample_time_s << ",\n";
    }
    out << e.d_star_bytes << ",," << e.window.now_s << ',' << e.target_s << '\n';
  }
  if (!out) throw ParseError("failed writing dataset " + path.string());
}

std::vector<DelayExample> parse_dataset(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("empty dataset");
  ++line_no;
  {
    std::string header;
    for (char c : line) {
      if (c != ' ' && c != '\r') header.push_back(c);
    }
    if (header != kDatasetHeader) throw ParseError("unexpected dataset header: " + line);
  }
  std::vector<DelayExample> out;
  DelayExample cur;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto f = split_csv(line);
    if (f.size() != 4) {
      throw ParseError("dataset line " + std::to_string(line_no) + ": expected 4 fields");
    }
    auto bytes = parse_field(f[0], line_no);
    auto tput = parse_field(f[1], line_no);
    auto time = parse_field(f[2], line_no);
    auto target = parse_field(f[3], line_no);
    if (!bytes || !time) {
      throw ParseError("dataset line " + std::to_string(line_no) + ": missing size or time");
    }
    if (target) {
      if (tput) {
        throw ParseError("dataset line " + std::to_string(line_no) +
                         ": query rows leave throughput empty");
      }
      cur.d_star_bytes = *bytes;
      cur.window.now_s = *time;
      cur.target_s = *target;
      try {
        cur.window.validate();
      } catch (const InvalidArgument& e) {
        throw ParseError("dataset line " + std::to_string(line_no) + ": " + e.what());
      }
      out.push_back(std::move(cur));
      cur = DelayExample{};
    } else {
      if (!tput) {
        throw ParseError("dataset line " + std::to_string(line_no) + ": sample row needs throughput");
      }
      cur.window.samples.push_back({*bytes, *tput, *time});
    }
  }
  if (!cur.window.samples.empty()) throw ParseError("dataset ends inside a window");
  return out;
}

std::vector<DelayExample> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_dataset(ss.str());
}

}  // namespace beabr

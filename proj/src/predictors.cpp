#include "beabr/predictors.hpp"

#include <algorithm>
#include <cmath>

#include "beabr/error.hpp"

namespace beabr {

double harmonic_mean_throughput(std::span<const double> throughputs_Bps) {
  if (throughputs_Bps.empty()) throw InvalidArgument("harmonic mean of no samples");
  std::size_t n = std::min(kHarmonicWindow, throughputs_Bps.size());
  double inv = 0.0;
  for (double b : throughputs_Bps.last(n)) {
    if (!(b > 0.0)) throw InvalidArgument("throughput samples must be positive");
    inv += 1.0 / b;
  }
  return static_cast<double>(n) / inv;
}

namespace {

std::vector<double> window_throughputs(const HistoryWindow& window) {
  std::vector<double> b;
  b.reserve(window.samples.size());
  for (const auto& s : window.samples) b.push_back(s.throughput_Bps);
  return b;
}

}  // namespace

double hm_predict(const HistoryWindow& window, double d_star_bytes) {
  if (!(d_star_bytes > 0.0)) throw InvalidArgument("requested chunk size must be positive");
  return d_star_bytes / harmonic_mean_throughput(window_throughputs(window));
}

double robust_hm_predict(const HistoryWindow& window, double d_star_bytes,
                         std::span<const double> past_errors) {
  double t = hm_predict(window, d_star_bytes);
  if (past_errors.size() < kHarmonicWindow) return t;
  auto recent = past_errors.last(kHarmonicWindow);
  double max_err = *std::max_element(recent.begin(), recent.end());
  return t * (1.0 + std::max(0.0, max_err));
}

double DownloadRecord::throughput_Bps() const {
  if (!(download_s > 0.0)) throw InvalidArgument("download time must be positive for throughput");
  return static_cast<double>(bytes) / download_s;
}

HistorySample DownloadRecord::sample() const {
  return {static_cast<double>(bytes), throughput_Bps(), sample_midpoint(start_s, download_s)};
}

DelayPredictor::DelayPredictor(double cold_start_Bps) : cold_start_Bps_(cold_start_Bps) {
  if (!(cold_start_Bps > 0.0)) throw InvalidArgument("cold-start throughput must be positive");
}

void DelayPredictor::reset() { history_.clear(); }

void DelayPredictor::observe(const DownloadRecord& record) {
  if (record.bytes <= 0 || !(record.download_s > 0.0)) {
    throw InvalidArgument("download record needs positive bytes and duration");
  }
  history_.push_back(record);
}

std::vector<double> DelayPredictor::throughputs() const {
  std::vector<double> out;
  out.reserve(history_.size());
  for (const auto& r : history_) out.push_back(r.throughput_Bps());
  return out;
}

HistoryWindow DelayPredictor::window(std::size_t count, double now_s) const {
  HistoryWindow w;
  w.now_s = now_s;
  std::size_t n = std::min(count, history_.size());
  for (std::size_t i = history_.size() - n; i < history_.size(); ++i) {
    w.samples.push_back(history_[i].sample());
  }
  return w;
}

namespace {

DelayMatrix fill_by_throughput(const VideoManifest& manifest, std::size_t first_chunk,
                               std::size_t rows, double throughput_Bps) {
  DelayMatrix m(first_chunk, rows, manifest.ladder().size());
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < m.levels(); ++j) {
      m.at(i, j) = static_cast<double>(manifest.size(first_chunk + i, j)) / throughput_Bps;
    }
  }
  return m;
}

void check_rows(const VideoManifest& manifest, std::size_t first_chunk, std::size_t rows) {
  if (rows == 0 || first_chunk + rows > manifest.chunk_count()) {
    throw InvalidArgument("prediction window outside the video");
  }
}

}  // namespace

DelayMatrix HmPredictor::predict(const VideoManifest& manifest, std::size_t first_chunk,
                                 std::size_t rows, double) {
  check_rows(manifest, first_chunk, rows);
  double hm = history_.empty() ? cold_start_Bps_ : harmonic_mean_throughput(throughputs());
  return fill_by_throughput(manifest, first_chunk, rows, hm);
}

void RobustHmPredictor::reset() {
  DelayPredictor::reset();
  errors_.clear();
}

void RobustHmPredictor::observe(const DownloadRecord& record) {
  double predicted = history_.empty() ? cold_start_Bps_ : harmonic_mean_throughput(throughputs());
  double actual = record.throughput_Bps();
  DelayPredictor::observe(record);
  errors_.push_back(std::abs(predicted - actual) / actual);
}

DelayMatrix RobustHmPredictor::predict(const VideoManifest& manifest, std::size_t first_chunk,
                                       std::size_t rows, double) {
  check_rows(manifest, first_chunk, rows);
  double hm = history_.empty() ? cold_start_Bps_ : harmonic_mean_throughput(throughputs());
  if (errors_.size() >= kHarmonicWindow) {
    auto recent = std::span(errors_).last(kHarmonicWindow);
    hm /= 1.0 + *std::max_element(recent.begin(), recent.end());
  }
  return fill_by_throughput(manifest, first_chunk, rows, hm);
}

T3pPredictor::T3pPredictor(std::shared_ptr<const T3pModel> model, double cold_start_Bps)
    : DelayPredictor(cold_start_Bps), model_(std::move(model)) {
  if (!model_) throw InvalidArgument("T3P predictor needs a model");
}

DelayMatrix T3pPredictor::predict(const VideoManifest& manifest, std::size_t first_chunk,
                                  std::size_t rows, double now_s) {
  check_rows(manifest, first_chunk, rows);
  const std::size_t T = model_->config().history;
  auto hm_fallback = [&] {
    ++fallbacks_;
    double hm = history_.empty() ? cold_start_Bps_ : harmonic_mean_throughput(throughputs());
    return fill_by_throughput(manifest, first_chunk, rows, hm);
  };
  if (history_.size() < T) return hm_fallback();

  const std::size_t levels = manifest.ladder().size();
  HistoryWindow base = window(T, now_s);
  std::vector<HistoryWindow> windows;
  std::vector<double> d_star;
  windows.reserve(rows * levels);
  for (std::size_t i = 0; i < rows; ++i) {
    HistoryWindow w = base;
    w.now_s = now_s + static_cast<double>(i) * manifest.chunk_duration();
    for (std::size_t j = 0; j < levels; ++j) {
      windows.push_back(w);
      d_star.push_back(static_cast<double>(manifest.size(first_chunk + i, j)));
    }
  }
  try {
    base.validate();
    T3pCache cache;
    Vector out = model_->forward_batch(model_->make_batch(windows, d_star), cache);
    DelayMatrix m(first_chunk, rows, levels);
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < levels; ++j) {
        double s = model_->to_seconds(out(static_cast<Eigen::Index>(i * levels + j)));
        if (!std::isfinite(s)) throw NumericError("non-finite delay prediction");
        m.at(i, j) = s;
      }
    }
    return m;
  } catch (const NumericError&) {
    return hm_fallback();
  } catch (const InvalidArgument&) {
    return hm_fallback();
  }
}

}  // namespace beabr

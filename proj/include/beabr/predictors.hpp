#pragma once

#include <cstddef>
#include <deque>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "beabr/media_model.hpp"
#include "beabr/planning_types.hpp"
#include "beabr/t3p_model.hpp"

namespace beabr {

/// Number of recent throughput samples the harmonic-mean estimators use.
constexpr std::size_t kHarmonicWindow = 5;

/// d* / HM(b) over the last five samples of the window.
double hm_predict(const HistoryWindow& window, double d_star_bytes);

/// Harmonic mean of the last `kHarmonicWindow` throughputs.
double harmonic_mean_throughput(std::span<const double> throughputs_Bps);

/// hm_predict inflated by (1 + max of the last five relative errors). With
/// fewer than five recorded errors this is plain hm_predict.
double robust_hm_predict(const HistoryWindow& window, double d_star_bytes,
                         std::span<const double> past_errors);

/// One completed download as seen by the client.
struct DownloadRecord {
  std::size_t chunk_index = 0;
  std::size_t level = 0;
  Bytes bytes = 0;
  double start_s = 0.0;
  double download_s = 0.0;

  double throughput_Bps() const;
  HistorySample sample() const;
};

/// Produces the delay matrix for the next planning window.
class DelayPredictor {
 public:
  /// `cold_start_Bps` stands in for the throughput before any download.
  explicit DelayPredictor(double cold_start_Bps = 125000.0);
  virtual ~DelayPredictor() = default;

  virtual std::string name() const = 0;
  virtual void reset();
  virtual void observe(const DownloadRecord& record);

  /// Delays for chunks first_chunk .. first_chunk+rows-1 at every ladder
  /// level, with the decision taken at `now_s`.
  virtual DelayMatrix predict(const VideoManifest& manifest, std::size_t first_chunk,
                              std::size_t rows, double now_s) = 0;

  const std::vector<DownloadRecord>& history() const { return history_; }
  std::vector<double> throughputs() const;
  /// Most recent `count` samples ending at `now_s`.
  HistoryWindow window(std::size_t count, double now_s) const;

 protected:
  double cold_start_Bps_;
  std::vector<DownloadRecord> history_;
};

class HmPredictor : public DelayPredictor {
 public:
  using DelayPredictor::DelayPredictor;
  std::string name() const override { return "hm"; }
  DelayMatrix predict(const VideoManifest& manifest, std::size_t first_chunk, std::size_t rows,
                      double now_s) override;
};

/// Tracks its own throughput-prediction errors to discount the harmonic mean.
class RobustHmPredictor : public DelayPredictor {
 public:
  using DelayPredictor::DelayPredictor;
  std::string name() const override { return "robust-hm"; }
  void reset() override;
  void observe(const DownloadRecord& record) override;
  DelayMatrix predict(const VideoManifest& manifest, std::size_t first_chunk, std::size_t rows,
                      double now_s) override;
  std::span<const double> errors() const { return errors_; }

 private:
  std::vector<double> errors_;
};

/// T3P inference over the lookahead. Row i is predicted from the same history
/// with the decision time advanced by i chunk durations. Falls back to the
/// harmonic mean until T samples exist or when the model fails numerically.
class T3pPredictor : public DelayPredictor {
 public:
  T3pPredictor(std::shared_ptr<const T3pModel> model, double cold_start_Bps = 125000.0);
  std::string name() const override { return "t3p"; }
  DelayMatrix predict(const VideoManifest& manifest, std::size_t first_chunk, std::size_t rows,
                      double now_s) override;
  std::size_t fallbacks() const { return fallbacks_; }

 private:
  std::shared_ptr<const T3pModel> model_;
  std::size_t fallbacks_ = 0;
};

}  // namespace beabr

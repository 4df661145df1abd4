#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "beabr/t3p_model.hpp"

namespace beabr {

/// One supervised example: history, requested chunk size and the realized
/// download time for it.
struct DelayExample {
  HistoryWindow window;
  double d_star_bytes = 0.0;
  double target_s = 0.0;
};

struct TrainConfig {
  std::size_t batch_size = 512;
  std::size_t warmup_steps = 5000;
  std::size_t patience = 7;
  /// Hard cap on epochs; early stopping usually ends training first.
  std::size_t max_epochs = 200;
  /// Optional cap on optimizer steps (0 = none).
  std::size_t max_steps = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.98;
  double adam_eps = 1e-9;
  std::uint64_t seed = 1;

  void validate() const;
};

/// d_model^-0.5 * min(step^-0.5, step * warmup^-1.5).
double lr_schedule(std::size_t step, std::size_t d_model, std::size_t warmup_steps);

struct DatasetSplit {
  std::vector<DelayExample> train, validation, test;
};

/// Seeded shuffle then 8:1:1.
DatasetSplit split_dataset(std::vector<DelayExample> examples, std::uint64_t seed);

/// z-score statistics of log sizes, log throughputs and log targets, plus the
/// mean time delta, all from `train`.
FeatureScaling fit_scaling(std::span<const DelayExample> train);

class AdamState {
 public:
  AdamState(const T3pConfig& cfg, double beta1, double beta2, double eps);

  /// Applies one update with learning rate `lr`; `t` is the 1-based step.
  void apply(T3pParams& params, const T3pParams& grad, double lr, std::size_t t);

 private:
  T3pParams m_, v_;
  double beta1_, beta2_, eps_;
};

/// Mean squared error in normalized log-delay space, with its gradient step.
/// Throws NumericError on non-finite loss or gradients.
double train_step(T3pModel& model, AdamState& adam, const T3pBatch& batch, std::size_t step,
                  const TrainConfig& config);

/// Mean squared error in normalized space over a set of examples.
double evaluate_mse(const T3pModel& model, std::span<const DelayExample> examples);

/// Predicted seconds for every example, batched.
std::vector<double> predict_seconds(const T3pModel& model, std::span<const DelayExample> examples);

struct EpochLog {
  std::size_t epoch = 0;
  std::size_t steps = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;
};

struct TrainReport {
  double initial_val_mse = 0.0;
  double best_val_mse = 0.0;
  std::size_t best_epoch = 0;
  std::size_t steps = 0;
  std::vector<EpochLog> epochs;
};

/// Fits scaling on `train` unless `keep_scaling`, then trains with early
/// stopping on validation MSE and restores the best parameters. The best
/// validation MSE becomes the model's log residual variance.
TrainReport train_model(T3pModel& model, std::span<const DelayExample> train,
                        std::span<const DelayExample> validation, const TrainConfig& config,
                        const std::function<void(const EpochLog&)>& on_epoch = {},
                        bool keep_scaling = false);

struct ErrorMetrics {
  double mae = 0.0;
  double rmse = 0.0;
  /// Percent. Computed over positive targets only.
  double mape = 0.0;
  std::size_t count = 0;
  std::size_t mape_excluded = 0;
};

ErrorMetrics eval_metrics(std::span<const double> predictions, std::span<const double> targets);

/// CSV with header chunk_bytes,throughput_Bps,sample_time_s,target_delay_s.
/// Each example is `history` sample rows (empty target) followed by one query
/// row: requested size, empty throughput, decision time, realized delay.
void save_dataset(const std::filesystem::path& path, std::span<const DelayExample> examples);
std::vector<DelayExample> load_dataset(const std::filesystem::path& path);
std::vector<DelayExample> parse_dataset(const std::string& text);

}  // namespace beabr

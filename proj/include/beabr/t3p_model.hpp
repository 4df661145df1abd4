#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace beabr {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// One historical throughput observation: the chunk that produced it, the
/// measured throughput and the midpoint of its download.
struct HistorySample {
  double chunk_bytes = 0.0;
  double throughput_Bps = 0.0;
  double sample_time_s = 0.0;
};

struct HistoryWindow {
  std::vector<HistorySample> samples;
  double now_s = 0.0;

  /// Throws InvalidArgument on non-positive sizes/throughputs, unordered
  /// sample times or `now` preceding the last sample.
  void validate() const;
};

/// Time a download is attributed to: t + D/2.
double sample_midpoint(double start_s, double download_s);

/// now - t_i for every sample, oldest first.
std::vector<double> time_deltas(const HistoryWindow& window);

struct T3pConfig {
  std::size_t history = 8;
  std::size_t state_width = 16;
  std::size_t d_model = 64;
  std::size_t heads = 4;
  std::size_t ff_width = 128;
  std::size_t decoupler_width = 16;
  std::size_t head_width = 32;

  void validate() const;
  bool operator==(const T3pConfig&) const = default;
};

/// Input/target normalization fitted on the training split. Sizes and
/// throughputs enter in log space; targets are log-seconds.
struct FeatureScaling {
  double log_bytes_mean = 0.0, log_bytes_std = 1.0;
  double log_tput_mean = 0.0, log_tput_std = 1.0;
  double delta_scale = 1.0;
  double log_target_mean = 0.0, log_target_std = 1.0;
  /// Residual variance of the log-delay fit. Shifts the median prediction
  /// to the lognormal mean, exp(mu + var / 2).
  double log_residual_var = 0.0;

  bool operator==(const FeatureScaling&) const = default;
};

/// All trainable tensors. Gradients use the same layout.
struct T3pParams {
  // Decoupling MLP, shared across history positions.
  Matrix dec_w1, dec_b1, dec_w2, dec_b2, dec_w3, dec_b3;
  // Encoder input projection.
  Matrix in_w, in_b;
  // Self-attention.
  Matrix att_wq, att_bq, att_wk, att_bk, att_wv, att_bv, att_wo, att_bo;
  Matrix ln1_g, ln1_b;
  Matrix ff_w1, ff_b1, ff_w2, ff_b2;
  Matrix ln2_g, ln2_b;
  // Time perception: key from the sampling interval, query from the states.
  Matrix time_wk, time_bk;
  Matrix query_w, query_b;
  // Prediction head.
  Matrix head_w1, head_b1, head_w2, head_b2, head_w3, head_b3;

  static T3pParams zeros_like(const T3pConfig& cfg);

  void visit(const std::function<void(const std::string&, Matrix&)>& fn);
  void visit(const std::function<void(const std::string&, const Matrix&)>& fn) const;
  std::size_t count() const;
};

/// A batch of examples in normalized model space.
struct T3pBatch {
  std::size_t size = 0;
  Matrix features;  // (size*T) x 2: log bytes, log throughput
  Vector deltas;    // size*T
  Vector d_star;    // size
  Vector target;    // size, normalized log-seconds (unused for inference)
};

/// Intermediate activations kept for the backward pass.
struct T3pCache {
  Matrix x, a1, r1, a2, r2, v;
  Matrix e0, q, k, v_att, probs, o, att;
  Matrix z1, n1_hat, n1, f1, rf, f2, z2, n2_hat, h;
  Vector ln1_inv_std, ln2_inv_std;
  Matrix keys, query_pre, query, phi, weights;
  Matrix h_star, u, g1, rg1, g2, rg2, out;
};

/// Transformer-based, time-aware transmission delay predictor.
///
/// history x_i = (d_i, b_i) -> shared MLP -> v_i -> input projection +
/// sinusoidal positions -> one encoder layer -> h_i. Sampling intervals give
/// keys tanh(w_k delta_i + b_k); the stacked states give a query
/// relu(V w_q + b_q). Softmax over q.k_i / sqrt(s) weights the h_i, and a
/// 32-32-1 head maps (d*, h*) to log-delay.
class T3pModel {
 public:
  T3pModel(const T3pConfig& config, std::uint64_t seed);

  const T3pConfig& config() const { return config_; }
  const FeatureScaling& scaling() const { return scaling_; }
  void set_scaling(const FeatureScaling& s) { scaling_ = s; }
  T3pParams& params() { return params_; }
  const T3pParams& params() const { return params_; }

  /// Predicted download time in seconds for `d_star_bytes` given the window.
  double forward(const HistoryWindow& window, double d_star_bytes) const;

  /// Softmax weights of the time-aware attention for one window.
  std::vector<double> attention_weights(const HistoryWindow& window, double d_star_bytes) const;

  /// Builds a normalized batch. Targets may be empty for inference.
  T3pBatch make_batch(std::span<const HistoryWindow> windows, std::span<const double> d_star,
                      std::span<const double> target_s = {}) const;

  /// Normalized log-delay output per batch row. Fills `cache` for backward.
  Vector forward_batch(const T3pBatch& batch, T3pCache& cache) const;

  /// Gradients of sum_b dout[b] * out[b] w.r.t. every parameter.
  T3pParams backward(const T3pBatch& batch, const T3pCache& cache, const Vector& dout) const;

  /// Maps a normalized model output to expected seconds.
  double to_seconds(double out) const;

  void save(const std::filesystem::path& path) const;
  static T3pModel load(const std::filesystem::path& path);

  bool operator==(const T3pModel& other) const;

 private:
  T3pConfig config_;
  FeatureScaling scaling_;
  T3pParams params_;
  Matrix pos_encoding_;
};

/// Sinusoidal position encoding, rows = positions.
Matrix sinusoidal_positions(std::size_t length, std::size_t d_model);

}  // namespace beabr

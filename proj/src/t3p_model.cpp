#include "beabr/t3p_model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "beabr/error.hpp"

namespace beabr {
namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr char kCheckpointMagic[8] = {'B', 'E', 'A', 'B', 'R', 'T', '3', 'P'};
constexpr std::uint32_t kCheckpointVersion = 2;

Matrix relu(const Matrix& m) { return m.cwiseMax(0.0); }

Matrix relu_grad(const Matrix& grad, const Matrix& pre) {
  return grad.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
}

void add_bias(Matrix& m, const Matrix& b) { m.rowwise() += b.row(0); }

Matrix col_sum(const Matrix& m) { return m.colwise().sum(); }

void check_finite(const Matrix& m, const char* layer) {
  if (!m.allFinite()) throw NumericError(std::string("non-finite values in layer ") + layer);
}

// Row-wise layer norm. Returns normalized input; fills inverse std per row.
Matrix layer_norm(const Matrix& x, Vector& inv_std) {
  Matrix out(x.rows(), x.cols());
  inv_std.resize(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double mean = x.row(r).mean();
    double var = (x.row(r).array() - mean).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + kLayerNormEps);
    out.row(r) = (x.row(r).array() - mean) * inv_std(r);
  }
  return out;
}

Matrix layer_norm_backward(const Matrix& dxhat, const Matrix& xhat, const Vector& inv_std) {
  Matrix dx(dxhat.rows(), dxhat.cols());
  for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
    double m1 = dxhat.row(r).mean();
    double m2 = dxhat.row(r).cwiseProduct(xhat.row(r)).mean();
    dx.row(r) = inv_std(r) * (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2);
  }
  return dx;
}

void softmax_row_inplace(Eigen::Ref<Matrix> row) {
  double mx = row.maxCoeff();
  row = (row.array() - mx).exp().matrix();
  row /= row.sum();
}

void xavier(Matrix& m, std::mt19937_64& rng) {
  double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
}

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ParseError("truncated checkpoint");
  return v;
}

}  // namespace

void HistoryWindow::validate() const {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    if (!(s.chunk_bytes > 0.0) || !(s.throughput_Bps > 0.0)) {
      throw InvalidArgument("history sample " + std::to_string(i) +
                            " needs positive size and throughput");
    }
    if (i > 0 && !(s.sample_time_s > samples[i - 1].sample_time_s)) {
      throw InvalidArgument("history sample times must be strictly increasing");
    }
  }
  if (!samples.empty() && now_s < samples.back().sample_time_s) {
    throw InvalidArgument("window time precedes its last sample");
  }
}

double sample_midpoint(double start_s, double download_s) {
  if (download_s < 0.0) throw InvalidArgument("download time must be non-negative");
  return start_s + 0.5 * download_s;
}

std::vector<double> time_deltas(const HistoryWindow& window) {
  std::vector<double> out;
  out.reserve(window.samples.size());
  for (const auto& s : window.samples) out.push_back(window.now_s - s.sample_time_s);
  return out;
}

void T3pConfig::validate() const {
  if (history == 0 || state_width == 0 || d_model == 0 || heads == 0 || ff_width == 0 ||
      decoupler_width == 0 || head_width == 0) {
    throw ConfigError("T3P dimensions must be positive");
  }
  if (d_model % heads != 0) throw ConfigError("d_model must be divisible by the head count");
}

Matrix sinusoidal_positions(std::size_t length, std::size_t d_model) {
  Matrix pe(length, d_model);
  for (std::size_t pos = 0; pos < length; ++pos) {
    for (std::size_t i = 0; i < d_model; ++i) {
      double exponent = static_cast<double>(2 * (i / 2)) / static_cast<double>(d_model);
      double angle = static_cast<double>(pos) / std::pow(10000.0, exponent);
      pe(pos, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

T3pParams T3pParams::zeros_like(const T3pConfig& c) {
  T3pParams p;
  auto z = [](std::size_t r, std::size_t cols) { return Matrix::Zero(r, cols); };
  p.dec_w1 = z(2, c.decoupler_width);
  p.dec_b1 = z(1, c.decoupler_width);
  p.dec_w2 = z(c.decoupler_width, c.decoupler_width);
  p.dec_b2 = z(1, c.decoupler_width);
  p.dec_w3 = z(c.decoupler_width, c.state_width);
  p.dec_b3 = z(1, c.state_width);
  p.in_w = z(c.state_width, c.d_model);
  p.in_b = z(1, c.d_model);
  p.att_wq = z(c.d_model, c.d_model);
  p.att_bq = z(1, c.d_model);
  p.att_wk = z(c.d_model, c.d_model);
  p.att_bk = z(1, c.d_model);
  p.att_wv = z(c.d_model, c.d_model);
  p.att_bv = z(1, c.d_model);
  p.att_wo = z(c.d_model, c.d_model);
  p.att_bo = z(1, c.d_model);
  p.ln1_g = z(1, c.d_model);
  p.ln1_b = z(1, c.d_model);
  p.ff_w1 = z(c.d_model, c.ff_width);
  p.ff_b1 = z(1, c.ff_width);
  p.ff_w2 = z(c.ff_width, c.d_model);
  p.ff_b2 = z(1, c.d_model);
  p.ln2_g = z(1, c.d_model);
  p.ln2_b = z(1, c.d_model);
  p.time_wk = z(1, c.state_width);
  p.time_bk = z(1, c.state_width);
  p.query_w = z(c.history, 1);
  p.query_b = z(1, c.state_width);
  p.head_w1 = z(1 + c.d_model, c.head_width);
  p.head_b1 = z(1, c.head_width);
  p.head_w2 = z(c.head_width, c.head_width);
  p.head_b2 = z(1, c.head_width);
  p.head_w3 = z(c.head_width, 1);
  p.head_b3 = z(1, 1);
  return p;
}

#define BEABR_T3P_PARAMS(X)                                                            \
  X(dec_w1) X(dec_b1) X(dec_w2) X(dec_b2) X(dec_w3) X(dec_b3) X(in_w) X(in_b)          \
  X(att_wq) X(att_bq) X(att_wk) X(att_bk) X(att_wv) X(att_bv) X(att_wo) X(att_bo)      \
  X(ln1_g) X(ln1_b) X(ff_w1) X(ff_b1) X(ff_w2) X(ff_b2) X(ln2_g) X(ln2_b)              \
  X(time_wk) X(time_bk) X(query_w) X(query_b)                                          \
  X(head_w1) X(head_b1) X(head_w2) X(head_b2) X(head_w3) X(head_b3)

void T3pParams::visit(const std::function<void(const std::string&, Matrix&)>& fn) {
#define X(name) fn(#name, name);
  BEABR_T3P_PARAMS(X)
#undef X
}

void T3pParams::visit(const std::function<void(const std::string&, const Matrix&)>& fn) const {
#define X(name) fn(#name, name);
  BEABR_T3P_PARAMS(X)
#undef X
}

std::size_t T3pParams::count() const {
  std::size_t n = 0;
  visit([&](const std::string&, const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

T3pModel::T3pModel(const T3pConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  params_ = T3pParams::zeros_like(config_);
  std::mt19937_64 rng(seed);
  params_.visit([&](const std::string& name, Matrix& m) {
    char kind = name[name.rfind('_') + 1];
    if (kind == 'g') {
      m.setOnes();
    } else if (kind == 'w') {
      xavier(m, rng);
    }
  });
  pos_encoding_ = sinusoidal_positions(config_.history, config_.d_model);
}

double T3pModel::to_seconds(double out) const {
  return std::exp(out * scaling_.log_target_std + scaling_.log_target_mean +
                  0.5 * scaling_.log_residual_var);
}

T3pBatch T3pModel::make_batch(std::span<const HistoryWindow> windows,
                              std::span<const double> d_star,
                              std::span<const double> target_s) const {
  if (windows.size() != d_star.size()) throw ConfigError("window/d_star count mismatch");
  if (!target_s.empty() && target_s.size() != windows.size()) {
    throw ConfigError("window/target count mismatch");
  }
  const std::size_t T = config_.history;
  T3pBatch batch;
  batch.size = windows.size();
  batch.features.resize(static_cast<Eigen::Index>(batch.size * T), 2);
  batch.deltas.resize(static_cast<Eigen::Index>(batch.size * T));
  batch.d_star.resize(static_cast<Eigen::Index>(batch.size));
  batch.target = Vector::Zero(static_cast<Eigen::Index>(batch.size));
  const auto& s = scaling_;
  for (std::size_t b = 0; b < batch.size; ++b) {
    const auto& w = windows[b];
    if (w.samples.size() != T) {
      throw ConfigError("history window has " + std::to_string(w.samples.size()) +
                        " samples, model expects " + std::to_string(T));
    }
    if (!(d_star[b] > 0.0)) throw InvalidArgument("requested chunk size must be positive");
    for (std::size_t i = 0; i < T; ++i) {
      const auto& x = w.samples[i];
      auto r = static_cast<Eigen::Index>(b * T + i);
      batch.features(r, 0) = (std::log(x.chunk_bytes) - s.log_bytes_mean) / s.log_bytes_std;
      batch.features(r, 1) = (std::log(x.throughput_Bps) - s.log_tput_mean) / s.log_tput_std;
      batch.deltas(r) = (w.now_s - x.sample_time_s) / s.delta_scale;
    }
    batch.d_star(static_cast<Eigen::Index>(b)) =
        (std::log(d_star[b]) - s.log_bytes_mean) / s.log_bytes_std;
    if (!target_s.empty()) {
      batch.target(static_cast<Eigen::Index>(b)) =
          (std::log(target_s[b]) - s.log_target_mean) / s.log_target_std;
    }
  }
  return batch;
}

Vector T3pModel::forward_batch(const T3pBatch& batch, T3pCache& c) const {
  const auto& p = params_;
  const auto T = static_cast<Eigen::Index>(config_.history);
  const auto B = static_cast<Eigen::Index>(batch.size);
  const auto d = static_cast<Eigen::Index>(config_.d_model);
  const auto s = static_cast<Eigen::Index>(config_.state_width);
  const auto H = static_cast<Eigen::Index>(config_.heads);
  const Eigen::Index dh = d / H;
  const double head_scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const double time_scale = 1.0 / std::sqrt(static_cast<double>(s));

  // Decoupling MLP.
  c.x = batch.features;
  c.a1 = c.x * p.dec_w1;
  add_bias(c.a1, p.dec_b1);
  c.r1 = relu(c.a1);
  c.a2 = c.r1 * p.dec_w2;
  add_bias(c.a2, p.dec_b2);
  c.r2 = relu(c.a2);
  c.v = c.r2 * p.dec_w3;
  add_bias(c.v, p.dec_b3);
  check_finite(c.v, "decoupler");

  // Encoder input + positions.
  c.e0 = c.v * p.in_w;
  add_bias(c.e0, p.in_b);
  for (Eigen::Index b = 0; b < B; ++b) c.e0.middleRows(b * T, T) += pos_encoding_;

  // Multi-head self-attention.
  c.q = c.e0 * p.att_wq;
  add_bias(c.q, p.att_bq);
  c.k = c.e0 * p.att_wk;
  add_bias(c.k, p.att_bk);
  c.v_att = c.e0 * p.att_wv;
  add_bias(c.v_att, p.att_bv);
  c.probs.resize(B * H * T, T);
  c.o.resize(B * T, d);
  for (Eigen::Index b = 0; b < B; ++b) {
    for (Eigen::Index h = 0; h < H; ++h) {
      auto qh = c.q.block(b * T, h * dh, T, dh);
      auto kh = c.k.block(b * T, h * dh, T, dh);
      auto vh = c.v_att.block(b * T, h * dh, T, dh);
      auto pr = c.probs.middleRows((b * H + h) * T, T);
      pr.noalias() = (qh * kh.transpose()) * head_scale;
      for (Eigen::Index r = 0; r < T; ++r) softmax_row_inplace(pr.row(r));
      c.o.block(b * T, h * dh, T, dh).noalias() = pr * vh;
    }
  }
  c.att = c.o * p.att_wo;
  add_bias(c.att, p.att_bo);
  c.z1 = c.e0 + c.att;
  c.n1_hat = layer_norm(c.z1, c.ln1_inv_std);
  c.n1 = c.n1_hat.array().rowwise() * p.ln1_g.row(0).array();
  add_bias(c.n1, p.ln1_b);

  // Feed-forward.
  c.f1 = c.n1 * p.ff_w1;
  add_bias(c.f1, p.ff_b1);
  c.rf = relu(c.f1);
  c.f2 = c.rf * p.ff_w2;
  add_bias(c.f2, p.ff_b2);
  c.z2 = c.n1 + c.f2;
  c.n2_hat = layer_norm(c.z2, c.ln2_inv_std);
  c.h = c.n2_hat.array().rowwise() * p.ln2_g.row(0).array();
  add_bias(c.h, p.ln2_b);
  check_finite(c.h, "encoder");

  // Time-aware key-query attention.
  c.keys = batch.deltas * p.time_wk;
  add_bias(c.keys, p.time_bk);
  c.keys = c.keys.array().tanh().matrix();
  c.query_pre.resize(B, s);
  for (Eigen::Index b = 0; b < B; ++b) {
    c.query_pre.row(b).noalias() = p.query_w.transpose() * c.v.middleRows(b * T, T);
  }
  add_bias(c.query_pre, p.query_b);
  c.query = relu(c.query_pre);
  c.phi.resize(B, T);
  c.weights.resize(B, T);
  c.h_star.resize(B, d);
  for (Eigen::Index b = 0; b < B; ++b) {
    c.phi.row(b).noalias() = (c.keys.middleRows(b * T, T) * c.query.row(b).transpose()).transpose();
    c.phi.row(b) *= time_scale;
    c.weights.row(b) = c.phi.row(b);
    softmax_row_inplace(c.weights.row(b));
    c.h_star.row(b).noalias() = c.weights.row(b) * c.h.middleRows(b * T, T);
  }
  check_finite(c.weights, "time attention");

  // Prediction head.
  c.u.resize(B, 1 + d);
  c.u.col(0) = batch.d_star;
  c.u.rightCols(d) = c.h_star;
  c.g1 = c.u * p.head_w1;
  add_bias(c.g1, p.head_b1);
  c.rg1 = relu(c.g1);
  c.g2 = c.rg1 * p.head_w2;
  add_bias(c.g2, p.head_b2);
  c.rg2 = relu(c.g2);
  c.out = c.rg2 * p.head_w3;
  add_bias(c.out, p.head_b3);
  check_finite(c.out, "prediction head");
  return c.out.col(0);
}

T3pParams T3pModel::backward(const T3pBatch& batch, const T3pCache& c, const Vector& dout) const {
  const auto& p = params_;
  const auto T = static_cast<Eigen::Index>(config_.history);
  const auto B = static_cast<Eigen::Index>(batch.size);
  const auto d = static_cast<Eigen::Index>(config_.d_model);
  const auto s = static_cast<Eigen::Index>(config_.state_width);
  const auto H = static_cast<Eigen::Index>(config_.heads);
  const Eigen::Index hd = d / H;
  const double head_scale = 1.0 / std::sqrt(static_cast<double>(hd));
  const double time_scale = 1.0 / std::sqrt(static_cast<double>(s));
  T3pParams g = T3pParams::zeros_like(config_);

  // Head.
  Matrix dout_m = dout;
  g.head_w3 = c.rg2.transpose() * dout_m;
  g.head_b3 = col_sum(dout_m);
  Matrix dg2 = relu_grad(dout_m * p.head_w3.transpose(), c.g2);
  g.head_w2 = c.rg1.transpose() * dg2;
  g.head_b2 = col_sum(dg2);
  Matrix dg1 = relu_grad(dg2 * p.head_w2.transpose(), c.g1);
  g.head_w1 = c.u.transpose() * dg1;
  g.head_b1 = col_sum(dg1);
  Matrix du = dg1 * p.head_w1.transpose();
  Matrix dh_star = du.rightCols(d);

  // Time attention.
  Matrix dh = Matrix::Zero(B * T, d);
  Matrix dv = Matrix::Zero(B * T, s);
  Matrix dkeys(B * T, s);
  Matrix dquery_pre(B, s);
  for (Eigen::Index b = 0; b < B; ++b) {
    auto hb = c.h.middleRows(b * T, T);
    Eigen::RowVectorXd w = c.weights.row(b);
    Eigen::RowVectorXd dw = (hb * dh_star.row(b).transpose()).transpose();
    dh.middleRows(b * T, T).noalias() += w.transpose() * dh_star.row(b);
    double dot = w.dot(dw);
    Eigen::RowVectorXd dphi = (w.array() * (dw.array() - dot)).matrix() * time_scale;
    auto kb = c.keys.middleRows(b * T, T);
    dkeys.middleRows(b * T, T).noalias() = dphi.transpose() * c.query.row(b);
    Eigen::RowVectorXd dq = dphi * kb;
    dquery_pre.row(b) = dq.cwiseProduct((c.query_pre.row(b).array() > 0.0).cast<double>().matrix());
    auto vb = c.v.middleRows(b * T, T);
    g.query_w.noalias() += vb * dquery_pre.row(b).transpose();
    dv.middleRows(b * T, T).noalias() += p.query_w * dquery_pre.row(b);
  }
  g.query_b = col_sum(dquery_pre);
  Matrix dkeys_pre = dkeys.cwiseProduct((1.0 - c.keys.array().square()).matrix());
  g.time_wk = batch.deltas.transpose() * dkeys_pre;
  g.time_bk = col_sum(dkeys_pre);

  // Second layer norm and feed-forward.
  g.ln2_g = col_sum(dh.cwiseProduct(c.n2_hat));
  g.ln2_b = col_sum(dh);
  Matrix dz2 = layer_norm_backward(dh.array().rowwise() * p.ln2_g.row(0).array(), c.n2_hat,
                                   c.ln2_inv_std);
  Matrix dn1 = dz2;
  g.ff_w2 = c.rf.transpose() * dz2;
  g.ff_b2 = col_sum(dz2);
  Matrix df1 = relu_grad(dz2 * p.ff_w2.transpose(), c.f1);
  g.ff_w1 = c.n1.transpose() * df1;
  g.ff_b1 = col_sum(df1);
  dn1.noalias() += df1 * p.ff_w1.transpose();

  // First layer norm and attention.
  g.ln1_g = col_sum(dn1.cwiseProduct(c.n1_hat));
  g.ln1_b = col_sum(dn1);
  Matrix dz1 = layer_norm_backward(dn1.array().rowwise() * p.ln1_g.row(0).array(), c.n1_hat,
                                   c.ln1_inv_std);
  Matrix de0 = dz1;
  g.att_wo = c.o.transpose() * dz1;
  g.att_bo = col_sum(dz1);
  Matrix d_o = dz1 * p.att_wo.transpose();
  Matrix dq(B * T, d), dk(B * T, d), dva(B * T, d);
  for (Eigen::Index b = 0; b < B; ++b) {
    for (Eigen::Index h = 0; h < H; ++h) {
      auto qh = c.q.block(b * T, h * hd, T, hd);
      auto kh = c.k.block(b * T, h * hd, T, hd);
      auto vh = c.v_att.block(b * T, h * hd, T, hd);
      auto pr = c.probs.middleRows((b * H + h) * T, T);
      auto doh = d_o.block(b * T, h * hd, T, hd);
      Matrix dp = doh * vh.transpose();
      dva.block(b * T, h * hd, T, hd).noalias() = pr.transpose() * doh;
      Vector rows = dp.cwiseProduct(pr).rowwise().sum();
      Matrix ds = pr.cwiseProduct(dp.colwise() - rows) * head_scale;
      dq.block(b * T, h * hd, T, hd).noalias() = ds * kh;
      dk.block(b * T, h * hd, T, hd).noalias() = ds.transpose() * qh;
    }
  }
  g.att_wq = c.e0.transpose() * dq;
  g.att_bq = col_sum(dq);
  g.att_wk = c.e0.transpose() * dk;
  g.att_bk = col_sum(dk);
  g.att_wv = c.e0.transpose() * dva;
  g.att_bv = col_sum(dva);
  de0.noalias() += dq * p.att_wq.transpose();
  de0.noalias() += dk * p.att_wk.transpose();
  de0.noalias() += dva * p.att_wv.transpose();

  // Input projection and decoupler.
  g.in_w = c.v.transpose() * de0;
  g.in_b = col_sum(de0);
  dv.noalias() += de0 * p.in_w.transpose();
  g.dec_w3 = c.r2.transpose() * dv;
  g.dec_b3 = col_sum(dv);
  Matrix da2 = relu_grad(dv * p.dec_w3.transpose(), c.a2);
  g.dec_w2 = c.r1.transpose() * da2;
  g.dec_b2 = col_sum(da2);
  Matrix da1 = relu_grad(da2 * p.dec_w2.transpose(), c.a1);
  g.dec_w1 = c.x.transpose() * da1;
  g.dec_b1 = col_sum(da1);
  return g;
}

double T3pModel::forward(const HistoryWindow& window, double d_star_bytes) const {
  window.validate();
  T3pCache cache;
  auto batch = make_batch(std::span(&window, 1), std::span(&d_star_bytes, 1));
  double out = forward_batch(batch, cache)(0);
  double secs = to_seconds(out);
  if (!std::isfinite(secs)) throw NumericError("non-finite delay prediction");
  return secs;
}

std::vector<double> T3pModel::attention_weights(const HistoryWindow& window,
                                                double d_star_bytes) const {
  window.validate();
  T3pCache cache;
  auto batch = make_batch(std::span(&window, 1), std::span(&d_star_bytes, 1));
  forward_batch(batch, cache);
  return {cache.weights.data(), cache.weights.data() + cache.weights.size()};
}

void T3pModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  write_pod(out, kCheckpointVersion);
  for (std::size_t v : {config_.history, config_.state_width, config_.d_model, config_.heads,
                        config_.ff_width, config_.decoupler_width, config_.head_width}) {
    write_pod<std::uint64_t>(out, v);
  }
  for (double v : {scaling_.log_bytes_mean, scaling_.log_bytes_std, scaling_.log_tput_mean,
                   scaling_.log_tput_std, scaling_.delta_scale, scaling_.log_target_mean,
                   scaling_.log_target_std, scaling_.log_residual_var}) {
    write_pod(out, v);
  }
  write_pod<std::uint64_t>(out, 34);
  params_.visit([&](const std::string& name, const Matrix& m) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
  });
  if (!out) throw ParseError("failed writing checkpoint " + path.string());
}

T3pModel T3pModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint " + path.string());
  char magic[sizeof(kCheckpointMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw ParseError("not a T3P checkpoint: " + path.string());
  }
  if (read_pod<std::uint32_t>(in) != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version");
  }
  T3pConfig cfg;
  for (std::size_t* field : {&cfg.history, &cfg.state_width, &cfg.d_model, &cfg.heads,
                             &cfg.ff_width, &cfg.decoupler_width, &cfg.head_width}) {
    *field = static_cast<std::size_t>(read_pod<std::uint64_t>(in));
  }
  FeatureScaling sc;
  for (double* field : {&sc.log_bytes_mean, &sc.log_bytes_std, &sc.log_tput_mean,
                        &sc.log_tput_std, &sc.delta_scale, &sc.log_target_mean,
                        &sc.log_target_std, &sc.log_residual_var}) {
    *field = read_pod<double>(in);
  }
  T3pModel model(cfg, 0);
  model.scaling_ = sc;
  auto count = read_pod<std::uint64_t>(in);
  if (count != 34) throw ParseError("unexpected tensor count in checkpoint");
  model.params_.visit([&](const std::string& name, Matrix& m) {
    auto len = read_pod<std::uint32_t>(in);
    std::string stored(len, '\0');
    in.read(stored.data(), len);
    auto rows = read_pod<std::uint64_t>(in);
    auto cols = read_pod<std::uint64_t>(in);
    if (!in || stored != name || rows != static_cast<std::uint64_t>(m.rows()) ||
        cols != static_cast<std::uint64_t>(m.cols())) {
      throw ParseError("checkpoint tensor mismatch at " + name);
    }
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(m.size())));
    if (!in) throw ParseError("truncated checkpoint tensor " + name);
  });
  return model;
}

bool T3pModel::operator==(const T3pModel& other) const {
  if (!(config_ == other.config_) || !(scaling_ == other.scaling_)) return false;
  bool equal = true;
  std::vector<const Matrix*> mine;
  params_.visit([&](const std::string&, const Matrix& m) { mine.push_back(&m); });
  std::size_t i = 0;
  other.params_.visit([&](const std::string&, const Matrix& m) {
    const Matrix& a = *mine[i++];
    if (a.rows() != m.rows() || a.cols() != m.cols() ||
        std::memcmp(a.data(), m.data(), sizeof(double) * static_cast<std::size_t>(a.size())) != 0) {
      equal = false;
    }
  });
  return equal;
}

}  // namespace beabr

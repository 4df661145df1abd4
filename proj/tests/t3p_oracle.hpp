#pragma once

// Test-side T3P helpers: a small configuration, perturbed weights, random
// batches and a plain-loop forward pass that shares no code with the model.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "beabr/t3p_model.hpp"

namespace t3p_oracle {

using namespace beabr;
using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

inline T3pConfig small_config(std::size_t T = 4) {
  T3pConfig c;
  c.history = T;
  c.state_width = 8;
  c.d_model = 16;
  c.heads = 4;
  c.ff_width = 24;
  c.decoupler_width = 16;
  c.head_width = 32;
  return c;
}

// Fresh model with every tensor perturbed so biases and gains are non-trivial.
inline T3pModel perturbed_model(const T3pConfig& cfg, std::uint64_t seed) {
  T3pModel m(cfg, seed);
  std::mt19937_64 rng(seed + 100);
  std::normal_distribution<double> noise(0.0, 0.1);
  m.params().visit([&](const std::string& name, Matrix& t) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] += noise(rng);
    if (name == "query_b") t.array() += 0.5;
  });
  return m;
}

inline T3pBatch random_batch(const T3pConfig& cfg, std::size_t size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  T3pBatch b;
  b.size = size;
  auto rows = static_cast<Eigen::Index>(size * cfg.history);
  b.features.resize(rows, 2);
  b.deltas.resize(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    b.features(r, 0) = z(rng);
    b.features(r, 1) = z(rng);
  }
  for (std::size_t s = 0; s < size; ++s) {
    double acc = u(rng);
    for (std::size_t i = cfg.history; i-- > 0;) {
      b.deltas(static_cast<Eigen::Index>(s * cfg.history + i)) = acc;
      acc += 0.2 + u(rng);
    }
  }
  b.d_star.resize(static_cast<Eigen::Index>(size));
  for (std::size_t s = 0; s < size; ++s) b.d_star(static_cast<Eigen::Index>(s)) = z(rng);
  b.target = Vector::Zero(static_cast<Eigen::Index>(size));
  return b;
}

// Plain-loop reimplementation of one forward pass for sample `s`.
struct Oracle {
  const T3pParams& p;
  const T3pConfig& c;

  static Vec affine(const Vec& x, const Matrix& w, const Matrix& b) {
    Vec y(static_cast<std::size_t>(w.cols()));
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      double acc = b(0, j);
      for (Eigen::Index i = 0; i < w.rows(); ++i) acc += x[static_cast<std::size_t>(i)] * w(i, j);
      y[static_cast<std::size_t>(j)] = acc;
    }
    return y;
  }
  static Vec relu(Vec x) {
    for (auto& v : x) v = v > 0.0 ? v : 0.0;
    return x;
  }
  static Vec softmax(Vec x) {
    double mx = x[0];
    for (double v : x) mx = std::max(mx, v);
    double sum = 0.0;
    for (auto& v : x) sum += (v = std::exp(v - mx));
    for (auto& v : x) v /= sum;
    return x;
  }
  static Vec norm(const Vec& x, const Matrix& g, const Matrix& b) {
    double mean = 0.0, var = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    for (double v : x) var += (v - mean) * (v - mean);
    var /= static_cast<double>(x.size());
    Vec y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      y[i] = (x[i] - mean) / std::sqrt(var + 1e-5) * g(0, static_cast<Eigen::Index>(i)) +
             b(0, static_cast<Eigen::Index>(i));
    }
    return y;
  }

  double run(const T3pBatch& batch, std::size_t s, Vec* weights_out = nullptr) const {
    const std::size_t T = c.history, d = c.d_model, H = c.heads, dh = d / H, S = c.state_width;
    Mat v(T), e(T);
    for (std::size_t i = 0; i < T; ++i) {
      auto r = static_cast<Eigen::Index>(s * T + i);
      Vec x{batch.features(r, 0), batch.features(r, 1)};
      v[i] = affine(relu(affine(relu(affine(x, p.dec_w1, p.dec_b1)), p.dec_w2, p.dec_b2)),
                    p.dec_w3, p.dec_b3);
      e[i] = affine(v[i], p.in_w, p.in_b);
      for (std::size_t j = 0; j < d; ++j) {
        double expo = static_cast<double>(2 * (j / 2)) / static_cast<double>(d);
        double ang = static_cast<double>(i) / std::pow(10000.0, expo);
        e[i][j] += j % 2 == 0 ? std::sin(ang) : std::cos(ang);
      }
    }
    Mat q(T), k(T), val(T), h(T);
    for (std::size_t i = 0; i < T; ++i) {
      q[i] = affine(e[i], p.att_wq, p.att_bq);
      k[i] = affine(e[i], p.att_wk, p.att_bk);
      val[i] = affine(e[i], p.att_wv, p.att_bv);
    }
    for (std::size_t i = 0; i < T; ++i) {
      Vec concat(d, 0.0);
      for (std::size_t hh = 0; hh < H; ++hh) {
        Vec logits(T);
        for (std::size_t j = 0; j < T; ++j) {
          double dot = 0.0;
          for (std::size_t t = 0; t < dh; ++t) dot += q[i][hh * dh + t] * k[j][hh * dh + t];
          logits[j] = dot / std::sqrt(static_cast<double>(dh));
        }
        auto a = softmax(logits);
        for (std::size_t j = 0; j < T; ++j) {
          for (std::size_t t = 0; t < dh; ++t) concat[hh * dh + t] += a[j] * val[j][hh * dh + t];
        }
      }
      auto att = affine(concat, p.att_wo, p.att_bo);
      Vec z1(d);
      for (std::size_t j = 0; j < d; ++j) z1[j] = e[i][j] + att[j];
      auto n1 = norm(z1, p.ln1_g, p.ln1_b);
      auto f = affine(relu(affine(n1, p.ff_w1, p.ff_b1)), p.ff_w2, p.ff_b2);
      Vec z2(d);
      for (std::size_t j = 0; j < d; ++j) z2[j] = n1[j] + f[j];
      h[i] = norm(z2, p.ln2_g, p.ln2_b);
    }
    Vec query(S);
    for (std::size_t j = 0; j < S; ++j) {
      double acc = p.query_b(0, static_cast<Eigen::Index>(j));
      for (std::size_t i = 0; i < T; ++i) acc += p.query_w(static_cast<Eigen::Index>(i), 0) * v[i][j];
      query[j] = acc > 0.0 ? acc : 0.0;
    }
    Vec phi(T);
    for (std::size_t i = 0; i < T; ++i) {
      double delta = batch.deltas(static_cast<Eigen::Index>(s * T + i));
      double dot = 0.0;
      for (std::size_t j = 0; j < S; ++j) {
        auto jj = static_cast<Eigen::Index>(j);
        dot += std::tanh(p.time_wk(0, jj) * delta + p.time_bk(0, jj)) * query[j];
      }
      phi[i] = dot / std::sqrt(static_cast<double>(S));
    }
    auto a = softmax(phi);
    if (weights_out) *weights_out = a;
    Vec u(1 + d, 0.0);
    u[0] = batch.d_star(static_cast<Eigen::Index>(s));
    for (std::size_t i = 0; i < T; ++i) {
      for (std::size_t j = 0; j < d; ++j) u[1 + j] += a[i] * h[i][j];
    }
    auto g = relu(affine(relu(affine(u, p.head_w1, p.head_b1)), p.head_w2, p.head_b2));
    return affine(g, p.head_w3, p.head_b3)[0];
  }
};

// Runs the oracle over every batch sample; the largest output mismatch.
inline double max_forward_error(const T3pModel& m, const T3pBatch& b) {
  T3pCache cache;
  Vector out = m.forward_batch(b, cache);
  Oracle o{m.params(), m.config()};
  double worst = 0.0;
  for (std::size_t s = 0; s < b.size; ++s) {
    worst = std::max(worst, std::abs(out(static_cast<Eigen::Index>(s)) - o.run(b, s)));
  }
  return worst;
}

struct TensorCheck {
  std::string name;
  double rel_error = 0.0;
};

// Central differences of the scalar output of sample 0 against backward(),
// one relative error (Frobenius norms) per parameter tensor.
inline std::vector<TensorCheck> gradient_check(T3pModel& m, const T3pBatch& batch,
                                               double h = 1e-4) {
  T3pCache cache;
  m.forward_batch(batch, cache);
  Vector dout = Vector::Zero(static_cast<Eigen::Index>(batch.size));
  dout(0) = 1.0;
  T3pParams grad = m.backward(batch, cache, dout);
  std::vector<const Matrix*> grads;
  grad.visit([&](const std::string&, const Matrix& t) { grads.push_back(&t); });
  std::vector<TensorCheck> out;
  std::size_t gi = 0;
  m.params().visit([&](const std::string& name, Matrix& t) {
    Matrix numeric(t.rows(), t.cols());
    for (Eigen::Index i = 0; i < t.size(); ++i) {
      double keep = t.data()[i];
      T3pCache c;
      t.data()[i] = keep + h;
      double up = m.forward_batch(batch, c)(0);
      t.data()[i] = keep - h;
      double down = m.forward_batch(batch, c)(0);
      t.data()[i] = keep;
      numeric.data()[i] = (up - down) / (2.0 * h);
    }
    // att_bk shifts every score of a row equally, so its true gradient is 0
    // and the finite difference is pure rounding; the floor absorbs that.
    double scale = std::max({numeric.norm(), grads[gi]->norm(), 1e-6});
    out.push_back({name, (numeric - *grads[gi]).norm() / scale});
    ++gi;
  });
  return out;
}

}  // namespace t3p_oracle

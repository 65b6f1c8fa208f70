#include "htds/layers.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "htds/kernels.hpp"

namespace htds::layers {
namespace {

void add_bias(Matrix& y, const Matrix& b) {
  for (std::size_t i = 0; i < y.rows(); ++i) {
    auto r = y.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += b(0, j);
  }
}

void accumulate_colsum(const Matrix& dy, Matrix& db) {
  for (std::size_t i = 0; i < dy.rows(); ++i) {
    auto r = dy.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) db(0, j) += r[j];
  }
}

Matrix linear(const Matrix& x, const Matrix& w, const Matrix& b) {
  Matrix y;
  kernels::gemm_nn(x, w, y);
  add_bias(y, b);
  return y;
}

// Gradient of y = x W + b: accumulates dW, db and writes/adds dx.
void linear_backward(const Matrix& dy, const Matrix& x, const Matrix& w, Matrix& dw, Matrix& db,
                     Matrix& dx, bool accumulate_dx) {
  kernels::gemm_tn(x, dy, dw, true);
  accumulate_colsum(dy, db);
  kernels::gemm_nt(dy, w, dx, accumulate_dx);
}

Matrix columns(const Matrix& m, std::size_t start, std::size_t count) {
  Matrix out(m.rows(), count);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < count; ++j) out(i, j) = m(i, start + j);
  }
  return out;
}

void put_columns(Matrix& dst, const Matrix& src, std::size_t start) {
  for (std::size_t i = 0; i < src.rows(); ++i) {
    for (std::size_t j = 0; j < src.cols(); ++j) dst(i, start + j) = src(i, j);
  }
}

void add_into(Matrix& dst, const Matrix& src) {
  auto d = dst.flat();
  auto s = src.flat();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

}  // namespace

double gelu(double x) {
  constexpr double c = 0.7978845608028654;  // sqrt(2 / pi)
  return 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x)));
}

double gelu_grad(double x) {
  constexpr double c = 0.7978845608028654;
  const double t = std::tanh(c * (x + 0.044715 * x * x * x));
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * c * (1.0 + 3.0 * 0.044715 * x * x);
}

Matrix layer_norm_forward(const Matrix& x, const LayerNormParams& p, LayerNormCache& cache) {
  const std::size_t n = x.rows(), h = x.cols();
  cache.xhat.resize(n, h);
  cache.inv_std.assign(n, 0.0);
  Matrix y(n, h);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = x.row(i);
    double mean = 0.0;
    for (double v : r) mean += v;
    mean /= static_cast<double>(h);
    double var = 0.0;
    for (double v : r) var += (v - mean) * (v - mean);
    var /= static_cast<double>(h);
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.inv_std[i] = inv;
    for (std::size_t j = 0; j < h; ++j) {
      const double xh = (r[j] - mean) * inv;
      cache.xhat(i, j) = xh;
      y(i, j) = p.gain(0, j) * xh + p.bias(0, j);
    }
  }
  return y;
}

Matrix layer_norm_backward(const Matrix& dy, const LayerNormParams& p, const LayerNormCache& cache,
                           LayerNormParams& grad) {
  const std::size_t n = dy.rows(), h = dy.cols();
  Matrix dx(n, h);
  std::vector<double> dxhat(h);
  for (std::size_t i = 0; i < n; ++i) {
    double mean_d = 0.0, mean_dx = 0.0;
    for (std::size_t j = 0; j < h; ++j) {
      const double g = dy(i, j);
      grad.gain(0, j) += g * cache.xhat(i, j);
      grad.bias(0, j) += g;
      dxhat[j] = g * p.gain(0, j);
      mean_d += dxhat[j];
      mean_dx += dxhat[j] * cache.xhat(i, j);
    }
    mean_d /= static_cast<double>(h);
    mean_dx /= static_cast<double>(h);
    for (std::size_t j = 0; j < h; ++j) {
      dx(i, j) = cache.inv_std[i] * (dxhat[j] - mean_d - cache.xhat(i, j) * mean_dx);
    }
  }
  return dx;
}

Matrix attention_forward(const Matrix& x, const AttentionParams& p, std::size_t heads,
                         AttentionCache& cache) {
  const std::size_t n = x.rows(), h = x.cols();
  if (heads == 0 || h % heads != 0) throw std::invalid_argument("attention: hidden not divisible by heads");
  const std::size_t d = h / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  cache.x = x;
  cache.q = linear(x, p.wq, p.bq);
  cache.k = linear(x, p.wk, p.bk);
  cache.v = linear(x, p.wv, p.bv);
  cache.probs.resize(heads);
  cache.concat.resize(n, h);
  Matrix oh;
  for (std::size_t hd = 0; hd < heads; ++hd) {
    const Matrix qh = columns(cache.q, hd * d, d);
    const Matrix kh = columns(cache.k, hd * d, d);
    const Matrix vh = columns(cache.v, hd * d, d);
    Matrix& s = cache.probs[hd];
    kernels::gemm_nt(qh, kh, s);
    for (double& v : s.flat()) v *= scale;
    kernels::softmax_rows(s);
    kernels::gemm_nn(s, vh, oh);
    put_columns(cache.concat, oh, hd * d);
  }
  return linear(cache.concat, p.wo, p.bo);
}

Matrix attention_backward(const Matrix& dy, const AttentionParams& p, std::size_t heads,
                          const AttentionCache& cache, AttentionParams& grad) {
  const std::size_t n = dy.rows(), h = dy.cols();
  const std::size_t d = h / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  Matrix dconcat;
  linear_backward(dy, cache.concat, p.wo, grad.wo, grad.bo, dconcat, false);

  Matrix dq(n, h), dk(n, h), dv(n, h);
  Matrix dp, dvh, dqh, dkh;
  for (std::size_t hd = 0; hd < heads; ++hd) {
    const Matrix& prob = cache.probs[hd];
    const Matrix doh = columns(dconcat, hd * d, d);
    const Matrix qh = columns(cache.q, hd * d, d);
    const Matrix kh = columns(cache.k, hd * d, d);
    const Matrix vh = columns(cache.v, hd * d, d);
    kernels::gemm_nt(doh, vh, dp);
    kernels::gemm_tn(prob, doh, dvh);
    // softmax backward, row-wise
    for (std::size_t i = 0; i < n; ++i) {
      auto pr = prob.row(i);
      auto dr = dp.row(i);
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += pr[j] * dr[j];
      for (std::size_t j = 0; j < n; ++j) dr[j] = pr[j] * (dr[j] - dot) * scale;
    }
    kernels::gemm_nn(dp, kh, dqh);
    kernels::gemm_tn(dp, qh, dkh);
    put_columns(dq, dqh, hd * d);
    put_columns(dk, dkh, hd * d);
    put_columns(dv, dvh, hd * d);
  }
  Matrix dx;
  linear_backward(dq, cache.x, p.wq, grad.wq, grad.bq, dx, false);
  linear_backward(dk, cache.x, p.wk, grad.wk, grad.bk, dx, true);
  linear_backward(dv, cache.x, p.wv, grad.wv, grad.bv, dx, true);
  return dx;
}

Matrix feed_forward_forward(const Matrix& x, const FeedForwardParams& p, FeedForwardCache& cache) {
  cache.x = x;
  cache.pre = linear(x, p.w1, p.b1);
  cache.act = cache.pre;
  for (double& v : cache.act.flat()) v = gelu(v);
  return linear(cache.act, p.w2, p.b2);
}

Matrix feed_forward_backward(const Matrix& dy, const FeedForwardParams& p,
                             const FeedForwardCache& cache, FeedForwardParams& grad) {
  Matrix dact;
  linear_backward(dy, cache.act, p.w2, grad.w2, grad.b2, dact, false);
  auto da = dact.flat();
  auto pre = cache.pre.flat();
  for (std::size_t i = 0; i < da.size(); ++i) da[i] *= gelu_grad(pre[i]);
  Matrix dx;
  linear_backward(dact, cache.x, p.w1, grad.w1, grad.b1, dx, false);
  return dx;
}

Matrix encoder_layer_forward(const Matrix& x, const EncoderLayerParams& p, std::size_t heads,
                             EncoderLayerCache& cache) {
  Matrix h = attention_forward(layer_norm_forward(x, p.ln1, cache.ln1), p.attn, heads, cache.attn);
  add_into(h, x);
  Matrix y = feed_forward_forward(layer_norm_forward(h, p.ln2, cache.ln2), p.ffn, cache.ffn);
  add_into(y, h);
  return y;
}

Matrix encoder_layer_backward(const Matrix& dy, const EncoderLayerParams& p, std::size_t heads,
                              const EncoderLayerCache& cache, EncoderLayerParams& grad) {
  Matrix dh = layer_norm_backward(feed_forward_backward(dy, p.ffn, cache.ffn, grad.ffn), p.ln2,
                                  cache.ln2, grad.ln2);
  add_into(dh, dy);
  Matrix dx = layer_norm_backward(attention_backward(dh, p.attn, heads, cache.attn, grad.attn),
                                  p.ln1, cache.ln1, grad.ln1);
  add_into(dx, dh);
  return dx;
}

}  // namespace htds::layers

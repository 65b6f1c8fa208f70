#pragma once

#include <cstddef>
#include <vector>

#include "htds/tensor.hpp"

// Transformer building blocks with explicit forward caches and analytic
// backward passes. Backward functions accumulate parameter gradients into
// the `grad` argument and return the gradient with respect to the input.
namespace htds::layers {

struct LayerNormParams {
  Matrix gain;  // 1 x H
  Matrix bias;  // 1 x H
};

struct AttentionParams {
  Matrix wq, bq, wk, bk, wv, bv, wo, bo;  // weights H x H, biases 1 x H
};

struct FeedForwardParams {
  Matrix w1, b1;  // H x F, 1 x F
  Matrix w2, b2;  // F x H, 1 x H
};

// Pre-normalization block: h = x + attn(ln1(x)); y = h + ffn(ln2(h)).
struct EncoderLayerParams {
  LayerNormParams ln1;
  AttentionParams attn;
  LayerNormParams ln2;
  FeedForwardParams ffn;
};

inline constexpr double kLayerNormEps = 1e-5;

struct LayerNormCache {
  Matrix xhat;
  std::vector<double> inv_std;
};

Matrix layer_norm_forward(const Matrix& x, const LayerNormParams& p, LayerNormCache& cache);
Matrix layer_norm_backward(const Matrix& dy, const LayerNormParams& p, const LayerNormCache& cache,
                           LayerNormParams& grad);

struct AttentionCache {
  Matrix x;
  Matrix q, k, v;
  std::vector<Matrix> probs;  // one n x n matrix per head
  Matrix concat;
};

// Full self-attention over all rows of x. Callers pass only valid positions,
// so padding never enters the key set.
Matrix attention_forward(const Matrix& x, const AttentionParams& p, std::size_t heads,
                         AttentionCache& cache);
Matrix attention_backward(const Matrix& dy, const AttentionParams& p, std::size_t heads,
                          const AttentionCache& cache, AttentionParams& grad);

struct FeedForwardCache {
  Matrix x;
  Matrix pre;  // x W1 + b1
  Matrix act;  // gelu(pre)
};

Matrix feed_forward_forward(const Matrix& x, const FeedForwardParams& p, FeedForwardCache& cache);
Matrix feed_forward_backward(const Matrix& dy, const FeedForwardParams& p,
                             const FeedForwardCache& cache, FeedForwardParams& grad);

struct EncoderLayerCache {
  LayerNormCache ln1;
  AttentionCache attn;
  LayerNormCache ln2;
  FeedForwardCache ffn;
};

Matrix encoder_layer_forward(const Matrix& x, const EncoderLayerParams& p, std::size_t heads,
                             EncoderLayerCache& cache);
Matrix encoder_layer_backward(const Matrix& dy, const EncoderLayerParams& p, std::size_t heads,
                              const EncoderLayerCache& cache, EncoderLayerParams& grad);

// tanh-approximated GELU and its derivative.
double gelu(double x);
double gelu_grad(double x);

}  // namespace htds::layers

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "htds/config.hpp"
#include "htds/layers.hpp"
#include "htds/tensor.hpp"
#include "htds/tokenizer.hpp"

namespace htds {

// A non-finite value appeared in a loss or gradient.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ModelParams {
  Matrix token_emb;  // V x H
  Matrix pos_emb;    // T_c x H, position within a chunk
  std::vector<layers::EncoderLayerParams> encoder;
  Matrix meta_pe, meta_rev_pe, meta_te, meta_rev_te;  // N_c x H
  Matrix meta_ce;                                     // categories x H
  std::vector<layers::EncoderLayerParams> second;
  Matrix label_emb;   // N_l x H, the per-label attention queries
  Matrix classifier;  // N_l x H, row l scores label l's representation

  // Same shapes, all zeros.
  static ModelParams zeros(const ModelConfig& cfg);

  // Visits every tensor in a fixed order with a stable name.
  void for_each(const std::function<void(const std::string&, Matrix&)>& fn);
  void for_each(const std::function<void(const std::string&, const Matrix&)>& fn) const;
  std::vector<std::pair<std::string, Matrix*>> tensors();
  std::size_t parameter_count() const;
};

// Meta tables ~ N(0, 0.1); LayerNorm gains 1 and biases 0; linear biases 0;
// every other tensor U(-1/sqrt(fan_in), 1/sqrt(fan_in)) with fan_in = H for
// embedding tables.
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

// Per-chunk encoder output. Only the real (non-PAD) rows of each chunk are
// stored; PAD rows are defined as zero in the dense view.
struct ChunkEncodings {
  std::size_t tokens_per_chunk = 0;
  std::vector<Matrix> chunks;  // chunk i: real_len_i x H

  std::size_t hidden() const { return chunks.empty() ? 0 : chunks.front().cols(); }
  // (N_sel * T_c) x H with zero PAD rows.
  Matrix dense() const;
  // Real rows of all chunks stacked in order.
  Matrix stacked() const;
};

// Caches needed by model_backward.
struct ForwardCaches {
  std::vector<std::vector<layers::EncoderLayerCache>> encoder;  // [chunk][layer]
  std::vector<layers::EncoderLayerCache> second;
  std::vector<std::size_t> real_len;
  std::vector<std::vector<TokenId>> tokens;
  std::vector<MetaIndices> meta;
};

struct ForwardTrace {
  std::size_t n_chunks = 0;
  std::size_t tokens_per_chunk = 0;
  bool cls_only = false;
  // One entry per position of the dense layout (N_sel * T_c, or N_sel when
  // cls_only). Rows of H and A are the valid positions, in order.
  std::vector<std::uint8_t> mask;
  std::vector<std::size_t> positions;  // dense index of each H row
  Matrix H;                            // valid rows x H_e
  Matrix A;                            // valid rows x N_l, columns sum to 1
  Matrix V;                            // H_e x N_l
  std::vector<double> logits;
  std::vector<double> probs;
  ForwardCaches caches;

  // Dense views with zero rows at masked positions.
  Matrix dense_H() const;
  Matrix dense_A() const;
};

ChunkEncodings chunk_encoder_forward(const ModelParams& params, const ModelConfig& cfg,
                                     const std::vector<Chunk>& chunks,
                                     std::vector<std::vector<layers::EncoderLayerCache>>* caches = nullptr);

// Adds the enabled meta embeddings of each chunk to all of its rows.
void apply_meta_embeddings(ChunkEncodings& enc, const std::vector<Chunk>& chunks,
                           const ModelParams& params, const MetaFlags& flags);

// N_e layers of full self-attention over the concatenated valid rows.
Matrix cross_chunk_forward(const Matrix& tokens, const ModelParams& params, const ModelConfig& cfg,
                           std::vector<layers::EncoderLayerCache>* caches = nullptr);

struct LabelAttention {
  Matrix A;  // rows of H x N_l
  Matrix V;  // H_e x N_l
};

// A = softmax over rows of H alpha^T restricted to rows with mask != 0;
// masked rows get exactly zero weight. V = H^T A.
LabelAttention label_attention(const Matrix& H, std::span<const std::uint8_t> mask,
                               const Matrix& alpha);

// logits[l] = W_l . V[:, l]; no bias.
std::vector<double> classify_logits(const Matrix& V, const Matrix& W);
std::vector<double> classify(const Matrix& V, const Matrix& W);
double sigmoid(double z);

// Runs all stages on selected, meta-indexed chunks (at least one).
ForwardTrace model_forward(const ModelParams& params, const ModelConfig& cfg,
                           const std::vector<Chunk>& chunks);

// Accumulates into `grads` the gradient of scale * bce_loss(trace.probs,
// targets). Throws NumericError naming the first non-finite tensor.
void model_backward(const ModelParams& params, const ModelConfig& cfg, const ForwardTrace& trace,
                    std::span<const double> targets, double scale, ModelParams& grads);

}  // namespace htds

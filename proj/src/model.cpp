#include "htds/model.hpp"

#include <algorithm>
#include <cmath>

#include "htds/kernels.hpp"
#include "htds/rng.hpp"

namespace htds {
namespace {

layers::EncoderLayerParams layer_zeros(std::size_t h, std::size_t f) {
  layers::EncoderLayerParams p;
  p.ln1 = {Matrix(1, h), Matrix(1, h)};
  p.ln2 = {Matrix(1, h), Matrix(1, h)};
  auto& a = p.attn;
  for (Matrix* w : {&a.wq, &a.wk, &a.wv, &a.wo}) *w = Matrix(h, h);
  for (Matrix* b : {&a.bq, &a.bk, &a.bv, &a.bo}) *b = Matrix(1, h);
  p.ffn = {Matrix(h, f), Matrix(1, f), Matrix(f, h), Matrix(1, h)};
  return p;
}

template <typename Layer, typename Fn>
void visit_layer(const std::string& prefix, Layer& l, Fn& fn) {
  fn(prefix + "ln1.gain", l.ln1.gain);
  fn(prefix + "ln1.bias", l.ln1.bias);
  fn(prefix + "attn.wq", l.attn.wq);
  fn(prefix + "attn.bq", l.attn.bq);
  fn(prefix + "attn.wk", l.attn.wk);
  fn(prefix + "attn.bk", l.attn.bk);
  fn(prefix + "attn.wv", l.attn.wv);
  fn(prefix + "attn.bv", l.attn.bv);
  fn(prefix + "attn.wo", l.attn.wo);
  fn(prefix + "attn.bo", l.attn.bo);
  fn(prefix + "ln2.gain", l.ln2.gain);
  fn(prefix + "ln2.bias", l.ln2.bias);
  fn(prefix + "ffn.w1", l.ffn.w1);
  fn(prefix + "ffn.b1", l.ffn.b1);
  fn(prefix + "ffn.w2", l.ffn.w2);
  fn(prefix + "ffn.b2", l.ffn.b2);
}

template <typename Params, typename Fn>
void visit(Params& p, Fn&& fn) {
  fn("token_emb", p.token_emb);
  fn("pos_emb", p.pos_emb);
  for (std::size_t i = 0; i < p.encoder.size(); ++i) {
    visit_layer("encoder." + std::to_string(i) + ".", p.encoder[i], fn);
  }
  fn("meta.pe", p.meta_pe);
  fn("meta.rev_pe", p.meta_rev_pe);
  fn("meta.te", p.meta_te);
  fn("meta.rev_te", p.meta_rev_te);
  fn("meta.ce", p.meta_ce);
  for (std::size_t i = 0; i < p.second.size(); ++i) {
    visit_layer("second." + std::to_string(i) + ".", p.second[i], fn);
  }
  fn("label_emb", p.label_emb);
  fn("classifier", p.classifier);
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool is_bias(const std::string& name) {
  const auto leaf = std::string_view(name).substr(name.rfind('.') + 1);
  return leaf == "bias" || (leaf.size() == 2 && leaf[0] == 'b');
}

void add_row(std::span<double> dst, std::span<const double> src) {
  for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
}

}  // namespace

ModelParams ModelParams::zeros(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t h = cfg.hidden, f = cfg.hidden * cfg.ffn_mult;
  ModelParams p;
  p.token_emb = Matrix(std::max<std::size_t>(cfg.vocab_size, kReservedTokens), h);
  p.pos_emb = Matrix(cfg.tokens_per_chunk, h);
  for (std::size_t i = 0; i < cfg.enc_layers; ++i) p.encoder.push_back(layer_zeros(h, f));
  for (Matrix* m : {&p.meta_pe, &p.meta_rev_pe, &p.meta_te, &p.meta_rev_te}) {
    *m = Matrix(cfg.max_chunks, h);
  }
  p.meta_ce = Matrix(std::max<std::size_t>(cfg.num_categories, 1), h);
  for (std::size_t i = 0; i < cfg.second_layers; ++i) p.second.push_back(layer_zeros(h, f));
  p.label_emb = Matrix(cfg.num_labels, h);
  p.classifier = Matrix(cfg.num_labels, h);
  return p;
}

void ModelParams::for_each(const std::function<void(const std::string&, Matrix&)>& fn) {
  visit(*this, fn);
}

void ModelParams::for_each(const std::function<void(const std::string&, const Matrix&)>& fn) const {
  visit(*this, fn);
}

std::vector<std::pair<std::string, Matrix*>> ModelParams::tensors() {
  std::vector<std::pair<std::string, Matrix*>> out;
  for_each([&](const std::string& name, Matrix& m) { out.emplace_back(name, &m); });
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for_each([&](const std::string&, const Matrix& m) { n += m.size(); });
  return n;
}

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams p = ModelParams::zeros(cfg);
  Rng rng(seed);
  p.for_each([&](const std::string& name, Matrix& m) {
    if (name.starts_with("meta.")) {
      for (double& v : m.flat()) v = rng.normal(0.0, 0.1);
    } else if (ends_with(name, ".gain")) {
      for (double& v : m.flat()) v = 1.0;
    } else if (is_bias(name)) {
      // LayerNorm and linear biases stay zero.
    } else {
      const bool table = ends_with(name, "_emb") || name == "classifier";
      const double fan_in = static_cast<double>(table ? m.cols() : m.rows());
      const double a = 1.0 / std::sqrt(fan_in);
      for (double& v : m.flat()) v = rng.uniform(-a, a);
    }
  });
  return p;
}

Matrix ChunkEncodings::dense() const {
  const std::size_t h = hidden();
  Matrix out(chunks.size() * tokens_per_chunk, h);
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    for (std::size_t i = 0; i < chunks[c].rows(); ++i) {
      std::copy_n(chunks[c].row(i).begin(), h, out.row(c * tokens_per_chunk + i).begin());
    }
  }
  return out;
}

Matrix ChunkEncodings::stacked() const {
  std::size_t rows = 0;
  for (const auto& c : chunks) rows += c.rows();
  Matrix out(rows, hidden());
  std::size_t r = 0;
  for (const auto& c : chunks) {
    std::copy(c.flat().begin(), c.flat().end(), out.row(r).begin());
    r += c.rows();
  }
  return out;
}

Matrix ForwardTrace::dense_H() const {
  Matrix out(mask.size(), H.cols());
  for (std::size_t r = 0; r < positions.size(); ++r) {
    std::copy_n(H.row(r).begin(), H.cols(), out.row(positions[r]).begin());
  }
  return out;
}

Matrix ForwardTrace::dense_A() const {
  Matrix out(mask.size(), A.cols());
  for (std::size_t r = 0; r < positions.size(); ++r) {
    std::copy_n(A.row(r).begin(), A.cols(), out.row(positions[r]).begin());
  }
  return out;
}

ChunkEncodings chunk_encoder_forward(const ModelParams& params, const ModelConfig& cfg,
                                     const std::vector<Chunk>& chunks,
                                     std::vector<std::vector<layers::EncoderLayerCache>>* caches) {
  if (chunks.size() > cfg.max_chunks) throw std::invalid_argument("more chunks than max_chunks");
  const std::size_t h = cfg.hidden;
  ChunkEncodings enc;
  enc.tokens_per_chunk = cfg.tokens_per_chunk;
  if (caches) caches->assign(chunks.size(), std::vector<layers::EncoderLayerCache>(cfg.enc_layers));
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    const Chunk& ch = chunks[c];
    if (ch.token_ids.size() != cfg.tokens_per_chunk || ch.real_len == 0 ||
        ch.real_len > cfg.tokens_per_chunk) {
      throw std::invalid_argument("chunk length does not match tokens_per_chunk");
    }
    Matrix x(ch.real_len, h);
    for (std::size_t i = 0; i < ch.real_len; ++i) {
      const auto tok = static_cast<std::size_t>(ch.token_ids[i]);
      if (tok >= params.token_emb.rows()) throw std::out_of_range("token id outside vocabulary");
      auto r = x.row(i);
      add_row(r, params.token_emb.row(tok));
      add_row(r, params.pos_emb.row(i));
    }
    for (std::size_t l = 0; l < cfg.enc_layers; ++l) {
      layers::EncoderLayerCache scratch;
      auto& cache = caches ? (*caches)[c][l] : scratch;
      x = layers::encoder_layer_forward(x, params.encoder[l], cfg.enc_heads, cache);
    }
    enc.chunks.push_back(std::move(x));
  }
  return enc;
}

namespace {

template <typename Fn>
void for_enabled_meta(const Chunk& ch, const MetaFlags& flags, Fn&& fn) {
  const auto& m = ch.meta;
  if (flags.pe) fn(m.pe, 0);
  if (flags.rev_pe) fn(m.rev_pe, 1);
  if (flags.te) fn(m.te, 2);
  if (flags.rev_te) fn(m.rev_te, 3);
  if (flags.ce) fn(m.ce, 4);
}

template <typename P>
auto& meta_table(P& params, int family) {
  switch (family) {
    case 0:
      return params.meta_pe;
    case 1:
      return params.meta_rev_pe;
    case 2:
      return params.meta_te;
    case 3:
      return params.meta_rev_te;
    default:
      return params.meta_ce;
  }
}

}  // namespace

void apply_meta_embeddings(ChunkEncodings& enc, const std::vector<Chunk>& chunks,
                           const ModelParams& params, const MetaFlags& flags) {
  if (enc.chunks.size() != chunks.size()) throw std::invalid_argument("encodings/chunks size mismatch");
  for (std::size_t c = 0; c < chunks.size(); ++c) {
    std::vector<double> sum(enc.hidden(), 0.0);
    bool any = false;
    for_enabled_meta(chunks[c], flags, [&](std::size_t index, int family) {
      const Matrix& table = meta_table(params, family);
      if (index >= table.rows()) throw std::out_of_range("meta index outside embedding table");
      add_row(sum, table.row(index));
      any = true;
    });
    if (!any) continue;
    for (std::size_t i = 0; i < enc.chunks[c].rows(); ++i) add_row(enc.chunks[c].row(i), sum);
  }
}

Matrix cross_chunk_forward(const Matrix& tokens, const ModelParams& params, const ModelConfig& cfg,
                           std::vector<layers::EncoderLayerCache>* caches) {
  if (caches) caches->assign(cfg.second_layers, {});
  Matrix x = tokens;
  for (std::size_t l = 0; l < cfg.second_layers; ++l) {
    layers::EncoderLayerCache scratch;
    x = layers::encoder_layer_forward(x, params.second[l], cfg.second_heads,
                                      caches ? (*caches)[l] : scratch);
  }
  return x;
}

LabelAttention label_attention(const Matrix& H, std::span<const std::uint8_t> mask,
                               const Matrix& alpha) {
  if (mask.size() != H.rows()) throw std::invalid_argument("label_attention: mask size mismatch");
  if (std::none_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; })) {
    throw std::invalid_argument("label_attention: every position is masked");
  }
  LabelAttention out;
  kernels::gemm_nt(H, alpha, out.A);
  const std::size_t rows = H.rows(), labels = alpha.rows();
  for (std::size_t l = 0; l < labels; ++l) {
    double mx = -INFINITY;
    for (std::size_t i = 0; i < rows; ++i) {
      if (mask[i]) mx = std::max(mx, out.A(i, l));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
      const double e = mask[i] ? std::exp(out.A(i, l) - mx) : 0.0;
      out.A(i, l) = e;
      sum += e;
    }
    const double inv = 1.0 / sum;
    for (std::size_t i = 0; i < rows; ++i) out.A(i, l) *= inv;
  }
  kernels::gemm_tn(H, out.A, out.V);
  return out;
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::vector<double> classify_logits(const Matrix& V, const Matrix& W) {
  if (V.cols() != W.rows() || V.rows() != W.cols()) throw std::invalid_argument("classify: shape mismatch");
  std::vector<double> z(W.rows(), 0.0);
  for (std::size_t l = 0; l < W.rows(); ++l) {
    double s = 0.0;
    for (std::size_t k = 0; k < W.cols(); ++k) s += W(l, k) * V(k, l);
    z[l] = s;
  }
  return z;
}

std::vector<double> classify(const Matrix& V, const Matrix& W) {
  auto z = classify_logits(V, W);
  for (double& v : z) v = sigmoid(v);
  return z;
}

ForwardTrace model_forward(const ModelParams& params, const ModelConfig& cfg,
                           const std::vector<Chunk>& chunks) {
  if (chunks.empty()) throw std::invalid_argument("model_forward: no chunks");
  ForwardTrace t;
  t.n_chunks = chunks.size();
  t.tokens_per_chunk = cfg.tokens_per_chunk;
  t.cls_only = cfg.cls_only;
  for (const auto& c : chunks) {
    t.caches.real_len.push_back(c.real_len);
    t.caches.tokens.push_back(c.token_ids);
    t.caches.meta.push_back(c.meta);
  }

  ChunkEncodings enc = chunk_encoder_forward(params, cfg, chunks, &t.caches.encoder);
  apply_meta_embeddings(enc, chunks, params, cfg.meta);

  Matrix x;
  if (cfg.cls_only) {
    x.resize(chunks.size(), cfg.hidden);
    for (std::size_t c = 0; c < chunks.size(); ++c) {
      std::copy_n(enc.chunks[c].row(0).begin(), cfg.hidden, x.row(c).begin());
      t.positions.push_back(c);
    }
    t.mask.assign(chunks.size(), 1);
  } else {
    x = enc.stacked();
    t.mask.assign(chunks.size() * cfg.tokens_per_chunk, 0);
    for (std::size_t c = 0; c < chunks.size(); ++c) {
      for (std::size_t i = 0; i < chunks[c].real_len; ++i) {
        t.positions.push_back(c * cfg.tokens_per_chunk + i);
        t.mask[c * cfg.tokens_per_chunk + i] = 1;
      }
    }
  }

  t.H = cross_chunk_forward(x, params, cfg, &t.caches.second);
  const std::vector<std::uint8_t> valid(t.H.rows(), 1);
  auto la = label_attention(t.H, valid, params.label_emb);
  t.A = std::move(la.A);
  t.V = std::move(la.V);
  t.logits = classify_logits(t.V, params.classifier);
  t.probs = t.logits;
  for (double& v : t.probs) v = sigmoid(v);
  return t;
}

void model_backward(const ModelParams& params, const ModelConfig& cfg, const ForwardTrace& trace,
                    std::span<const double> targets, double scale, ModelParams& grads) {
  const std::size_t nl = params.classifier.rows(), h = cfg.hidden;
  if (targets.size() != nl) throw std::invalid_argument("model_backward: target size mismatch");

  // classifier
  Matrix dV(h, nl);
  for (std::size_t l = 0; l < nl; ++l) {
    const double dz = scale * (trace.probs[l] - targets[l]) / static_cast<double>(nl);
    for (std::size_t k = 0; k < h; ++k) {
      grads.classifier(l, k) += dz * trace.V(k, l);
      dV(k, l) = dz * params.classifier(l, k);
    }
  }

  // label attention: V = H^T A, A = colsoftmax(H alpha^T)
  Matrix dH;
  kernels::gemm_nt(trace.A, dV, dH);
  Matrix dS;
  kernels::gemm_nn(trace.H, dV, dS);
  for (std::size_t l = 0; l < nl; ++l) {
    double dot = 0.0;
    for (std::size_t i = 0; i < dS.rows(); ++i) dot += trace.A(i, l) * dS(i, l);
    for (std::size_t i = 0; i < dS.rows(); ++i) dS(i, l) = trace.A(i, l) * (dS(i, l) - dot);
  }
  kernels::gemm_nn(dS, params.label_emb, dH, true);
  kernels::gemm_tn(dS, trace.H, grads.label_emb, true);

  // cross-chunk transformer
  for (std::size_t l = cfg.second_layers; l-- > 0;) {
    dH = layers::encoder_layer_backward(dH, params.second[l], cfg.second_heads,
                                        trace.caches.second[l], grads.second[l]);
  }

  // back to per-chunk rows, through the meta embeddings and the encoder
  std::size_t row = 0;
  for (std::size_t c = 0; c < trace.n_chunks; ++c) {
    const std::size_t n = trace.caches.real_len[c];
    Matrix dchunk(n, h);
    if (cfg.cls_only) {
      std::copy_n(dH.row(c).begin(), h, dchunk.row(0).begin());
    } else {
      std::copy_n(dH.row(row).begin(), n * h, dchunk.row(0).begin());
      row += n;
    }

    std::vector<double> colsum(h, 0.0);
    for (std::size_t i = 0; i < n; ++i) add_row(colsum, dchunk.row(i));
    Chunk meta_only;
    meta_only.meta = trace.caches.meta[c];
    for_enabled_meta(meta_only, cfg.meta, [&](std::size_t index, int family) {
      add_row(meta_table(grads, family).row(index), colsum);
    });

    for (std::size_t l = cfg.enc_layers; l-- > 0;) {
      dchunk = layers::encoder_layer_backward(dchunk, params.encoder[l], cfg.enc_heads,
                                              trace.caches.encoder[c][l], grads.encoder[l]);
    }
    const auto& toks = trace.caches.tokens[c];
    for (std::size_t i = 0; i < n; ++i) {
      add_row(grads.token_emb.row(static_cast<std::size_t>(toks[i])), dchunk.row(i));
      add_row(grads.pos_emb.row(i), dchunk.row(i));
    }
  }

  grads.for_each([](const std::string& name, const Matrix& m) {
    for (double v : m.flat()) {
      if (!std::isfinite(v)) throw NumericError("non-finite gradient in " + name);
    }
  });
}

}  // namespace htds

// wellcast/transformer.hpp — encoder-decoder transformer adapted for
// sequence-to-one forecasting: the decoder consumes a single token, the
// embedded last row of the input window, and a linear head maps its output
// to the target scalar.
#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "wellcast/errors.hpp"
#include "wellcast/model_config.hpp"
#include "wellcast/rng.hpp"
#include "wellcast/tensor.hpp"

namespace wellcast {

struct AttentionParams {
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
};

struct FeedForwardParams {
  Tensor w1, b1, w2, b2;  // [d_ff x d_model] and [d_model x d_ff]
};

struct LayerNormParams {
  Tensor gain, offset;  // [1 x d_model]
};

struct EncoderLayer {
  AttentionParams attn;
  FeedForwardParams ff;
  LayerNormParams ln_attn, ln_ff;
};

struct DecoderLayer {
  AttentionParams self_attn, cross_attn;
  FeedForwardParams ff;
  LayerNormParams ln_self, ln_cross, ln_ff;
};

enum class HeadKind { linear, mlp };

inline std::string to_string(HeadKind k) { return k == HeadKind::linear ? "linear" : "mlp"; }
inline HeadKind head_kind_from_string(const std::string& s) {
  if (s == "linear") return HeadKind::linear;
  if (s == "mlp") return HeadKind::mlp;
  throw ConfigError("unknown head kind '" + s + "'");
}

struct TransformerParams {
  int input = 0;
  int window = 0;
  int d_model = 0;
  int n_heads = 0;
  int d_ff = 0;
  double dropout = 0.0;

  Tensor embed_w, embed_b;  // [d_model x M], [1 x d_model]
  std::vector<EncoderLayer> encoder;
  std::vector<DecoderLayer> decoder;

  // Fresh models carry a single linear head; fine-tuning swaps in a two
  // layer head with a ReLU in between.
  HeadKind head = HeadKind::linear;
  Tensor head_w, head_b;                      // [1 x d_model], [1 x 1]
  Tensor head_w1, head_b1, head_w2, head_b2;  // [dh x d_model], [1 x dh], [1 x dh], [1 x 1]
};

namespace detail {

inline Tensor init_mat(int r, int c, int fan_in, Rng& rng) {
  return Tensor::uniform(r, c, 1.0 / std::sqrt(static_cast<double>(fan_in)), rng).requires_grad();
}

inline AttentionParams init_attention(int d_model, Rng& rng) {
  AttentionParams a;
  a.wq = init_mat(d_model, d_model, d_model, rng);
  a.bq = init_mat(1, d_model, d_model, rng);
  a.wk = init_mat(d_model, d_model, d_model, rng);
  a.bk = init_mat(1, d_model, d_model, rng);
  a.wv = init_mat(d_model, d_model, d_model, rng);
  a.bv = init_mat(1, d_model, d_model, rng);
  a.wo = init_mat(d_model, d_model, d_model, rng);
  a.bo = init_mat(1, d_model, d_model, rng);
  return a;
}

inline FeedForwardParams init_ff(int d_model, int d_ff, Rng& rng) {
  FeedForwardParams f;
  f.w1 = init_mat(d_ff, d_model, d_model, rng);
  f.b1 = init_mat(1, d_ff, d_model, rng);
  f.w2 = init_mat(d_model, d_ff, d_ff, rng);
  f.b2 = init_mat(1, d_model, d_ff, rng);
  return f;
}

inline LayerNormParams init_ln(int d_model) {
  LayerNormParams l;
  l.gain = Tensor::full(1, d_model, 1.0).requires_grad();
  l.offset = Tensor::zeros(1, d_model).requires_grad();
  return l;
}

}  // namespace detail

inline void attach_mlp_head(TransformerParams& p, Rng& rng) {
  const int dh = p.d_model;  // hidden width of the replacement head
  p.head = HeadKind::mlp;
  p.head_w = Tensor();
  p.head_b = Tensor();
  p.head_w1 = detail::init_mat(dh, p.d_model, p.d_model, rng);
  p.head_b1 = detail::init_mat(1, dh, p.d_model, rng);
  p.head_w2 = detail::init_mat(1, dh, dh, rng);
  p.head_b2 = detail::init_mat(1, 1, dh, rng);
}

inline TransformerParams init_transformer(const ModelConfig& cfg, Rng& rng) {
  TransformerParams p;
  p.input = cfg.input_size;
  p.window = cfg.window;
  p.d_model = cfg.d_model;
  p.n_heads = cfg.n_heads;
  p.d_ff = cfg.d_ff;
  p.dropout = cfg.dropout;

  p.embed_w = detail::init_mat(cfg.d_model, cfg.input_size, cfg.input_size, rng);
  p.embed_b = detail::init_mat(1, cfg.d_model, cfg.input_size, rng);
  for (int i = 0; i < cfg.n_enc_layers; ++i) {
    EncoderLayer l;
    l.attn = detail::init_attention(cfg.d_model, rng);
    l.ff = detail::init_ff(cfg.d_model, cfg.d_ff, rng);
    l.ln_attn = detail::init_ln(cfg.d_model);
    l.ln_ff = detail::init_ln(cfg.d_model);
    p.encoder.push_back(std::move(l));
  }
  for (int i = 0; i < cfg.n_dec_layers; ++i) {
    DecoderLayer l;
    l.self_attn = detail::init_attention(cfg.d_model, rng);
    l.cross_attn = detail::init_attention(cfg.d_model, rng);
    l.ff = detail::init_ff(cfg.d_model, cfg.d_ff, rng);
    l.ln_self = detail::init_ln(cfg.d_model);
    l.ln_cross = detail::init_ln(cfg.d_model);
    l.ln_ff = detail::init_ln(cfg.d_model);
    p.decoder.push_back(std::move(l));
  }
  p.head_w = detail::init_mat(1, cfg.d_model, cfg.d_model, rng);
  p.head_b = detail::init_mat(1, 1, cfg.d_model, rng);
  return p;
}

// Fixed sinusoidal table: PE(pos, 2i) = sin(pos / 10000^(2i/d_model)),
// PE(pos, 2i+1) = cos of the same argument.
inline Tensor positional_encoding(int length, int d_model) {
  if (d_model % 2 != 0) throw ContractError("positional_encoding: d_model must be even");
  Tensor pe = Tensor::zeros(length, d_model);
  for (int pos = 0; pos < length; ++pos) {
    for (int i = 0; i < d_model / 2; ++i) {
      const double freq = std::pow(10000.0, 2.0 * i / static_cast<double>(d_model));
      pe(pos, 2 * i) = std::sin(pos / freq);
      pe(pos, 2 * i + 1) = std::cos(pos / freq);
    }
  }
  return pe;
}

// Per-evaluation switches. Dropout draws come from `rng` and only happen in
// training mode.
struct ForwardContext {
  bool training = false;
  Rng* rng = nullptr;
  double ln_eps = 1e-6;
  // When set, every attention-weight matrix (one [rows x keys] tensor per
  // head) is appended here in evaluation order.
  std::vector<Tensor>* attention_out = nullptr;
};

// Scaled dot-product attention over head slices of full-width projections.
// Padded rows are not masked; zero rows take part as ordinary tokens.
inline Tensor multi_head_attention(const Tensor& query, const Tensor& key, const Tensor& value,
                                   const AttentionParams& p, int n_heads,
                                   const ForwardContext& ctx) {
  const int d_model = p.wq.rows();
  if (query.cols() != d_model || key.cols() != d_model || value.cols() != d_model) {
    throw DimensionError("multi_head_attention: inputs must have " + std::to_string(d_model) +
                         " columns, got " + query.shape_str() + ", " + key.shape_str() + ", " +
                         value.shape_str());
  }
  if (key.rows() != value.rows()) {
    throw DimensionError("multi_head_attention: key rows " + key.shape_str() +
                         " vs value rows " + value.shape_str());
  }
  const int d_k = d_model / n_heads;
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(d_k));

  const Tensor q = add_rowvec(matmul(query, transpose(p.wq)), p.bq);
  const Tensor k = add_rowvec(matmul(key, transpose(p.wk)), p.bk);
  const Tensor v = add_rowvec(matmul(value, transpose(p.wv)), p.bv);

  std::vector<Tensor> heads;
  heads.reserve(n_heads);
  for (int h = 0; h < n_heads; ++h) {
    const Tensor qh = slice_cols(q, h * d_k, (h + 1) * d_k);
    const Tensor kh = slice_cols(k, h * d_k, (h + 1) * d_k);
    const Tensor vh = slice_cols(v, h * d_k, (h + 1) * d_k);
    const Tensor weights = softmax_rows(scale(matmul(qh, transpose(kh)), inv_sqrt_dk));
    if (ctx.attention_out) ctx.attention_out->push_back(weights);
    heads.push_back(matmul(weights, vh));
  }
  return add_rowvec(matmul(hconcat(heads), transpose(p.wo)), p.bo);
}

namespace detail {

inline Tensor maybe_dropout(const Tensor& x, double p, const ForwardContext& ctx) {
  if (!ctx.training || p <= 0.0) return x;
  if (!ctx.rng) throw ContractError("transformer: training forward requires an rng");
  return dropout(x, p, *ctx.rng);
}

inline Tensor feed_forward(const Tensor& x, const FeedForwardParams& f) {
  const Tensor hidden = relu(add_rowvec(matmul(x, transpose(f.w1)), f.b1));
  return add_rowvec(matmul(hidden, transpose(f.w2)), f.b2);
}

}  // namespace detail

// Embed -> positional encoding -> encoder stack; decoder runs on the single
// embedded last input row (with its own position) and cross-attends to the
// encoder memory; the head maps the token to the scalar prediction.
// Residual connections are followed by layer normalization (post-norm).
inline Tensor transformer_forward(const Tensor& window, const TransformerParams& p,
                                  const ForwardContext& ctx = {}) {
  if (window.rows() != p.window) {
    throw ContractError("transformer_forward: expected " + std::to_string(p.window) +
                        " rows, got " + window.shape_str());
  }
  if (window.cols() != p.input) {
    throw DimensionError("transformer_forward: window " + window.shape_str() +
                         " vs input size " + std::to_string(p.input));
  }
  const int n = window.rows();

  const Tensor embedded = add_rowvec(matmul(window, transpose(p.embed_w)), p.embed_b);
  const Tensor enc_input = add(embedded, positional_encoding(n, p.d_model));

  Tensor memory = enc_input;
  for (const auto& layer : p.encoder) {
    const Tensor attn =
        detail::maybe_dropout(multi_head_attention(memory, memory, memory, layer.attn,
                                                   p.n_heads, ctx),
                              p.dropout, ctx);
    memory = layer_norm(add(memory, attn), layer.ln_attn.gain, layer.ln_attn.offset, ctx.ln_eps);
    const Tensor ff = detail::maybe_dropout(detail::feed_forward(memory, layer.ff), p.dropout, ctx);
    memory = layer_norm(add(memory, ff), layer.ln_ff.gain, layer.ln_ff.offset, ctx.ln_eps);
  }

  // Single decoder token: the embedded last data point, position included.
  Tensor token = slice_rows(enc_input, n - 1, n);
  for (const auto& layer : p.decoder) {
    const Tensor self_attn = detail::maybe_dropout(
        multi_head_attention(token, token, token, layer.self_attn, p.n_heads, ctx), p.dropout,
        ctx);
    token = layer_norm(add(token, self_attn), layer.ln_self.gain, layer.ln_self.offset,
                       ctx.ln_eps);
    const Tensor cross = detail::maybe_dropout(
        multi_head_attention(token, memory, memory, layer.cross_attn, p.n_heads, ctx), p.dropout,
        ctx);
    token = layer_norm(add(token, cross), layer.ln_cross.gain, layer.ln_cross.offset, ctx.ln_eps);
    const Tensor ff = detail::maybe_dropout(detail::feed_forward(token, layer.ff), p.dropout, ctx);
    token = layer_norm(add(token, ff), layer.ln_ff.gain, layer.ln_ff.offset, ctx.ln_eps);
  }

  if (p.head == HeadKind::linear) {
    return add(matmul(token, transpose(p.head_w)), p.head_b);
  }
  const Tensor hidden = relu(add_rowvec(matmul(token, transpose(p.head_w1)), p.head_b1));
  return add(matmul(hidden, transpose(p.head_w2)), p.head_b2);
}

inline std::vector<std::pair<std::string, Tensor>> transformer_parameters(
    const TransformerParams& p) {
  std::vector<std::pair<std::string, Tensor>> out;
  out.push_back({"embed.w", p.embed_w});
  out.push_back({"embed.b", p.embed_b});
  auto add_attention = [&out](const std::string& prefix, const AttentionParams& a) {
    out.push_back({prefix + ".wq", a.wq});
    out.push_back({prefix + ".bq", a.bq});
    out.push_back({prefix + ".wk", a.wk});
    out.push_back({prefix + ".bk", a.bk});
    out.push_back({prefix + ".wv", a.wv});
    out.push_back({prefix + ".bv", a.bv});
    out.push_back({prefix + ".wo", a.wo});
    out.push_back({prefix + ".bo", a.bo});
  };
  auto add_ff = [&out](const std::string& prefix, const FeedForwardParams& f) {
    out.push_back({prefix + ".w1", f.w1});
    out.push_back({prefix + ".b1", f.b1});
    out.push_back({prefix + ".w2", f.w2});
    out.push_back({prefix + ".b2", f.b2});
  };
  auto add_ln = [&out](const std::string& prefix, const LayerNormParams& l) {
    out.push_back({prefix + ".g", l.gain});
    out.push_back({prefix + ".b", l.offset});
  };
  for (std::size_t i = 0; i < p.encoder.size(); ++i) {
    const std::string pre = "enc" + std::to_string(i);
    add_attention(pre + ".attn", p.encoder[i].attn);
    add_ff(pre + ".ff", p.encoder[i].ff);
    add_ln(pre + ".ln_attn", p.encoder[i].ln_attn);
    add_ln(pre + ".ln_ff", p.encoder[i].ln_ff);
  }
  for (std::size_t i = 0; i < p.decoder.size(); ++i) {
    const std::string pre = "dec" + std::to_string(i);
    add_attention(pre + ".self", p.decoder[i].self_attn);
    add_attention(pre + ".cross", p.decoder[i].cross_attn);
    add_ff(pre + ".ff", p.decoder[i].ff);
    add_ln(pre + ".ln_self", p.decoder[i].ln_self);
    add_ln(pre + ".ln_cross", p.decoder[i].ln_cross);
    add_ln(pre + ".ln_ff", p.decoder[i].ln_ff);
  }
  if (p.head == HeadKind::linear) {
    out.push_back({"head.w", p.head_w});
    out.push_back({"head.b", p.head_b});
  } else {
    out.push_back({"head.w1", p.head_w1});
    out.push_back({"head.b1", p.head_b1});
    out.push_back({"head.w2", p.head_w2});
    out.push_back({"head.b2", p.head_b2});
  }
  return out;
}

}  // namespace wellcast

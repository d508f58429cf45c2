// wellcast/recurrent.hpp — many-to-one recurrent networks: vanilla RNN cell,
// LSTM (with and without output gate), GRU, and the shared linear head.
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

// Gate weights act on the concatenation [h, x], so they are [H x (H+M)].
// The `paper` LSTM variant has no output gate: h' = c_hat * tanh(c').
struct RecurrentParams {
  Architecture kind = Architecture::rnn;
  LstmVariant variant = LstmVariant::standard;
  int hidden = 0;
  int input = 0;
  int window = 0;

  // vanilla rnn
  Tensor rnn_wx, rnn_wh, rnn_b;
  // lstm gates: forget, input, candidate, output
  Tensor lstm_wf, lstm_bf, lstm_wi, lstm_bi, lstm_wc, lstm_bc, lstm_wo, lstm_bo;
  // gru gates: update, reset, candidate
  Tensor gru_wz, gru_bz, gru_wr, gru_br, gru_wh, gru_bh;
  // linear output head
  Tensor head_w, head_b;
};

inline RecurrentParams init_recurrent(const ModelConfig& cfg, Rng& rng) {
  const int h = cfg.hidden_size, m = cfg.input_size;
  RecurrentParams p;
  p.kind = cfg.architecture;
  p.variant = cfg.lstm_variant;
  p.hidden = h;
  p.input = m;
  p.window = cfg.window;

  auto mat = [&rng](int r, int c, int fan_in) {
    return Tensor::uniform(r, c, 1.0 / std::sqrt(static_cast<double>(fan_in)), rng)
        .requires_grad();
  };

  switch (p.kind) {
    case Architecture::rnn:
      p.rnn_wx = mat(h, m, m);
      p.rnn_wh = mat(h, h, h);
      p.rnn_b = mat(h, 1, m);
      break;
    case Architecture::lstm:
      p.lstm_wf = mat(h, h + m, h + m);
      p.lstm_bf = mat(h, 1, h + m);
      p.lstm_wi = mat(h, h + m, h + m);
      p.lstm_bi = mat(h, 1, h + m);
      p.lstm_wc = mat(h, h + m, h + m);
      p.lstm_bc = mat(h, 1, h + m);
      if (p.variant == LstmVariant::standard) {
        p.lstm_wo = mat(h, h + m, h + m);
        p.lstm_bo = mat(h, 1, h + m);
      }
      break;
    case Architecture::gru:
      p.gru_wz = mat(h, h + m, h + m);
      p.gru_bz = mat(h, 1, h + m);
      p.gru_wr = mat(h, h + m, h + m);
      p.gru_br = mat(h, 1, h + m);
      p.gru_wh = mat(h, h + m, h + m);
      p.gru_bh = mat(h, 1, h + m);
      break;
    case Architecture::transformer:
      throw ContractError("init_recurrent: transformer config");
  }
  p.head_w = mat(1, h, h);
  p.head_b = mat(1, 1, h);
  return p;
}

// h' = sigmoid(W_x x + W_h h + b)
inline Tensor rnn_step(const Tensor& x, const Tensor& h, const RecurrentParams& p) {
  return sigmoid(add(add(matmul(p.rnn_wx, x), matmul(p.rnn_wh, h)), p.rnn_b));
}

// Returns (h', c').
inline std::pair<Tensor, Tensor> lstm_step(const Tensor& x, const Tensor& h, const Tensor& c,
                                           const RecurrentParams& p) {
  const Tensor hx = vconcat(h, x);
  const Tensor f = sigmoid(add(matmul(p.lstm_wf, hx), p.lstm_bf));
  const Tensor i = sigmoid(add(matmul(p.lstm_wi, hx), p.lstm_bi));
  const Tensor c_hat = tanh(add(matmul(p.lstm_wc, hx), p.lstm_bc));
  const Tensor c_next = add(mul(f, c), mul(i, c_hat));
  Tensor h_next;
  if (p.variant == LstmVariant::paper) {
    h_next = mul(c_hat, tanh(c_next));
  } else {
    const Tensor o = sigmoid(add(matmul(p.lstm_wo, hx), p.lstm_bo));
    h_next = mul(o, tanh(c_next));
  }
  return {h_next, c_next};
}

// h' = (1 - z) * h + z * h_hat, with the reset gate applied to h inside the
// candidate.
inline Tensor gru_step(const Tensor& x, const Tensor& h, const RecurrentParams& p) {
  const Tensor hx = vconcat(h, x);
  const Tensor z = sigmoid(add(matmul(p.gru_wz, hx), p.gru_bz));
  const Tensor r = sigmoid(add(matmul(p.gru_wr, hx), p.gru_br));
  const Tensor h_hat = tanh(add(matmul(p.gru_wh, vconcat(mul(r, h), x)), p.gru_bh));
  const Tensor one = Tensor::full(z.rows(), 1, 1.0);
  return add(mul(sub(one, z), h), mul(z, h_hat));
}

// Stateless many-to-one pass: zero initial state, iterate the cell over the
// window rows in time order, map the last hidden state through the head.
inline Tensor recurrent_forward(const Tensor& window, const RecurrentParams& p) {
  if (window.cols() != p.input) {
    throw DimensionError("recurrent_forward: window " + window.shape_str() + " vs input size " +
                         std::to_string(p.input));
  }
  const int n = window.rows();
  Tensor h = Tensor::zeros(p.hidden, 1);
  Tensor c = Tensor::zeros(p.hidden, 1);
  for (int t = 0; t < n; ++t) {
    const Tensor x = transpose(slice_rows(window, t, t + 1));
    switch (p.kind) {
      case Architecture::rnn:
        h = rnn_step(x, h, p);
        break;
      case Architecture::lstm: {
        auto [hn, cn] = lstm_step(x, h, c, p);
        h = hn;
        c = cn;
        break;
      }
      case Architecture::gru:
        h = gru_step(x, h, p);
        break;
      case Architecture::transformer:
        throw ContractError("recurrent_forward: transformer params");
    }
  }
  return add(matmul(p.head_w, h), p.head_b);
}

inline std::vector<std::pair<std::string, Tensor>> recurrent_parameters(
    const RecurrentParams& p) {
  std::vector<std::pair<std::string, Tensor>> out;
  switch (p.kind) {
    case Architecture::rnn:
      out = {{"rnn.wx", p.rnn_wx}, {"rnn.wh", p.rnn_wh}, {"rnn.b", p.rnn_b}};
      break;
    case Architecture::lstm:
      out = {{"lstm.wf", p.lstm_wf}, {"lstm.bf", p.lstm_bf}, {"lstm.wi", p.lstm_wi},
             {"lstm.bi", p.lstm_bi}, {"lstm.wc", p.lstm_wc}, {"lstm.bc", p.lstm_bc}};
      if (p.variant == LstmVariant::standard) {
        out.push_back({"lstm.wo", p.lstm_wo});
        out.push_back({"lstm.bo", p.lstm_bo});
      }
      break;
    case Architecture::gru:
      out = {{"gru.wz", p.gru_wz}, {"gru.bz", p.gru_bz}, {"gru.wr", p.gru_wr},
             {"gru.br", p.gru_br}, {"gru.wh", p.gru_wh}, {"gru.bh", p.gru_bh}};
      break;
    case Architecture::transformer:
      break;
  }
  out.push_back({"head.w", p.head_w});
  out.push_back({"head.b", p.head_b});
  return out;
}

}  // namespace wellcast

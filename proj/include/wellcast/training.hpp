// wellcast/training.hpp — MSE training with Adam, averaged-norm gradient
// clipping, validation-based checkpoint selection, and transfer-learning
// fine-tuning (head replacement + warm-up epoch + reduced learning rate).
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "wellcast/checkpoint.hpp"
#include "wellcast/data.hpp"
#include "wellcast/errors.hpp"
#include "wellcast/model.hpp"
#include "wellcast/rng.hpp"
#include "wellcast/tensor.hpp"

namespace wellcast {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class ClipMode { automatic, on, off };

inline std::string to_string(ClipMode m) {
  switch (m) {
    case ClipMode::automatic: return "auto";
    case ClipMode::on: return "on";
    case ClipMode::off: return "off";
  }
  return "?";
}

inline ClipMode clip_mode_from_string(const std::string& s) {
  if (s == "auto") return ClipMode::automatic;
  if (s == "on") return ClipMode::on;
  if (s == "off") return ClipMode::off;
  throw ConfigError("unknown clip mode '" + s + "'");
}

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 300;
  int batch_size = 16;
  int clip_warmup_epochs = 3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 7;
  bool shuffle = true;
  // Clipping applies to recurrent models; the transformer runs unclipped
  // unless explicitly turned on.
  ClipMode clip = ClipMode::automatic;

  bool clip_enabled(Architecture arch) const {
    switch (clip) {
      case ClipMode::on: return true;
      case ClipMode::off: return false;
      case ClipMode::automatic: return arch != Architecture::transformer;
    }
    return false;
  }

  void validate() const {
    if (learning_rate < 0.0) throw ConfigError("train: learning_rate must be >= 0");
    if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (clip_warmup_epochs < 1) throw ConfigError("train: clip_warmup_epochs must be >= 1");
    if (beta1 <= 0.0 || beta1 >= 1.0 || beta2 <= 0.0 || beta2 >= 1.0) {
      throw ConfigError("train: Adam betas must lie in (0, 1)");
    }
    if (eps <= 0.0) throw ConfigError("train: eps must be positive");
  }

  nlohmann::json to_json() const {
    return {{"learning_rate", learning_rate},
            {"epochs", epochs},
            {"batch_size", batch_size},
            {"clip_warmup_epochs", clip_warmup_epochs},
            {"beta1", beta1},
            {"beta2", beta2},
            {"eps", eps},
            {"seed", seed},
            {"shuffle", shuffle},
            {"clip", to_string(clip)}};
  }

  static TrainConfig from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.learning_rate = j.at("learning_rate").get<double>();
    c.epochs = j.at("epochs").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.clip_warmup_epochs = j.at("clip_warmup_epochs").get<int>();
    c.beta1 = j.at("beta1").get<double>();
    c.beta2 = j.at("beta2").get<double>();
    c.eps = j.at("eps").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.shuffle = j.at("shuffle").get<bool>();
    c.clip = clip_mode_from_string(j.at("clip").get<std::string>());
    return c;
  }
};

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

inline Tensor mse_loss(const std::vector<Tensor>& preds, const std::vector<double>& targets) {
  if (preds.size() != targets.size() || preds.empty()) {
    throw ContractError("mse_loss: need equal, nonzero prediction/target counts (" +
                        std::to_string(preds.size()) + " vs " + std::to_string(targets.size()) +
                        ")");
  }
  Tensor acc;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const Tensor diff = sub(preds[i], Tensor::scalar(targets[i]));
    const Tensor sq = mul(diff, diff);
    acc = i == 0 ? sq : add(acc, sq);
  }
  return scale(acc, 1.0 / static_cast<double>(preds.size()));
}

inline double mse_value(const std::vector<double>& preds, const std::vector<double>& targets) {
  if (preds.size() != targets.size() || preds.empty()) {
    throw ContractError("mse_value: need equal, nonzero prediction/target counts");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double d = preds[i] - targets[i];
    acc += d * d;
  }
  return acc / static_cast<double>(preds.size());
}

// Scaled-unit predictions over a sample list, evaluation mode.
inline std::vector<double> predict_scaled(const Model& model, const std::vector<Sample>& samples) {
  Tape::NoGradGuard eval_only;
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(model.forward(s.window).value());
  return out;
}

inline double dataset_mse(const Model& model, const std::vector<Sample>& samples) {
  if (samples.empty()) throw ContractError("dataset_mse: empty sample list");
  std::vector<double> targets;
  targets.reserve(samples.size());
  for (const auto& s : samples) targets.push_back(s.target);
  return mse_value(predict_scaled(model, samples), targets);
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamState {
  struct Moments {
    std::vector<double> m, v;
  };
  std::vector<Moments> slots;  // aligned with the model's parameter order
  long long step = 0;

  void ensure(const std::vector<std::pair<std::string, Tensor>>& params) {
    if (!slots.empty()) return;
    slots.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      slots[i].m.assign(params[i].second.size(), 0.0);
      slots[i].v.assign(params[i].second.size(), 0.0);
    }
  }
};

// One Adam step over all parameters. With apply_updates=false the moment
// buffers and step counter advance but no parameter changes (warm-up).
inline void adam_update(std::vector<std::pair<std::string, Tensor>>& params, AdamState& state,
                        double lr, double beta1, double beta2, double eps,
                        bool apply_updates = true) {
  state.ensure(params);
  if (state.slots.size() != params.size()) {
    throw ContractError("adam_update: optimizer state does not match parameter list");
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& [name, p] = params[pi];
    const std::vector<double>& g = p.grad();
    auto& m = state.slots[pi].m;
    auto& v = state.slots[pi].v;
    double* values = p.data().data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i])) {
        throw NumericError("adam_update: non-finite gradient in parameter '" + name + "'");
      }
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      if (apply_updates) {
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        values[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Gradient clipping with averaged-norm threshold
// ---------------------------------------------------------------------------

inline double global_grad_norm(const std::vector<std::pair<std::string, Tensor>>& params) {
  double sq = 0.0;
  for (const auto& [name, p] : params) {
    for (double g : p.grad()) sq += g * g;
  }
  return std::sqrt(sq);
}

enum class ClipPhase { warmup, active };

struct ClipState {
  std::vector<double> warmup_norms;
  bool frozen = false;
  double threshold = std::numeric_limits<double>::quiet_NaN();

  // threshold := arithmetic mean of the accumulated warm-up norms
  void freeze() {
    if (warmup_norms.empty()) {
      throw ContractError("clip_gradients: active phase before any warm-up accumulation");
    }
    double sum = 0.0;
    for (double n : warmup_norms) sum += n;
    threshold = sum / static_cast<double>(warmup_norms.size());
    frozen = true;
  }
};

struct ClipOutcome {
  double pre_norm = 0.0;
  double post_norm = 0.0;
  bool clipped = false;
};

inline ClipOutcome clip_gradients(std::vector<std::pair<std::string, Tensor>>& params,
                                  ClipState& state, ClipPhase phase) {
  ClipOutcome out;
  out.pre_norm = global_grad_norm(params);
  out.post_norm = out.pre_norm;
  if (phase == ClipPhase::warmup) {
    state.warmup_norms.push_back(out.pre_norm);
    return out;
  }
  if (!state.frozen) state.freeze();
  if (out.pre_norm > state.threshold && out.pre_norm > 0.0) {
    const double factor = state.threshold / out.pre_norm;
    for (auto& [name, p] : params) {
      for (double& g : p.grad()) g *= factor;
    }
    out.post_norm = global_grad_norm(params);
    out.clipped = true;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct StepRecord {
  int epoch = 0;  // -1 for the fine-tune warm-up pass
  int step = 0;
  double pre_norm = 0.0;
  double post_norm = 0.0;
  bool clipped = false;
};

struct TrainDiagnostics {
  std::vector<StepRecord> steps;
  std::vector<double> warmup_norms;
  double clip_threshold = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  Checkpoint checkpoint;       // best-validation snapshot; model left restored to it
  TrainDiagnostics diagnostics;
};

namespace detail {

struct LoopState {
  AdamState adam;
  ClipState clip;
  Rng shuffle_rng;
  Rng dropout_rng;
  bool clip_on = false;
};

// One pass over the training split. Returns the mean per-sample loss seen
// while updating (training-mode forward).
inline double run_epoch(Model& model, const std::vector<Sample>& train, const TrainConfig& cfg,
                        double lr, bool apply_updates, int epoch_index, LoopState& state,
                        TrainDiagnostics& diagnostics, bool& any_clipped, double& mean_norm) {
  auto params = model.parameters();
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  if (cfg.shuffle) state.shuffle_rng.shuffle(order);

  double loss_sum = 0.0;
  double norm_sum = 0.0;
  any_clipped = false;
  int step = 0;
  for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
    const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
    zero_grad(params);
    std::vector<Tensor> preds;
    std::vector<double> targets;
    preds.reserve(stop - start);
    targets.reserve(stop - start);
    ForwardContext ctx;
    ctx.training = true;
    ctx.rng = &state.dropout_rng;
    for (std::size_t i = start; i < stop; ++i) {
      const Sample& s = train[order[i]];
      preds.push_back(model.forward(s.window, ctx));
      targets.push_back(s.target);
    }
    Tensor loss = mse_loss(preds, targets);
    const double loss_value = loss.value();
    if (!std::isfinite(loss_value)) {
      throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch_index) +
                         ", batch " + std::to_string(step));
    }
    loss.backward();

    ClipOutcome clip_outcome;
    if (state.clip_on) {
      const ClipPhase phase = state.clip.frozen ? ClipPhase::active : ClipPhase::warmup;
      clip_outcome = clip_gradients(params, state.clip, phase);
    } else {
      clip_outcome.pre_norm = global_grad_norm(params);
      clip_outcome.post_norm = clip_outcome.pre_norm;
    }
    diagnostics.steps.push_back(
        {epoch_index, step, clip_outcome.pre_norm, clip_outcome.post_norm, clip_outcome.clipped});
    any_clipped = any_clipped || clip_outcome.clipped;
    norm_sum += clip_outcome.pre_norm;

    adam_update(params, state.adam, lr, cfg.beta1, cfg.beta2, cfg.eps, apply_updates);
    loss_sum += loss_value * static_cast<double>(stop - start);
    ++step;
  }
  mean_norm = step > 0 ? norm_sum / step : 0.0;
  return loss_sum / static_cast<double>(order.size());
}

}  // namespace detail

// Trains in place; returns the minimum-validation-MSE snapshot (the model is
// left restored to it) together with per-step clipping diagnostics.
inline TrainResult train(Model& model, const DatasetSplits& splits, const TrainConfig& cfg) {
  cfg.validate();
  if (splits.train.empty() || splits.validation.empty()) {
    throw ContractError("train: train and validation splits must be non-empty");
  }

  detail::LoopState state{AdamState{}, ClipState{}, Rng(cfg.seed).fork(21),
                          Rng(cfg.seed).fork(22), cfg.clip_enabled(model.config.architecture)};

  TrainResult result;
  Checkpoint& best = result.checkpoint;
  best.model_config = model.config;
  best.head = model.head_kind();
  best.params = snapshot_params(model);
  best.epoch = -1;
  best.val_mse = dataset_mse(model, splits.validation);

  std::vector<EpochLog> history;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (state.clip_on && !state.clip.frozen && epoch >= cfg.clip_warmup_epochs) {
      state.clip.freeze();
    }
    bool any_clipped = false;
    double mean_norm = 0.0;
    const double train_mse = detail::run_epoch(model, splits.train, cfg, cfg.learning_rate, true,
                                               epoch, state, result.diagnostics, any_clipped,
                                               mean_norm);
    const double val_mse = dataset_mse(model, splits.validation);
    history.push_back({epoch, train_mse, val_mse, mean_norm, any_clipped, cfg.learning_rate});
    if (val_mse < best.val_mse) {
      best.params = snapshot_params(model);
      best.epoch = epoch;
      best.val_mse = val_mse;
    }
  }
  best.history = history;
  result.diagnostics.warmup_norms = state.clip.warmup_norms;
  result.diagnostics.clip_threshold = state.clip.threshold;
  restore_params(model, best.params);
  return result;
}

// Transfer learning: replace the pretrained transformer's output layer with
// a two-layer ReLU head, run one warm-up epoch that only accumulates Adam
// moments, then train the whole model at a ten times smaller learning rate.
inline TrainResult fine_tune(const Checkpoint& pretrained, Model& model,
                             const DatasetSplits& target_splits, const TrainConfig& cfg,
                             const FeatureSet& target_features) {
  cfg.validate();
  if (pretrained.model_config.architecture != Architecture::transformer) {
    throw ContractError("transfer learning requires a transformer checkpoint; got " +
                        to_string(pretrained.model_config.architecture));
  }
  if (!(pretrained.features == target_features)) {
    throw ContractError("fine_tune: feature set of the target well does not match the "
                        "pretrained checkpoint");
  }
  if (target_splits.train.empty() || target_splits.validation.empty()) {
    throw ContractError("fine_tune: train and validation splits must be non-empty");
  }

  // Rebuild the pretrained model, then swap the head for a fresh one.
  model = model_from_checkpoint(pretrained);
  {
    auto& p = std::get<TransformerParams>(model.params);
    Rng head_rng = Rng(cfg.seed).fork(23);
    attach_mlp_head(p, head_rng);
  }

  detail::LoopState state{AdamState{}, ClipState{}, Rng(cfg.seed).fork(21),
                          Rng(cfg.seed).fork(22), cfg.clip_enabled(Architecture::transformer)};

  TrainResult result;
  std::vector<EpochLog> history;

  // Warm-up epoch: gradient statistics only, zero parameter change.
  {
    bool any_clipped = false;
    double mean_norm = 0.0;
    const double warm_mse = detail::run_epoch(model, target_splits.train, cfg, 0.0, false, -1,
                                              state, result.diagnostics, any_clipped, mean_norm);
    const double val_mse = dataset_mse(model, target_splits.validation);
    history.push_back({-1, warm_mse, val_mse, mean_norm, any_clipped, 0.0});
  }

  Checkpoint& best = result.checkpoint;
  best.model_config = model.config;
  best.head = model.head_kind();
  best.features = pretrained.features;
  best.params = snapshot_params(model);
  best.epoch = -1;
  best.val_mse = dataset_mse(model, target_splits.validation);

  const double fine_lr = cfg.learning_rate / 10.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (state.clip_on && !state.clip.frozen && epoch >= cfg.clip_warmup_epochs) {
      state.clip.freeze();
    }
    bool any_clipped = false;
    double mean_norm = 0.0;
    const double train_mse = detail::run_epoch(model, target_splits.train, cfg, fine_lr, true,
                                               epoch, state, result.diagnostics, any_clipped,
                                               mean_norm);
    const double val_mse = dataset_mse(model, target_splits.validation);
    history.push_back({epoch, train_mse, val_mse, mean_norm, any_clipped, fine_lr});
    if (val_mse < best.val_mse) {
      best.params = snapshot_params(model);
      best.epoch = epoch;
      best.val_mse = val_mse;
    }
  }
  best.history = history;
  result.diagnostics.warmup_norms = state.clip.warmup_norms;
  result.diagnostics.clip_threshold = state.clip.threshold;
  restore_params(model, best.params);
  return result;
}

}  // namespace wellcast

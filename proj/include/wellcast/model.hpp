// wellcast/model.hpp — the architecture-tagged model: construction,
// forward dispatch, parameter enumeration, snapshots.
#pragma once

#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "wellcast/errors.hpp"
#include "wellcast/model_config.hpp"
#include "wellcast/recurrent.hpp"
#include "wellcast/rng.hpp"
#include "wellcast/transformer.hpp"

namespace wellcast {

struct Model {
  ModelConfig config;
  std::variant<RecurrentParams, TransformerParams> params;

  Tensor forward(const Tensor& window, const ForwardContext& ctx = {}) const {
    if (const auto* rec = std::get_if<RecurrentParams>(&params)) {
      return recurrent_forward(window, *rec);
    }
    return transformer_forward(window, std::get<TransformerParams>(params), ctx);
  }

  std::vector<std::pair<std::string, Tensor>> parameters() const {
    if (const auto* rec = std::get_if<RecurrentParams>(&params)) {
      return recurrent_parameters(*rec);
    }
    return transformer_parameters(std::get<TransformerParams>(params));
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : parameters()) n += t.size();
    return n;
  }

  HeadKind head_kind() const {
    if (const auto* tr = std::get_if<TransformerParams>(&params)) return tr->head;
    return HeadKind::linear;
  }
};

// Seeded construction; the parameter initialization order is fixed, so a
// (config, seed) pair pins every weight bitwise.
inline Model build_model(const ModelConfig& cfg, HeadKind head = HeadKind::linear) {
  cfg.validate();
  Model m;
  m.config = cfg;
  Rng rng = Rng(cfg.seed).fork(11);  // init stream
  if (cfg.architecture == Architecture::transformer) {
    TransformerParams p = init_transformer(cfg, rng);
    if (head == HeadKind::mlp) attach_mlp_head(p, rng);
    m.params = std::move(p);
  } else {
    if (head == HeadKind::mlp) {
      throw ContractError("build_model: mlp head is a transformer feature");
    }
    m.params = init_recurrent(cfg, rng);
  }
  return m;
}

// Values-only snapshot of every named parameter.
using ParamSnapshot = std::vector<std::pair<std::string, std::vector<double>>>;

inline ParamSnapshot snapshot_params(const Model& m) {
  ParamSnapshot snap;
  for (const auto& [name, t] : m.parameters()) snap.push_back({name, t.data()});
  return snap;
}

inline void restore_params(Model& m, const ParamSnapshot& snap) {
  auto params = m.parameters();
  if (params.size() != snap.size()) {
    throw ContractError("restore_params: " + std::to_string(snap.size()) + " stored tensors vs " +
                        std::to_string(params.size()) + " model parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].first != snap[i].first || params[i].second.size() != snap[i].second.size()) {
      throw ContractError("restore_params: mismatch at '" + snap[i].first + "'");
    }
    params[i].second.data() = snap[i].second;
  }
}

}  // namespace wellcast

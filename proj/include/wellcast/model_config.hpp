// wellcast/model_config.hpp — architecture tags and hyperparameters.
#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "wellcast/errors.hpp"

namespace wellcast {

enum class Architecture { rnn, lstm, gru, transformer };
enum class LstmVariant { paper, standard };

inline std::string to_string(Architecture a) {
  switch (a) {
    case Architecture::rnn: return "rnn";
    case Architecture::lstm: return "lstm";
    case Architecture::gru: return "gru";
    case Architecture::transformer: return "transformer";
  }
  return "?";
}

inline Architecture architecture_from_string(const std::string& s) {
  if (s == "rnn") return Architecture::rnn;
  if (s == "lstm") return Architecture::lstm;
  if (s == "gru") return Architecture::gru;
  if (s == "transformer") return Architecture::transformer;
  throw ConfigError("unknown architecture '" + s + "'");
}

inline std::string to_string(LstmVariant v) {
  return v == LstmVariant::paper ? "paper" : "standard";
}

inline LstmVariant lstm_variant_from_string(const std::string& s) {
  if (s == "paper") return LstmVariant::paper;
  if (s == "standard") return LstmVariant::standard;
  throw ConfigError("unknown lstm variant '" + s + "'");
}

struct ModelConfig {
  Architecture architecture = Architecture::transformer;
  int window = 14;      // N, input sequence length in days
  int input_size = 0;   // M, feature count; resolved when datasets are built
  // recurrent
  int hidden_size = 32;
  LstmVariant lstm_variant = LstmVariant::standard;
  // transformer (reduced-capacity defaults; the global model doubles
  // d_model and d_ff)
  int d_model = 32;
  int n_heads = 4;
  int n_enc_layers = 2;
  int n_dec_layers = 1;
  int d_ff = 64;
  double dropout = 0.1;

  std::uint64_t seed = 7;

  nlohmann::json to_json() const {
    return {{"architecture", to_string(architecture)},
            {"window", window},
            {"input_size", input_size},
            {"hidden_size", hidden_size},
            {"lstm_variant", to_string(lstm_variant)},
            {"d_model", d_model},
            {"n_heads", n_heads},
            {"n_enc_layers", n_enc_layers},
            {"n_dec_layers", n_dec_layers},
            {"d_ff", d_ff},
            {"dropout", dropout},
            {"seed", seed}};
  }

  static ModelConfig from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.architecture = architecture_from_string(j.at("architecture").get<std::string>());
    c.window = j.at("window").get<int>();
    c.input_size = j.at("input_size").get<int>();
    c.hidden_size = j.at("hidden_size").get<int>();
    c.lstm_variant = lstm_variant_from_string(j.at("lstm_variant").get<std::string>());
    c.d_model = j.at("d_model").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.n_enc_layers = j.at("n_enc_layers").get<int>();
    c.n_dec_layers = j.at("n_dec_layers").get<int>();
    c.d_ff = j.at("d_ff").get<int>();
    c.dropout = j.at("dropout").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
  }

  void validate() const {
    if (window < 1) throw ConfigError("model: window must be >= 1");
    if (input_size < 1) throw ConfigError("model: input_size must be >= 1");
    if (architecture == Architecture::transformer) {
      if (d_model < 1 || n_heads < 1 || n_enc_layers < 1 || n_dec_layers < 1 || d_ff < 1) {
        throw ConfigError("model: transformer dimensions must be positive");
      }
      if (d_model % n_heads != 0) {
        throw ConfigError("model: d_model (" + std::to_string(d_model) +
                          ") must be divisible by n_heads (" + std::to_string(n_heads) + ")");
      }
      if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("model: dropout must lie in [0, 1)");
    } else if (hidden_size < 1) {
      throw ConfigError("model: hidden_size must be >= 1");
    }
  }
};

}  // namespace wellcast

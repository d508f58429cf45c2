// wellcast/checkpoint.hpp — versioned JSON checkpoint container.
#pragma once

#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "wellcast/data.hpp"
#include "wellcast/errors.hpp"
#include "wellcast/model.hpp"

namespace wellcast {

inline constexpr const char* kCheckpointFormat = "wellcast-checkpoint";
inline constexpr int kCheckpointVersion = 1;

struct EpochLog {
  int epoch = 0;  // -1 marks the fine-tune warm-up pass
  double train_mse = 0.0;
  double val_mse = 0.0;
  double grad_norm = 0.0;
  bool clipped = false;
  double lr = 0.0;

  nlohmann::json to_json() const {
    return {{"epoch", epoch},       {"train_mse", train_mse}, {"val_mse", val_mse},
            {"grad_norm", grad_norm}, {"clipped", clipped},     {"lr", lr}};
  }

  static EpochLog from_json(const nlohmann::json& j) {
    EpochLog e;
    e.epoch = j.at("epoch").get<int>();
    e.train_mse = j.at("train_mse").get<double>();
    e.val_mse = j.at("val_mse").get<double>();
    e.grad_norm = j.at("grad_norm").get<double>();
    e.clipped = j.at("clipped").get<bool>();
    e.lr = j.at("lr").get<double>();
    return e;
  }
};

struct Checkpoint {
  ModelConfig model_config;
  HeadKind head = HeadKind::linear;
  FeatureSet features;
  std::vector<std::string> wells;              // id order defines the one-hot layout
  std::map<std::string, ScalerParams> scalers; // per well id
  ParamSnapshot params;
  int epoch = -1;       // -1 = initial parameters (no epoch improved on them)
  double val_mse = std::numeric_limits<double>::quiet_NaN();
  std::vector<EpochLog> history;
};

inline nlohmann::json feature_set_to_json(const FeatureSet& fs) {
  return {{"mode", to_string(fs.mode)},
          {"target", to_string(fs.target)},
          {"features", fs.features}};
}

inline FeatureSet feature_set_from_json(const nlohmann::json& j) {
  FeatureSet fs;
  fs.mode = feature_mode_from_string(j.at("mode").get<std::string>());
  fs.target = target_from_string(j.at("target").get<std::string>());
  fs.features = j.at("features").get<std::vector<std::string>>();
  return fs;
}

inline nlohmann::json checkpoint_to_json(const Checkpoint& ck) {
  nlohmann::json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["model"] = ck.model_config.to_json();
  j["head"] = to_string(ck.head);
  j["features"] = feature_set_to_json(ck.features);
  j["wells"] = ck.wells;
  nlohmann::json scalers = nlohmann::json::object();
  for (const auto& [id, sc] : ck.scalers) scalers[id] = sc.to_json();
  j["scalers"] = scalers;
  nlohmann::json params = nlohmann::json::array();
  for (const auto& [name, values] : ck.params) {
    params.push_back({{"name", name}, {"values", values}});
  }
  j["params"] = params;
  j["epoch"] = ck.epoch;
  j["val_mse"] = ck.val_mse;
  nlohmann::json history = nlohmann::json::array();
  for (const auto& e : ck.history) history.push_back(e.to_json());
  j["history"] = history;
  return j;
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != kCheckpointFormat) {
    throw ConfigError("not a " + std::string(kCheckpointFormat) + " file");
  }
  if (j.at("version").get<int>() != kCheckpointVersion) {
    throw ConfigError("unsupported checkpoint version " + j.at("version").dump());
  }
  Checkpoint ck;
  ck.model_config = ModelConfig::from_json(j.at("model"));
  ck.head = head_kind_from_string(j.at("head").get<std::string>());
  ck.features = feature_set_from_json(j.at("features"));
  ck.wells = j.at("wells").get<std::vector<std::string>>();
  for (auto it = j.at("scalers").begin(); it != j.at("scalers").end(); ++it) {
    ck.scalers[it.key()] = ScalerParams::from_json(it.value());
  }
  for (const auto& p : j.at("params")) {
    ck.params.push_back({p.at("name").get<std::string>(),
                         p.at("values").get<std::vector<double>>()});
  }
  ck.epoch = j.at("epoch").get<int>();
  ck.val_mse = j.at("val_mse").get<double>();
  for (const auto& e : j.at("history")) ck.history.push_back(EpochLog::from_json(e));
  return ck;
}

// Write-then-rename; a failed run leaves no partial file behind.
inline void atomic_write_file(const std::filesystem::path& path, const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write file '" + tmp.string() + "'");
    out << content;
    if (!out.flush()) throw DataError("failed writing '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  atomic_write_file(path, checkpoint_to_json(ck).dump(2) + "\n");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open checkpoint '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("checkpoint '" + path.string() + "': " + e.what());
  }
  return checkpoint_from_json(j);
}

// Rebuilds the model a checkpoint describes and loads its weights.
inline Model model_from_checkpoint(const Checkpoint& ck) {
  Model m = build_model(ck.model_config, ck.head);
  restore_params(m, ck.params);
  return m;
}

}  // namespace wellcast

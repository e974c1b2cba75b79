#pragma once

#include <string>
#include <vector>

#include "core/gbdt.hpp"
#include "core/model.hpp"

namespace ltr {

struct TrainConfig {
  ModelKind kind = ModelKind::kTwoTower;
  LossConfig loss;
  size_t hidden = 32;
  size_t blocks = 2;
  double dropout = 0.0;
  double learning_rate = 1e-3;
  size_t batch_size = 100;
  size_t epochs = 3;
  double valid_fraction = 0.05;
  int cutoff = 15;
  uint64_t seed = 1;
  size_t d_cat = 0;   // 0 keeps the dataset schema's embedding dims
  size_t d_text = 0;
  std::string preset_name;

  void validate() const;
  ojson to_json() const;
  static TrainConfig from_json(const json& j, const std::string& path);
  static TrainConfig preset(const std::string& name, ModelKind kind);
};

struct TrainResult {
  ModelArtifact artifact;
  ojson log = ojson::array();  // per-epoch (neural) or per-round (gbdt) entries
  double final_loss = 0.0;
  double final_train_ndcg = 0.0;
};

TrainResult train_neural(const Dataset& data, const TrainConfig& cfg,
                         std::vector<std::string>* warnings = nullptr);

TrainResult train_gbdt_model(const Dataset& data, const GbdtConfig& cfg);

// Reference scorers share the artifact container so evaluation and comparison
// treat them like any trained model.
ModelArtifact make_random_model(uint64_t seed, const FeatureSchema& schema);
ModelArtifact make_oracle_model(const Dataset& d);

}  // namespace ltr

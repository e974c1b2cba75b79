#pragma once

#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "core/data.hpp"
#include "core/gbdt.hpp"
#include "core/rankers.hpp"

namespace ltr {

enum class ModelKind { kTwoTower, kCrossEncoder, kTransformer, kGbdt, kRandom, kOracle };

std::string model_kind_name(ModelKind k);
ModelKind model_kind_from(const std::string& s);

// Position-hash baseline: scores depend only on (seed, list index, position).
struct RandomScorer {
  uint64_t seed = 0;
  double score(size_t list_index, size_t position) const;
};

// Scores with the generator's hidden utility; the ceiling for learned models.
struct PlantedOracle {
  GeneratorConfig config;
  std::shared_ptr<const PlantedUtility> util;

  static PlantedOracle create(const GeneratorConfig& cfg);
};

struct ModelArtifact {
  std::string name;
  ModelKind kind = ModelKind::kRandom;
  FeatureSchema schema;
  EmbeddingTables tables;  // neural kinds only
  std::variant<TwoTowerModel, CrossEncoderModel, TransformerModel, GbdtEnsemble,
               RandomScorer, PlantedOracle>
      impl;
  ojson hyper;  // training provenance: arch sizes, loss, optimizer settings
};

// Layout must match for every kind that reads features; the random baseline
// ignores them and accepts any dataset.
void check_schema_compatible(const ModelArtifact& m, const Dataset& d);

std::vector<double> score_list(const ModelArtifact& m, const Dataset& d, size_t list_index);

void save_model(const ModelArtifact& m, const std::string& path);
ModelArtifact load_model(const std::string& path);

}  // namespace ltr

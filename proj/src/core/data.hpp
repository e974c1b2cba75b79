#pragma once

#include <string>
#include <utility>
#include <vector>

#include "core/features.hpp"
#include "core/jsonio.hpp"
#include "core/losses.hpp"

namespace ltr {

struct InteractionList {
  ContextFeatures context;
  std::vector<ProductFeatures> products;
  LabelVector y_c;
  LabelVector y_o;
  int64_t ts = 0;
};

struct Provenance {
  uint64_t seed = 0;
  std::string generator_version;
};

struct Dataset {
  FeatureSchema schema;
  std::vector<InteractionList> lists;
  Provenance provenance;
  ojson generator_config;  // null for ingested data
};

struct GenTextSlot {
  size_t vocab = 2;
  size_t dim = 1;
  size_t max_words = 4;
};

struct GeneratorConfig {
  size_t lists = 2000;
  size_t min_products = 10;
  size_t max_products = 30;
  std::vector<NumericKind> numeric{NumericKind::kPowerLaw, NumericKind::kZScore,
                                   NumericKind::kZScore, NumericKind::kPowerLaw};
  std::vector<EmbedSlot> product_cat{{50, 8}, {12, 4}};
  std::vector<GenTextSlot> product_text{{120, 8, 6}};
  std::vector<EmbedSlot> context_cat{{20, 8}};
  std::vector<GenTextSlot> context_text{{60, 8, 4}};
  double click_base_rate = 0.15;
  double order_rate = 0.4;
  double steepness = 6.0;
  uint64_t utility_seed = 7;
  int64_t ts_start = 1735689600;
  int64_t ts_span = 2592000;
  int max_resample = 64;

  void validate() const;
  FeatureSchema schema() const;
  ojson to_json() const;
  static GeneratorConfig from_json(const json& j, const std::string& path);
  static GeneratorConfig preset(const std::string& name);
};

// The hidden relevance function behind generated labels. Reconstructable from
// the generator config alone, so an oracle scorer can be built from dataset
// provenance. Scores raw features; probe-standardized to mean 0, std 1.
class PlantedUtility {
 public:
  explicit PlantedUtility(const GeneratorConfig& cfg);

  double utility(const ContextFeatures& c, const ProductFeatures& p) const;
  double click_prob(double u) const;
  double order_prob_given_click(double u) const;

  ContextFeatures sample_context(Rng& rng) const;
  ProductFeatures sample_product(Rng& rng) const;

 private:
  double raw_utility(const ContextFeatures& c, const ProductFeatures& p) const;

  GeneratorConfig cfg_;
  std::vector<double> num_mu_, num_sigma_, num_logscale_, w_num_;
  std::vector<std::vector<double>> w_pcat_, w_ptext_, w_ccat_, w_ctext_;
  std::vector<double> w_inter_;  // [context_cat0.vocab x product_cat0.vocab]
  double u_mean_ = 0.0;
  double u_std_ = 1.0;
  double intercept_ = 0.0;
};

Dataset generate_synthetic_dataset(const GeneratorConfig& cfg, uint64_t seed);

// Earliest ceil(fraction * count) lists become train; strictly later lists
// become test. Boundary ties go to train.
std::pair<Dataset, Dataset> temporal_split(const Dataset& d, double train_fraction);

void save_dataset(const Dataset& d, const std::string& jsonl_path,
                  const std::string& schema_path);
Dataset load_dataset(const std::string& jsonl_path, const std::string& schema_path,
                     std::vector<std::string>* warnings = nullptr);

// Fits numeric normalization stats over every product in d (call on the
// training split only). Returns clamp warnings.
std::vector<std::string> fit_schema_stats(Dataset& d);

}  // namespace ltr

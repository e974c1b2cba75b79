#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "core/common.hpp"
#include "core/features.hpp"
#include "core/jsonio.hpp"
#include "core/losses.hpp"

namespace ltr {

struct Dataset;

struct LambdaGrad {
  std::vector<double> lambda;
  std::vector<double> hessian;
};

// Pairwise sigmoid gradients weighted by the NDCG change of swapping the pair,
// truncated at the cutoff. Labels may be graded (any value >= 0); pairs are
// formed where label_i > label_j.
LambdaGrad compute_lambda_gradients(std::span<const double> scores,
                                    std::span<const int> labels, int cutoff);

// Column-major so split search walks one contiguous column per feature.
struct FeatureMatrix {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> data;

  FeatureMatrix() = default;
  FeatureMatrix(size_t r, size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double at(size_t r, size_t c) const { return data[c * rows + r]; }
  double& at(size_t r, size_t c) { return data[c * rows + r]; }
  const double* col(size_t c) const { return data.data() + c * rows; }
};

// Per feature: row indices ordered by (value asc, row index asc).
std::vector<std::vector<uint32_t>> presort_features(const FeatureMatrix& m);

struct TreeConfig {
  int max_depth = 6;
  int num_leaves = 25;
  int min_samples_leaf = 20;

  void validate() const;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;
  int leaves = 0;
  int depth = 0;

  double predict_row(std::span<const double> x) const;
  double predict_row(const FeatureMatrix& m, size_t row) const;
};

RegressionTree fit_regression_tree(const FeatureMatrix& m,
                                   const std::vector<std::vector<uint32_t>>& presort,
                                   std::span<const double> lambdas,
                                   std::span<const double> hessians,
                                   const TreeConfig& cfg);
RegressionTree fit_regression_tree(const FeatureMatrix& m, std::span<const double> lambdas,
                                   std::span<const double> hessians, const TreeConfig& cfg);

struct GbdtEnsemble {
  std::vector<RegressionTree> trees;
  double learning_rate = 0.1;
  size_t num_features = 0;

  double predict_row(std::span<const double> x) const;
  std::vector<double> predict(const FeatureMatrix& m) const;

  ojson to_json() const;
  static GbdtEnsemble from_json(const json& j, const std::string& path);
};

enum class GbdtLabelMode { kClicks, kGraded };
std::string gbdt_label_mode_name(GbdtLabelMode m);
GbdtLabelMode gbdt_label_mode_from(const std::string& s);

struct GbdtConfig {
  int trees = 100;
  double learning_rate = 0.1;
  TreeConfig tree;
  int cutoff = 15;
  GbdtLabelMode labels = GbdtLabelMode::kClicks;

  void validate() const;
  ojson to_json() const;
  static GbdtConfig from_json(const json& j, const std::string& path);
  static GbdtConfig preset(const std::string& name);
};

// Trees consume raw features, bypassing the embedding pipeline: product
// numerics, product categorical ids, product text bag sizes, then the list's
// context categorical ids and context text bag sizes repeated per product.
size_t gbdt_feature_count(const FeatureSchema& schema);
void gbdt_fill_row(const FeatureSchema& schema, const ContextFeatures& c,
                   const ProductFeatures& p, double* out);

struct PooledRows {
  FeatureMatrix features;
  std::vector<size_t> list_offsets;  // size lists+1; list i spans [off[i], off[i+1])
  std::vector<int> labels;
};

PooledRows pool_dataset_rows(const Dataset& d, GbdtLabelMode mode);

struct GbdtRoundLog {
  int round = 0;
  double train_ndcg_c = 0.0;
  double seconds = 0.0;
};

struct GbdtTrainResult {
  GbdtEnsemble ensemble;
  std::vector<GbdtRoundLog> log;
};

GbdtTrainResult train_lambdamart(const Dataset& train, const GbdtConfig& cfg);

}  // namespace ltr

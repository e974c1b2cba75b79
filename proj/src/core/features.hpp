#pragma once

#include <string>
#include <vector>

#include "core/jsonio.hpp"
#include "core/tensor.hpp"

namespace ltr {

enum class NumericKind { kZScore, kPowerLaw };

const char* numeric_kind_name(NumericKind k);
NumericKind numeric_kind_from(const std::string& name);

struct NumericField {
  NumericKind kind = NumericKind::kZScore;
  double mean = 0.0;
  double std_dev = 1.0;
  bool clamped = false;  // true when a zero-variance column forced std_dev to 1
};

// One categorical or textual slot; vocab counts the unknown row at index 0.
struct EmbedSlot {
  size_t vocab = 2;
  size_t dim = 1;
};

struct FeatureSchema {
  std::vector<NumericField> numeric;
  std::vector<EmbedSlot> product_cat;
  std::vector<EmbedSlot> product_text;
  std::vector<EmbedSlot> context_cat;
  std::vector<EmbedSlot> context_text;
  bool fitted = false;

  size_t d_product() const;
  size_t d_context() const;
  void validate() const;
  // True when slot layout (counts, vocabs, kinds) matches; stats and dims may differ.
  bool layout_matches(const FeatureSchema& other) const;

  ojson to_json() const;
  static FeatureSchema from_json(const json& j, const std::string& path);
};

struct ProductFeatures {
  std::vector<double> numeric;
  std::vector<int> categorical;
  std::vector<std::vector<int>> textual;
  double price = 0.0;
};

struct ContextFeatures {
  std::vector<int> categorical;
  std::vector<std::vector<int>> textual;
};

// Content identity of a product: hash of all feature values with text bags in
// canonical (sorted) order. Used as the precompute-store key.
uint64_t product_key(const ProductFeatures& p);

struct EmbeddingTable {
  Tensor rows;  // [vocab x dim]
  bool trainable = true;
};

struct EmbeddingTables {
  std::vector<EmbeddingTable> product_cat;
  std::vector<EmbeddingTable> product_text;
  std::vector<EmbeddingTable> context_cat;
  std::vector<EmbeddingTable> context_text;

  static EmbeddingTables create(const FeatureSchema& schema, Rng& rng);
  std::vector<Tensor*> trainable_params();
};

// Accumulates numeric columns over the training split, then writes the fitted
// stats back; power-law features accumulate in log1p space.
class NumericStatsFitter {
 public:
  explicit NumericStatsFitter(const FeatureSchema& schema);
  void add(const ProductFeatures& p);
  std::vector<std::string> finish(FeatureSchema& schema);

 private:
  std::vector<NumericKind> kinds_;
  std::vector<double> sum_, sumsq_;
  size_t count_ = 0;
};

double normalize_numeric(double x, const NumericField& f);
size_t safe_row(int id, size_t vocab);  // 0 for out-of-range ids
std::vector<double> embed_categorical(int id, const Tensor& table);
std::vector<double> embed_text_bow(const std::vector<int>& bag, const Tensor& table);
std::vector<double> build_product_embedding(const ProductFeatures& p,
                                            const FeatureSchema& schema,
                                            const EmbeddingTables& tables);
std::vector<double> build_context_embedding(const ContextFeatures& c,
                                            const FeatureSchema& schema,
                                            const EmbeddingTables& tables);

// Graph-side builders. Table parameter nodes are created once per graph and
// shared across every list in the batch.
struct TableNodes {
  std::vector<ValueId> product_cat, product_text, context_cat, context_text;
};
TableNodes table_nodes(Graph& g, EmbeddingTables& tables);
ValueId product_matrix_node(Graph& g, const FeatureSchema& schema, const TableNodes& tn,
                            std::span<const ProductFeatures> products);
ValueId context_row_node(Graph& g, const FeatureSchema& schema, const TableNodes& tn,
                         const ContextFeatures& c);

}  // namespace ltr

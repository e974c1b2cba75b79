#pragma once

#include <unordered_map>
#include <vector>

#include "core/features.hpp"
#include "core/tensor.hpp"

namespace ltr {

struct BackboneParams {
  LinearLayer proj;                 // in -> h
  std::vector<LinearLayer> blocks;  // h -> h
  std::vector<Tensor> gains;        // per block [h]
  std::vector<Tensor> shifts;       // per block [h]
  double dropout_rate = 0.0;
  double ln_eps = 1e-5;

  size_t hidden() const { return proj.out_dim(); }
  size_t input_dim() const { return proj.in_dim(); }
  void init(size_t in, size_t h, size_t k, double dropout, Rng& rng);
  std::vector<Tensor*> params();
};

// z_0 = proj(x); z_k = z_{k-1} + LayerNorm(ReLU(Dropout(W z_{k-1} + b)))
std::vector<double> backbone_forward(std::span<const double> x, const BackboneParams& p,
                                     Mode mode, Rng* rng = nullptr);

struct TwoTowerModel {
  BackboneParams product_backbone;  // D_product -> h
  LinearLayer context_layer;        // D_context -> h

  void init(size_t d_product, size_t d_context, size_t h, size_t k, double dropout,
            Rng& rng);
  std::vector<Tensor*> params();
};

struct CrossEncoderModel {
  BackboneParams backbone;  // D_product + D_context -> h
  LinearLayer scorer;       // h -> 1

  void init(size_t d_product, size_t d_context, size_t h, size_t k, double dropout,
            Rng& rng);
  std::vector<Tensor*> params();
};

struct TransformerModel {
  BackboneParams backbone;  // D_product + D_context -> h
  LinearLayer attn_in;      // D_product + D_context -> h
  LinearLayer wq, wk, wv, wo;  // h -> h
  LinearLayer scorer;          // h -> 1

  void init(size_t d_product, size_t d_context, size_t h, size_t k, double dropout,
            Rng& rng);
  std::vector<Tensor*> params();
};

// Plain eval-mode scoring over prebuilt embeddings.
std::vector<double> two_tower_score(const TwoTowerModel& m, std::span<const double> x_c,
                                    const std::vector<std::vector<double>>& x_ps);
std::vector<double> cross_encoder_score(const CrossEncoderModel& m,
                                        std::span<const double> x_c,
                                        const std::vector<std::vector<double>>& x_ps);
std::vector<double> transformer_score(const TransformerModel& m, std::span<const double> x_c,
                                      const std::vector<std::vector<double>>& x_ps);

// Single-head scaled dot-product attention over the list, followed by the
// output projection. No positional signal, no mask, no residual.
std::vector<std::vector<double>> self_attention(const std::vector<std::vector<double>>& u,
                                                const LinearLayer& wq, const LinearLayer& wk,
                                                const LinearLayer& wv, const LinearLayer& wo);

// Graph-side application. Parameter nodes are created once per graph via the
// *_nodes builders and reused across the lists of a batch.
struct BackboneNodes {
  ValueId wproj, bproj;
  std::vector<ValueId> w, b, gain, shift;
};
BackboneNodes backbone_nodes(Graph& g, BackboneParams& p);
ValueId backbone_apply(Graph& g, const BackboneNodes& nodes, const BackboneParams& p,
                       ValueId x, Mode mode, Rng& rng);

struct TwoTowerNodes {
  BackboneNodes bb;
  ValueId w, b;
};
TwoTowerNodes two_tower_nodes(Graph& g, TwoTowerModel& m);
ValueId two_tower_apply(Graph& g, const TwoTowerNodes& nodes, const TwoTowerModel& m,
                        ValueId xp, ValueId xc, Mode mode, Rng& rng);

struct CrossEncoderNodes {
  BackboneNodes bb;
  ValueId ws, bs;
};
CrossEncoderNodes cross_encoder_nodes(Graph& g, CrossEncoderModel& m);
ValueId cross_encoder_apply(Graph& g, const CrossEncoderNodes& nodes,
                            const CrossEncoderModel& m, ValueId xp, ValueId xc, Mode mode,
                            Rng& rng);

struct TransformerNodes {
  BackboneNodes bb;
  ValueId attn_w, attn_b;
  ValueId qw, qb, kw, kb, vw, vb, ow, ob;
  ValueId gw, gb;
};
TransformerNodes transformer_nodes(Graph& g, TransformerModel& m);
ValueId transformer_apply(Graph& g, const TransformerNodes& nodes, const TransformerModel& m,
                          ValueId xp, ValueId xc, Mode mode, Rng& rng);

// Precomputed item embeddings for the Two-Tower serving path, keyed by
// product content hash.
struct PrecomputeStore {
  size_t hidden = 0;
  std::unordered_map<uint64_t, std::vector<double>> items;
};

PrecomputeStore precompute_item_embeddings(const TwoTowerModel& m,
                                           const FeatureSchema& schema,
                                           const EmbeddingTables& tables,
                                           std::span<const ProductFeatures> products);
// Throws a not-found error when a product is missing from the store.
std::vector<double> score_from_store(const TwoTowerModel& m, const FeatureSchema& schema,
                                     const EmbeddingTables& tables,
                                     const PrecomputeStore& store, const ContextFeatures& c,
                                     std::span<const ProductFeatures> products);
void save_store(const PrecomputeStore& store, const std::string& path);
PrecomputeStore load_store(const std::string& path);

}  // namespace ltr

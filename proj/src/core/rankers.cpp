#include "core/rankers.hpp"

#include <cmath>
#include <fstream>

#include "core/jsonio.hpp"

namespace ltr {

void BackboneParams::init(size_t in, size_t h, size_t k, double dropout, Rng& rng) {
  if (k < 1) throw_invalid("backbone needs at least one block");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw_invalid("dropout rate must be in [0, 1)");
  proj = LinearLayer(h, in);
  init_linear(proj.weights, proj.bias, rng);
  blocks.clear();
  gains.clear();
  shifts.clear();
  for (size_t i = 0; i < k; ++i) {
    blocks.emplace_back(h, h);
    init_linear(blocks.back().weights, blocks.back().bias, rng);
    gains.emplace_back(std::vector<size_t>{h}, 1.0);
    shifts.emplace_back(std::vector<size_t>{h}, 0.0);
  }
  dropout_rate = dropout;
}

std::vector<Tensor*> BackboneParams::params() {
  std::vector<Tensor*> ps{&proj.weights, &proj.bias};
  for (size_t i = 0; i < blocks.size(); ++i) {
    ps.push_back(&blocks[i].weights);
    ps.push_back(&blocks[i].bias);
    ps.push_back(&gains[i]);
    ps.push_back(&shifts[i]);
  }
  return ps;
}

std::vector<double> backbone_forward(std::span<const double> x, const BackboneParams& p,
                                     Mode mode, Rng* rng) {
  if (mode == Mode::kTrain && p.dropout_rate > 0.0 && !rng)
    throw_invalid("train-mode backbone with dropout needs an rng");
  std::vector<double> z = linear_forward(x, p.proj);
  for (size_t k = 0; k < p.blocks.size(); ++k) {
    std::vector<double> a = linear_forward(z, p.blocks[k]);
    if (mode == Mode::kTrain && p.dropout_rate > 0.0) a = dropout(a, p.dropout_rate, mode, *rng);
    for (double& v : a) v = v > 0.0 ? v : 0.0;
    a = layer_norm(a, p.gains[k].data, p.shifts[k].data, p.ln_eps);
    for (size_t i = 0; i < z.size(); ++i) z[i] += a[i];
  }
  return z;
}

void TwoTowerModel::init(size_t d_product, size_t d_context, size_t h, size_t k,
                         double dropout, Rng& rng) {
  product_backbone.init(d_product, h, k, dropout, rng);
  context_layer = LinearLayer(h, d_context);
  init_linear(context_layer.weights, context_layer.bias, rng);
}

std::vector<Tensor*> TwoTowerModel::params() {
  auto ps = product_backbone.params();
  ps.push_back(&context_layer.weights);
  ps.push_back(&context_layer.bias);
  return ps;
}

void CrossEncoderModel::init(size_t d_product, size_t d_context, size_t h, size_t k,
                             double dropout, Rng& rng) {
  backbone.init(d_product + d_context, h, k, dropout, rng);
  scorer = LinearLayer(1, h);
  init_linear(scorer.weights, scorer.bias, rng);
}

std::vector<Tensor*> CrossEncoderModel::params() {
  auto ps = backbone.params();
  ps.push_back(&scorer.weights);
  ps.push_back(&scorer.bias);
  return ps;
}

void TransformerModel::init(size_t d_product, size_t d_context, size_t h, size_t k,
                            double dropout, Rng& rng) {
  backbone.init(d_product + d_context, h, k, dropout, rng);
  attn_in = LinearLayer(h, d_product + d_context);
  init_linear(attn_in.weights, attn_in.bias, rng);
  for (LinearLayer* l : {&wq, &wk, &wv, &wo}) {
    *l = LinearLayer(h, h);
    init_linear(l->weights, l->bias, rng);
  }
  scorer = LinearLayer(1, h);
  init_linear(scorer.weights, scorer.bias, rng);
}

std::vector<Tensor*> TransformerModel::params() {
  auto ps = backbone.params();
  for (LinearLayer* l : {&attn_in, &wq, &wk, &wv, &wo, &scorer}) {
    ps.push_back(&l->weights);
    ps.push_back(&l->bias);
  }
  return ps;
}

std::vector<double> two_tower_score(const TwoTowerModel& m, std::span<const double> x_c,
                                    const std::vector<std::vector<double>>& x_ps) {
  std::vector<double> hc = linear_forward(x_c, m.context_layer);
  std::vector<double> s(x_ps.size());
  for (size_t i = 0; i < x_ps.size(); ++i) {
    std::vector<double> hp = backbone_forward(x_ps[i], m.product_backbone, Mode::kEval);
    double acc = 0.0;
    for (size_t j = 0; j < hc.size(); ++j) acc += hc[j] * hp[j];
    s[i] = acc;
  }
  return s;
}

namespace {

std::vector<double> concat2(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out;
  out.reserve(a.size() + b.size());
  out.insert(out.end(), a.begin(), a.end());
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace

std::vector<double> cross_encoder_score(const CrossEncoderModel& m,
                                        std::span<const double> x_c,
                                        const std::vector<std::vector<double>>& x_ps) {
  std::vector<double> s(x_ps.size());
  for (size_t i = 0; i < x_ps.size(); ++i) {
    std::vector<double> hz =
        backbone_forward(concat2(x_ps[i], x_c), m.backbone, Mode::kEval);
    s[i] = linear_forward(hz, m.scorer)[0];
  }
  return s;
}

std::vector<std::vector<double>> self_attention(const std::vector<std::vector<double>>& u,
                                                const LinearLayer& wq, const LinearLayer& wk,
                                                const LinearLayer& wv,
                                                const LinearLayer& wo) {
  size_t n = u.size();
  if (n == 0) throw_invalid("self_attention: empty list");
  size_t h = wq.out_dim();
  std::vector<std::vector<double>> q(n), k(n), v(n), out(n);
  for (size_t i = 0; i < n; ++i) {
    q[i] = linear_forward(u[i], wq);
    k[i] = linear_forward(u[i], wk);
    v[i] = linear_forward(u[i], wv);
  }
  double scale = 1.0 / std::sqrt(static_cast<double>(h));
  std::vector<double> logits(n);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (size_t d = 0; d < h; ++d) acc += q[i][d] * k[j][d];
      logits[j] = acc * scale;
    }
    std::vector<double> w = softmax(logits);
    std::vector<double> ctx(h, 0.0);
    for (size_t j = 0; j < n; ++j)
      for (size_t d = 0; d < h; ++d) ctx[d] += w[j] * v[j][d];
    out[i] = linear_forward(ctx, wo);
  }
  return out;
}

std::vector<double> transformer_score(const TransformerModel& m, std::span<const double> x_c,
                                      const std::vector<std::vector<double>>& x_ps) {
  size_t n = x_ps.size();
  if (n == 0) throw_invalid("transformer_score: empty list");
  std::vector<std::vector<double>> joint(n), u(n);
  for (size_t i = 0; i < n; ++i) {
    joint[i] = concat2(x_ps[i], x_c);
    u[i] = linear_forward(joint[i], m.attn_in);
  }
  std::vector<std::vector<double>> ht = self_attention(u, m.wq, m.wk, m.wv, m.wo);
  std::vector<double> s(n);
  for (size_t i = 0; i < n; ++i) {
    std::vector<double> hz = backbone_forward(joint[i], m.backbone, Mode::kEval);
    for (size_t d = 0; d < hz.size(); ++d) hz[d] *= 1.0 + ht[i][d];
    s[i] = linear_forward(hz, m.scorer)[0];
  }
  return s;
}

BackboneNodes backbone_nodes(Graph& g, BackboneParams& p) {
  BackboneNodes n;
  n.wproj = g.param(p.proj.weights);
  n.bproj = g.param(p.proj.bias);
  for (size_t k = 0; k < p.blocks.size(); ++k) {
    n.w.push_back(g.param(p.blocks[k].weights));
    n.b.push_back(g.param(p.blocks[k].bias));
    n.gain.push_back(g.param(p.gains[k]));
    n.shift.push_back(g.param(p.shifts[k]));
  }
  return n;
}

ValueId backbone_apply(Graph& g, const BackboneNodes& nodes, const BackboneParams& p,
                       ValueId x, Mode mode, Rng& rng) {
  ValueId z = g.linear_rows(x, nodes.wproj, nodes.bproj);
  for (size_t k = 0; k < nodes.w.size(); ++k) {
    ValueId a = g.linear_rows(z, nodes.w[k], nodes.b[k]);
    if (mode == Mode::kTrain && p.dropout_rate > 0.0)
      a = g.mul_mask(a, dropout_mask(g.rows(a) * g.cols(a), p.dropout_rate, rng));
    a = g.relu(a);
    a = g.layer_norm_rows(a, nodes.gain[k], nodes.shift[k], p.ln_eps);
    z = g.add(z, a);
  }
  return z;
}

TwoTowerNodes two_tower_nodes(Graph& g, TwoTowerModel& m) {
  TwoTowerNodes n;
  n.bb = backbone_nodes(g, m.product_backbone);
  n.w = g.param(m.context_layer.weights);
  n.b = g.param(m.context_layer.bias);
  return n;
}

ValueId two_tower_apply(Graph& g, const TwoTowerNodes& nodes, const TwoTowerModel& m,
                        ValueId xp, ValueId xc, Mode mode, Rng& rng) {
  ValueId hp = backbone_apply(g, nodes.bb, m.product_backbone, xp, mode, rng);
  ValueId hc = g.linear_rows(xc, nodes.w, nodes.b);
  return g.row_dot(hp, hc);
}

CrossEncoderNodes cross_encoder_nodes(Graph& g, CrossEncoderModel& m) {
  CrossEncoderNodes n;
  n.bb = backbone_nodes(g, m.backbone);
  n.ws = g.param(m.scorer.weights);
  n.bs = g.param(m.scorer.bias);
  return n;
}

ValueId cross_encoder_apply(Graph& g, const CrossEncoderNodes& nodes,
                            const CrossEncoderModel& m, ValueId xp, ValueId xc, Mode mode,
                            Rng& rng) {
  ValueId joint = g.concat_cols({xp, xc}, g.rows(xp));
  ValueId hz = backbone_apply(g, nodes.bb, m.backbone, joint, mode, rng);
  return g.linear_rows(hz, nodes.ws, nodes.bs);
}

TransformerNodes transformer_nodes(Graph& g, TransformerModel& m) {
  TransformerNodes n;
  n.bb = backbone_nodes(g, m.backbone);
  n.attn_w = g.param(m.attn_in.weights);
  n.attn_b = g.param(m.attn_in.bias);
  n.qw = g.param(m.wq.weights);
  n.qb = g.param(m.wq.bias);
  n.kw = g.param(m.wk.weights);
  n.kb = g.param(m.wk.bias);
  n.vw = g.param(m.wv.weights);
  n.vb = g.param(m.wv.bias);
  n.ow = g.param(m.wo.weights);
  n.ob = g.param(m.wo.bias);
  n.gw = g.param(m.scorer.weights);
  n.gb = g.param(m.scorer.bias);
  return n;
}

ValueId transformer_apply(Graph& g, const TransformerNodes& nodes, const TransformerModel& m,
                          ValueId xp, ValueId xc, Mode mode, Rng& rng) {
  size_t n = g.rows(xp);
  size_t h = m.backbone.hidden();
  ValueId joint = g.concat_cols({xp, xc}, n);
  ValueId hz = backbone_apply(g, nodes.bb, m.backbone, joint, mode, rng);
  ValueId u = g.linear_rows(joint, nodes.attn_w, nodes.attn_b);
  ValueId q = g.linear_rows(u, nodes.qw, nodes.qb);
  ValueId k = g.linear_rows(u, nodes.kw, nodes.kb);
  ValueId v = g.linear_rows(u, nodes.vw, nodes.vb);
  ValueId logits = g.scale(g.matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(h)));
  ValueId attn = g.softmax_rows(logits);
  ValueId ctx = g.matmul(attn, v);
  ValueId ht = g.linear_rows(ctx, nodes.ow, nodes.ob);
  ValueId mod = g.one_plus_mul(ht, hz);
  return g.linear_rows(mod, nodes.gw, nodes.gb);
}

PrecomputeStore precompute_item_embeddings(const TwoTowerModel& m,
                                           const FeatureSchema& schema,
                                           const EmbeddingTables& tables,
                                           std::span<const ProductFeatures> products) {
  PrecomputeStore store;
  store.hidden = m.product_backbone.hidden();
  for (const auto& p : products) {
    uint64_t key = product_key(p);
    if (store.items.count(key)) continue;
    std::vector<double> xp = build_product_embedding(p, schema, tables);
    store.items.emplace(key, backbone_forward(xp, m.product_backbone, Mode::kEval));
  }
  return store;
}

std::vector<double> score_from_store(const TwoTowerModel& m, const FeatureSchema& schema,
                                     const EmbeddingTables& tables,
                                     const PrecomputeStore& store, const ContextFeatures& c,
                                     std::span<const ProductFeatures> products) {
  std::vector<double> xc = build_context_embedding(c, schema, tables);
  std::vector<double> hc = linear_forward(xc, m.context_layer);
  std::vector<double> s(products.size());
  for (size_t i = 0; i < products.size(); ++i) {
    auto it = store.items.find(product_key(products[i]));
    if (it == store.items.end())
      throw Error(Status::kNotFound,
                  "product not in precompute store (list position " + std::to_string(i) + ")");
    const auto& hp = it->second;
    double acc = 0.0;
    for (size_t j = 0; j < hc.size(); ++j) acc += hc[j] * hp[j];
    s[i] = acc;
  }
  return s;
}

void save_store(const PrecomputeStore& store, const std::string& path) {
  ojson j;
  j["hidden"] = store.hidden;
  ojson items = ojson::object();
  // Sorted keys keep the file deterministic.
  std::vector<uint64_t> keys;
  keys.reserve(store.items.size());
  for (const auto& [k, _] : store.items) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  char buf[17];
  for (uint64_t k : keys) {
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(k));
    items[buf] = store.items.at(k);
  }
  j["items"] = std::move(items);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_io("cannot open " + path + " for writing");
  out << j.dump();
  if (!out) throw_io("failed writing " + path);
}

PrecomputeStore load_store(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw_parse(path + ": " + e.what());
  }
  check_keys(j, {"hidden", "items"}, path);
  PrecomputeStore store;
  store.hidden = static_cast<size_t>(get_int(j, "hidden", path));
  const json& items = require(j, "items", path);
  if (!items.is_object()) throw_parse(path + ".items: expected an object");
  for (auto it = items.begin(); it != items.end(); ++it) {
    uint64_t key = std::stoull(it.key(), nullptr, 16);
    std::vector<double> v = it.value().get<std::vector<double>>();
    if (v.size() != store.hidden) throw_parse(path + ": embedding size mismatch");
    store.items.emplace(key, std::move(v));
  }
  return store;
}

}  // namespace ltr

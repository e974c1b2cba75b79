#include "core/train.hpp"

#include <chrono>
#include <cmath>
#include <map>

#include "core/metrics.hpp"

namespace ltr {

namespace {

bool neural_kind(ModelKind k) {
  return k == ModelKind::kTwoTower || k == ModelKind::kCrossEncoder ||
         k == ModelKind::kTransformer;
}

}  // namespace

void TrainConfig::validate() const {
  if (!neural_kind(kind))
    throw_invalid("train: kind must be two_tower, cross_encoder, or transformer");
  if (hidden < 1) throw_invalid("train: hidden must be >= 1");
  if (blocks < 1) throw_invalid("train: blocks must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw_invalid("train: dropout must be in [0, 1)");
  if (!(learning_rate > 0.0)) throw_invalid("train: learning_rate must be positive");
  if (batch_size < 1) throw_invalid("train: batch_size must be >= 1");
  if (!(valid_fraction >= 0.0 && valid_fraction < 0.5))
    throw_invalid("train: valid_fraction must be in [0, 0.5)");
  if (cutoff < 1) throw_invalid("train: cutoff must be >= 1");
  loss.validate();
}

ojson TrainConfig::to_json() const {
  ojson j;
  j["kind"] = model_kind_name(kind);
  j["loss"] = loss_kind_name(loss.kind);
  j["alpha"] = loss.alpha;
  j["hidden"] = hidden;
  j["blocks"] = blocks;
  j["dropout"] = dropout;
  j["learning_rate"] = learning_rate;
  j["batch_size"] = batch_size;
  j["epochs"] = epochs;
  j["valid_fraction"] = valid_fraction;
  j["cutoff"] = cutoff;
  j["seed"] = seed;
  j["d_cat"] = d_cat;
  j["d_text"] = d_text;
  if (!preset_name.empty()) j["preset"] = preset_name;
  return j;
}

TrainConfig TrainConfig::from_json(const json& j, const std::string& path) {
  check_keys(j,
             {"kind", "loss", "alpha", "hidden", "blocks", "dropout", "learning_rate",
              "batch_size", "epochs", "valid_fraction", "cutoff", "seed", "d_cat", "d_text",
              "preset"},
             path);
  ModelKind kind = model_kind_from(get_str_or(j, "kind", "two_tower", path));
  TrainConfig c;
  if (auto it = j.find("preset"); it != j.end())
    c = preset(it->get<std::string>(), kind);
  c.kind = kind;
  if (auto it = j.find("loss"); it != j.end())
    c.loss.kind = loss_kind_from(it->get<std::string>());
  c.loss.alpha = get_num_or(j, "alpha", c.loss.alpha, path);
  c.hidden = static_cast<size_t>(get_int_or(j, "hidden", static_cast<int64_t>(c.hidden), path));
  c.blocks = static_cast<size_t>(get_int_or(j, "blocks", static_cast<int64_t>(c.blocks), path));
  c.dropout = get_num_or(j, "dropout", c.dropout, path);
  c.learning_rate = get_num_or(j, "learning_rate", c.learning_rate, path);
  c.batch_size =
      static_cast<size_t>(get_int_or(j, "batch_size", static_cast<int64_t>(c.batch_size), path));
  c.epochs = static_cast<size_t>(get_int_or(j, "epochs", static_cast<int64_t>(c.epochs), path));
  c.valid_fraction = get_num_or(j, "valid_fraction", c.valid_fraction, path);
  c.cutoff = static_cast<int>(get_int_or(j, "cutoff", c.cutoff, path));
  c.seed = static_cast<uint64_t>(get_int_or(j, "seed", static_cast<int64_t>(c.seed), path));
  c.d_cat = static_cast<size_t>(get_int_or(j, "d_cat", static_cast<int64_t>(c.d_cat), path));
  c.d_text = static_cast<size_t>(get_int_or(j, "d_text", static_cast<int64_t>(c.d_text), path));
  c.validate();
  return c;
}

TrainConfig TrainConfig::preset(const std::string& name, ModelKind kind) {
  if (!neural_kind(kind))
    throw_invalid("train presets apply to neural kinds only");
  TrainConfig c;
  c.kind = kind;
  c.preset_name = name;
  if (name == "desk") {
    c.hidden = 32;
    c.blocks = 2;
    c.batch_size = 100;
    c.epochs = 3;
    if (kind == ModelKind::kTwoTower) {
      c.learning_rate = 1e-3;
      c.dropout = 0.0;
    } else if (kind == ModelKind::kCrossEncoder) {
      c.learning_rate = 1e-3;
      c.dropout = 0.1;
    } else {
      c.learning_rate = 5e-4;
      c.dropout = 0.1;
    }
  } else if (name == "paper") {
    c.hidden = 1024;
    c.blocks = 3;
    c.batch_size = 1000;
    c.epochs = 3;
    c.d_cat = 128;
    c.d_text = 512;
    if (kind == ModelKind::kTwoTower) {
      c.learning_rate = 1e-3;
      c.dropout = 0.0;
    } else if (kind == ModelKind::kCrossEncoder) {
      c.learning_rate = 1e-3;
      c.dropout = 0.3;
    } else {
      c.learning_rate = 1e-4;
      c.dropout = 0.5;
    }
  } else {
    throw_invalid("unknown train preset \"" + name + "\" (expected desk or paper)");
  }
  return c;
}

namespace {

double mean_ndcg_c(const ModelArtifact& art, const Dataset& d, int cutoff) {
  double sum = 0.0;
  size_t count = 0;
  for (size_t i = 0; i < d.lists.size(); ++i) {
    std::vector<double> s = score_list(art, d, i);
    auto nd = ndcg_at_k(s, d.lists[i].y_c, cutoff);
    if (nd) {
      sum += *nd;
      ++count;
    }
  }
  return count ? sum / static_cast<double>(count) : std::nan("");
}

}  // namespace

TrainResult train_neural(const Dataset& data, const TrainConfig& cfg,
                         std::vector<std::string>* warnings) {
  cfg.validate();
  if (data.lists.empty()) throw_invalid("train: empty dataset");

  TrainResult res;
  ModelArtifact& art = res.artifact;
  art.kind = cfg.kind;
  art.name = model_kind_name(cfg.kind);
  art.schema = data.schema;
  if (cfg.d_cat) {
    for (auto& s : art.schema.product_cat) s.dim = cfg.d_cat;
    for (auto& s : art.schema.context_cat) s.dim = cfg.d_cat;
  }
  if (cfg.d_text) {
    for (auto& s : art.schema.product_text) s.dim = cfg.d_text;
    for (auto& s : art.schema.context_text) s.dim = cfg.d_text;
  }
  art.schema.validate();
  if (!art.schema.numeric.empty() && !art.schema.fitted) {
    NumericStatsFitter fitter(art.schema);
    for (const auto& l : data.lists)
      for (const auto& p : l.products) fitter.add(p);
    auto w = fitter.finish(art.schema);
    if (warnings) warnings->insert(warnings->end(), w.begin(), w.end());
  }

  const Dataset* tr = &data;
  Dataset train_part, valid_part;
  bool has_valid = false;
  if (cfg.valid_fraction > 0.0 && data.lists.size() >= 2) {
    try {
      auto parts = temporal_split(data, 1.0 - cfg.valid_fraction);
      train_part = std::move(parts.first);
      valid_part = std::move(parts.second);
      tr = &train_part;
      has_valid = true;
    } catch (const Error& e) {
      if (warnings)
        warnings->push_back(std::string("validation slice unavailable: ") + e.what());
    }
  }

  Rng init_rng(splitmix64(cfg.seed));
  art.tables = EmbeddingTables::create(art.schema, init_rng);
  size_t dp = art.schema.d_product(), dc = art.schema.d_context();
  switch (cfg.kind) {
    case ModelKind::kTwoTower: {
      TwoTowerModel m;
      m.init(dp, dc, cfg.hidden, cfg.blocks, cfg.dropout, init_rng);
      art.impl = std::move(m);
      break;
    }
    case ModelKind::kCrossEncoder: {
      CrossEncoderModel m;
      m.init(dp, dc, cfg.hidden, cfg.blocks, cfg.dropout, init_rng);
      art.impl = std::move(m);
      break;
    }
    default: {
      TransformerModel m;
      m.init(dp, dc, cfg.hidden, cfg.blocks, cfg.dropout, init_rng);
      art.impl = std::move(m);
      break;
    }
  }
  art.hyper = cfg.to_json();

  std::vector<Tensor*> params = art.tables.trainable_params();
  {
    std::vector<Tensor*> mp;
    switch (cfg.kind) {
      case ModelKind::kTwoTower: mp = std::get<TwoTowerModel>(art.impl).params(); break;
      case ModelKind::kCrossEncoder: mp = std::get<CrossEncoderModel>(art.impl).params(); break;
      default: mp = std::get<TransformerModel>(art.impl).params(); break;
    }
    params.insert(params.end(), mp.begin(), mp.end());
  }

  // Equal-length bucketing: every list in a batch has the same product count.
  std::map<size_t, std::vector<size_t>> buckets;
  for (size_t i = 0; i < tr->lists.size(); ++i)
    buckets[tr->lists[i].products.size()].push_back(i);
  std::vector<std::vector<size_t>> batches;
  for (const auto& [len, idxs] : buckets) {
    (void)len;
    for (size_t at = 0; at < idxs.size(); at += cfg.batch_size) {
      size_t hi = std::min(at + cfg.batch_size, idxs.size());
      batches.emplace_back(idxs.begin() + static_cast<long>(at),
                           idxs.begin() + static_cast<long>(hi));
    }
  }

  AdamConfig acfg;
  acfg.lr = cfg.learning_rate;
  AdamState adam(params, acfg);
  Rng drop_rng(splitmix64(cfg.seed ^ 0xD0D0D0D0ULL));

  for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    std::vector<size_t> order(batches.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(splitmix64(cfg.seed ^ (0x5150ULL + epoch)));
    for (size_t i = order.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(shuffle_rng.uniform_int(0, static_cast<int64_t>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }

    double loss_sum = 0.0;
    size_t batch_count = 0;
    for (size_t bi : order) {
      const auto& batch = batches[bi];
      Graph g;
      TableNodes tn = table_nodes(g, art.tables);
      TwoTowerNodes tt_nodes;
      CrossEncoderNodes cr_nodes;
      TransformerNodes tf_nodes;
      switch (cfg.kind) {
        case ModelKind::kTwoTower:
          tt_nodes = two_tower_nodes(g, std::get<TwoTowerModel>(art.impl));
          break;
        case ModelKind::kCrossEncoder:
          cr_nodes = cross_encoder_nodes(g, std::get<CrossEncoderModel>(art.impl));
          break;
        default:
          tf_nodes = transformer_nodes(g, std::get<TransformerModel>(art.impl));
          break;
      }

      ValueId total = -1;
      for (size_t li : batch) {
        const InteractionList& l = tr->lists[li];
        ValueId xp = product_matrix_node(g, art.schema, tn, l.products);
        ValueId xc = context_row_node(g, art.schema, tn, l.context);
        ValueId s;
        switch (cfg.kind) {
          case ModelKind::kTwoTower:
            s = two_tower_apply(g, tt_nodes, std::get<TwoTowerModel>(art.impl), xp, xc,
                                Mode::kTrain, drop_rng);
            break;
          case ModelKind::kCrossEncoder:
            s = cross_encoder_apply(g, cr_nodes, std::get<CrossEncoderModel>(art.impl), xp,
                                    xc, Mode::kTrain, drop_rng);
            break;
          default:
            s = transformer_apply(g, tf_nodes, std::get<TransformerModel>(art.impl), xp, xc,
                                  Mode::kTrain, drop_rng);
            break;
        }
        ValueId ln = combined_loss_node(g, s, l.y_c, l.y_o, cfg.loss);
        total = total < 0 ? ln : g.axpby(total, 1.0, ln, 1.0);
      }
      ValueId mean = g.scale(total, 1.0 / static_cast<double>(batch.size()));
      double lv = g.scalar(mean);
      if (!std::isfinite(lv))
        throw Error(Status::kDiverged,
                    "training diverged: non-finite loss in epoch " + std::to_string(epoch + 1) +
                        "; lower the learning rate");
      for (Tensor* p : params) p->zero_grad();
      g.backward(mean);
      adam.step();
      loss_sum += lv;
      ++batch_count;
    }

    double train_loss = batch_count ? loss_sum / static_cast<double>(batch_count) : 0.0;
    double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ojson entry;
    entry["epoch"] = epoch + 1;
    entry["train_loss"] = train_loss;
    if (has_valid) entry["valid_ndcg_c"] = mean_ndcg_c(art, valid_part, cfg.cutoff);
    entry["seconds"] = seconds;
    res.log.push_back(std::move(entry));
    res.final_loss = train_loss;
  }
  return res;
}

TrainResult train_gbdt_model(const Dataset& data, const GbdtConfig& cfg) {
  TrainResult res;
  GbdtTrainResult g = train_lambdamart(data, cfg);
  res.artifact.kind = ModelKind::kGbdt;
  res.artifact.name = "gbdt";
  res.artifact.schema = data.schema;
  res.artifact.impl = std::move(g.ensemble);
  res.artifact.hyper = cfg.to_json();
  for (const auto& r : g.log) {
    ojson entry;
    entry["round"] = r.round;
    entry["train_ndcg_c"] = r.train_ndcg_c;
    entry["seconds"] = r.seconds;
    res.log.push_back(std::move(entry));
    res.final_train_ndcg = r.train_ndcg_c;
  }
  res.final_loss = std::nan("");
  return res;
}

ModelArtifact make_random_model(uint64_t seed, const FeatureSchema& schema) {
  ModelArtifact m;
  m.kind = ModelKind::kRandom;
  m.name = "random";
  m.schema = schema;
  m.impl = RandomScorer{seed};
  ojson h;
  h["seed"] = seed;
  m.hyper = std::move(h);
  return m;
}

ModelArtifact make_oracle_model(const Dataset& d) {
  if (d.generator_config.is_null())
    throw_invalid(
        "oracle scorer needs a generated dataset (schema file carries no generator config)");
  GeneratorConfig cfg = GeneratorConfig::from_json(d.generator_config, "generator_config");
  ModelArtifact m;
  m.kind = ModelKind::kOracle;
  m.name = "oracle";
  m.schema = d.schema;
  m.impl = PlantedOracle::create(cfg);
  ojson h;
  h["utility_seed"] = cfg.utility_seed;
  m.hyper = std::move(h);
  return m;
}

}  // namespace ltr

#include "core/model.hpp"

#include <cstring>
#include <fstream>

namespace ltr {

std::string model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::kTwoTower: return "two_tower";
    case ModelKind::kCrossEncoder: return "cross_encoder";
    case ModelKind::kTransformer: return "transformer";
    case ModelKind::kGbdt: return "gbdt";
    case ModelKind::kRandom: return "random";
    case ModelKind::kOracle: return "oracle";
  }
  throw_invalid("unhandled model kind");
}

ModelKind model_kind_from(const std::string& s) {
  if (s == "two_tower") return ModelKind::kTwoTower;
  if (s == "cross_encoder") return ModelKind::kCrossEncoder;
  if (s == "transformer") return ModelKind::kTransformer;
  if (s == "gbdt") return ModelKind::kGbdt;
  if (s == "random") return ModelKind::kRandom;
  if (s == "oracle") return ModelKind::kOracle;
  throw_invalid("unknown model kind \"" + s +
                "\" (expected two_tower, cross_encoder, transformer, gbdt, random, oracle)");
}

double RandomScorer::score(size_t list_index, size_t position) const {
  uint64_t h = fnv1a64_u64(seed, 0xcbf29ce484222325ULL);
  h = fnv1a64_u64(static_cast<uint64_t>(list_index), h);
  h = fnv1a64_u64(static_cast<uint64_t>(position), h);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

PlantedOracle PlantedOracle::create(const GeneratorConfig& cfg) {
  PlantedOracle o;
  o.config = cfg;
  o.util = std::make_shared<PlantedUtility>(cfg);
  return o;
}

void check_schema_compatible(const ModelArtifact& m, const Dataset& d) {
  if (m.kind == ModelKind::kRandom) return;
  if (!m.schema.layout_matches(d.schema))
    throw Error(Status::kSchemaMismatch,
                "model \"" + m.name + "\" was trained on a different feature layout");
}

std::vector<double> score_list(const ModelArtifact& m, const Dataset& d, size_t list_index) {
  if (list_index >= d.lists.size())
    throw_invalid("list index " + std::to_string(list_index) + " out of range (" +
                  std::to_string(d.lists.size()) + " lists)");
  check_schema_compatible(m, d);
  const InteractionList& l = d.lists[list_index];
  size_t n = l.products.size();

  if (m.kind == ModelKind::kRandom) {
    const auto& rs = std::get<RandomScorer>(m.impl);
    std::vector<double> s(n);
    for (size_t i = 0; i < n; ++i) s[i] = rs.score(list_index, i);
    return s;
  }
  if (m.kind == ModelKind::kOracle) {
    const auto& o = std::get<PlantedOracle>(m.impl);
    std::vector<double> s(n);
    for (size_t i = 0; i < n; ++i) s[i] = o.util->utility(l.context, l.products[i]);
    return s;
  }
  if (m.kind == ModelKind::kGbdt) {
    const auto& e = std::get<GbdtEnsemble>(m.impl);
    std::vector<double> row(gbdt_feature_count(m.schema));
    std::vector<double> s(n);
    for (size_t i = 0; i < n; ++i) {
      gbdt_fill_row(m.schema, l.context, l.products[i], row.data());
      s[i] = e.predict_row(row);
    }
    return s;
  }

  std::vector<double> xc = build_context_embedding(l.context, m.schema, m.tables);
  std::vector<std::vector<double>> xps;
  xps.reserve(n);
  for (const auto& p : l.products) xps.push_back(build_product_embedding(p, m.schema, m.tables));
  switch (m.kind) {
    case ModelKind::kTwoTower:
      return two_tower_score(std::get<TwoTowerModel>(m.impl), xc, xps);
    case ModelKind::kCrossEncoder:
      return cross_encoder_score(std::get<CrossEncoderModel>(m.impl), xc, xps);
    case ModelKind::kTransformer:
      return transformer_score(std::get<TransformerModel>(m.impl), xc, xps);
    default:
      throw_invalid("unhandled model kind in score_list");
  }
}

namespace {

constexpr char kMagic[8] = {'L', 'T', 'R', 'M', 'O', 'D', 'E', 'L'};
constexpr uint32_t kVersion = 1;

template <typename Fn>
void for_each_table(EmbeddingTables& t, Fn&& fn) {
  for (auto& e : t.product_cat) fn(e.rows);
  for (auto& e : t.product_text) fn(e.rows);
  for (auto& e : t.context_cat) fn(e.rows);
  for (auto& e : t.context_text) fn(e.rows);
}

bool is_neural(ModelKind k) {
  return k == ModelKind::kTwoTower || k == ModelKind::kCrossEncoder ||
         k == ModelKind::kTransformer;
}

std::vector<Tensor*> collect_tensors(ModelArtifact& m) {
  std::vector<Tensor*> out;
  for_each_table(m.tables, [&out](Tensor& t) { out.push_back(&t); });
  std::vector<Tensor*> mp;
  switch (m.kind) {
    case ModelKind::kTwoTower: mp = std::get<TwoTowerModel>(m.impl).params(); break;
    case ModelKind::kCrossEncoder: mp = std::get<CrossEncoderModel>(m.impl).params(); break;
    case ModelKind::kTransformer: mp = std::get<TransformerModel>(m.impl).params(); break;
    default: break;
  }
  out.insert(out.end(), mp.begin(), mp.end());
  return out;
}

const BackboneParams& backbone_of(const ModelArtifact& m) {
  switch (m.kind) {
    case ModelKind::kTwoTower: return std::get<TwoTowerModel>(m.impl).product_backbone;
    case ModelKind::kCrossEncoder: return std::get<CrossEncoderModel>(m.impl).backbone;
    case ModelKind::kTransformer: return std::get<TransformerModel>(m.impl).backbone;
    default: throw_invalid("model kind has no backbone");
  }
}

void append_u32(std::string& buf, uint32_t v) {
  buf.append(reinterpret_cast<const char*>(&v), sizeof(v));
}
void append_u64(std::string& buf, uint64_t v) {
  buf.append(reinterpret_cast<const char*>(&v), sizeof(v));
}

struct Reader {
  const char* p;
  size_t left;
  std::string where;

  void need(size_t n) const {
    if (left < n) throw Error(Status::kFormatError, where + ": truncated model file");
  }
  void take(void* dst, size_t n) {
    need(n);
    std::memcpy(dst, p, n);
    p += n;
    left -= n;
  }
  uint32_t u32() {
    uint32_t v;
    take(&v, sizeof(v));
    return v;
  }
  uint64_t u64() {
    uint64_t v;
    take(&v, sizeof(v));
    return v;
  }
};

}  // namespace

void save_model(const ModelArtifact& m, const std::string& path) {
  // Serialization only reads the tensors; params() is non-const by design.
  ModelArtifact& mm = const_cast<ModelArtifact&>(m);

  ojson header;
  header["kind"] = model_kind_name(m.kind);
  header["name"] = m.name;
  header["schema"] = m.schema.to_json();
  header["hyper"] = m.hyper.is_null() ? ojson(ojson::value_t::object) : m.hyper;

  std::string blob;
  if (is_neural(m.kind)) {
    const BackboneParams& bb = backbone_of(m);
    ojson arch;
    arch["hidden"] = bb.hidden();
    arch["blocks"] = bb.blocks.size();
    arch["dropout"] = bb.dropout_rate;
    header["arch"] = std::move(arch);

    std::vector<Tensor*> tensors = collect_tensors(mm);
    ojson tj = ojson::array();
    uint64_t offset = 0;
    for (Tensor* t : tensors) {
      tj.push_back({{"shape", t->shape}, {"offset", offset}});
      blob.append(reinterpret_cast<const char*>(t->data.data()),
                  t->data.size() * sizeof(double));
      offset += t->data.size();
    }
    header["tensors"] = std::move(tj);
  } else if (m.kind == ModelKind::kGbdt) {
    header["gbdt"] = std::get<GbdtEnsemble>(m.impl).to_json();
  } else if (m.kind == ModelKind::kRandom) {
    header["random_seed"] = std::get<RandomScorer>(m.impl).seed;
  } else if (m.kind == ModelKind::kOracle) {
    header["generator_config"] = std::get<PlantedOracle>(m.impl).config.to_json();
  }

  std::string hs = header.dump();
  uint64_t sum = fnv1a64(hs.data(), hs.size());
  sum = fnv1a64(blob.data(), blob.size(), sum);

  std::string out;
  out.append(kMagic, sizeof(kMagic));
  append_u32(out, kVersion);
  append_u64(out, hs.size());
  out += hs;
  append_u64(out, blob.size());
  out += blob;
  append_u64(out, sum);

  std::ofstream f(path, std::ios::binary);
  if (!f) throw_io("cannot open " + path + " for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw_io("failed writing " + path);
}

ModelArtifact load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw_io("cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r{buf.data(), buf.size(), path};

  char magic[8];
  r.take(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw Error(Status::kFormatError, path + ": not a model artifact (bad magic)");
  uint32_t version = r.u32();
  if (version != kVersion)
    throw Error(Status::kFormatError,
                path + ": unsupported model format version " + std::to_string(version));

  uint64_t hlen = r.u64();
  r.need(hlen);
  std::string hs(r.p, hlen);
  r.p += hlen;
  r.left -= hlen;
  uint64_t blen = r.u64();
  r.need(blen);
  const char* blob = r.p;
  r.p += blen;
  r.left -= blen;
  uint64_t stored = r.u64();
  if (r.left != 0)
    throw Error(Status::kFormatError, path + ": trailing bytes after model payload");

  uint64_t sum = fnv1a64(hs.data(), hs.size());
  sum = fnv1a64(blob, blen, sum);
  if (sum != stored)
    throw Error(Status::kFormatError, path + ": checksum mismatch (corrupt model file)");

  json header;
  try {
    header = json::parse(hs);
  } catch (const json::exception& e) {
    throw Error(Status::kFormatError, path + ": bad model header: " + e.what());
  }
  check_keys(header,
             {"kind", "name", "schema", "hyper", "arch", "tensors", "gbdt", "random_seed",
              "generator_config"},
             path);

  ModelArtifact m;
  m.kind = model_kind_from(get_str(header, "kind", path));
  m.name = get_str(header, "name", path);
  m.schema = FeatureSchema::from_json(require(header, "schema", path), path + ".schema");
  // hyper is kept as written; a sorted reparse would reorder keys and break
  // byte-stable re-saves.
  if (header.contains("hyper")) m.hyper = ojson::parse(hs).at("hyper");

  if (is_neural(m.kind)) {
    const json& arch = require(header, "arch", path);
    check_keys(arch, {"hidden", "blocks", "dropout"}, path + ".arch");
    size_t h = static_cast<size_t>(get_int(arch, "hidden", path + ".arch"));
    size_t k = static_cast<size_t>(get_int(arch, "blocks", path + ".arch"));
    double dropout = get_num(arch, "dropout", path + ".arch");

    Rng rng(0);
    m.tables = EmbeddingTables::create(m.schema, rng);
    size_t dp = m.schema.d_product(), dc = m.schema.d_context();
    if (m.kind == ModelKind::kTwoTower) {
      TwoTowerModel mdl;
      mdl.init(dp, dc, h, k, dropout, rng);
      m.impl = std::move(mdl);
    } else if (m.kind == ModelKind::kCrossEncoder) {
      CrossEncoderModel mdl;
      mdl.init(dp, dc, h, k, dropout, rng);
      m.impl = std::move(mdl);
    } else {
      TransformerModel mdl;
      mdl.init(dp, dc, h, k, dropout, rng);
      m.impl = std::move(mdl);
    }

    std::vector<Tensor*> tensors = collect_tensors(m);
    const json& tj = get_arr(header, "tensors", path);
    if (tj.size() != tensors.size())
      throw Error(Status::kFormatError,
                  path + ": tensor count mismatch (header " + std::to_string(tj.size()) +
                      ", model " + std::to_string(tensors.size()) + ")");
    size_t total_doubles = blen / sizeof(double);
    for (size_t i = 0; i < tensors.size(); ++i) {
      std::string tp = path + ".tensors[" + std::to_string(i) + "]";
      check_keys(tj[i], {"shape", "offset"}, tp);
      std::vector<size_t> shape = tj[i].at("shape").get<std::vector<size_t>>();
      if (shape != tensors[i]->shape)
        throw Error(Status::kFormatError, tp + ": tensor shape mismatch");
      uint64_t off = static_cast<uint64_t>(get_int(tj[i], "offset", tp));
      size_t count = tensors[i]->data.size();
      if (off + count > total_doubles)
        throw Error(Status::kFormatError, tp + ": tensor extends past blob");
      std::memcpy(tensors[i]->data.data(), blob + off * sizeof(double),
                  count * sizeof(double));
    }
  } else if (m.kind == ModelKind::kGbdt) {
    m.impl = GbdtEnsemble::from_json(require(header, "gbdt", path), path + ".gbdt");
  } else if (m.kind == ModelKind::kRandom) {
    RandomScorer rs;
    rs.seed = header.value("random_seed", 0ULL);
    m.impl = rs;
  } else {
    GeneratorConfig cfg = GeneratorConfig::from_json(
        require(header, "generator_config", path), path + ".generator_config");
    m.impl = PlantedOracle::create(cfg);
  }
  return m;
}

}  // namespace ltr

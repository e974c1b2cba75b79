#include "core/features.hpp"

#include <algorithm>
#include <cmath>

namespace ltr {

const char* numeric_kind_name(NumericKind k) {
  return k == NumericKind::kPowerLaw ? "power_law" : "zscore";
}

NumericKind numeric_kind_from(const std::string& name) {
  if (name == "power_law") return NumericKind::kPowerLaw;
  if (name == "zscore") return NumericKind::kZScore;
  throw_parse("unknown numeric kind \"" + name + "\" (expected zscore or power_law)");
}

size_t FeatureSchema::d_product() const {
  size_t d = numeric.size();
  for (const auto& s : product_cat) d += s.dim;
  for (const auto& s : product_text) d += s.dim;
  return d;
}

size_t FeatureSchema::d_context() const {
  size_t d = 0;
  for (const auto& s : context_cat) d += s.dim;
  for (const auto& s : context_text) d += s.dim;
  return d;
}

void FeatureSchema::validate() const {
  auto check_slots = [](const std::vector<EmbedSlot>& slots, const char* what) {
    for (size_t j = 0; j < slots.size(); ++j) {
      if (slots[j].vocab < 2)
        throw_invalid(std::string(what) + " slot " + std::to_string(j) +
                      ": vocab must be >= 2 (index 0 is the unknown row)");
      if (slots[j].dim < 1)
        throw_invalid(std::string(what) + " slot " + std::to_string(j) + ": dim must be >= 1");
    }
  };
  check_slots(product_cat, "product_cat");
  check_slots(product_text, "product_text");
  check_slots(context_cat, "context_cat");
  check_slots(context_text, "context_text");
  if (d_product() == 0) throw_invalid("schema yields an empty product embedding");
  if (d_context() == 0) throw_invalid("schema yields an empty context embedding");
}

bool FeatureSchema::layout_matches(const FeatureSchema& other) const {
  if (numeric.size() != other.numeric.size()) return false;
  for (size_t j = 0; j < numeric.size(); ++j)
    if (numeric[j].kind != other.numeric[j].kind) return false;
  auto slots_match = [](const std::vector<EmbedSlot>& a, const std::vector<EmbedSlot>& b) {
    if (a.size() != b.size()) return false;
    for (size_t j = 0; j < a.size(); ++j)
      if (a[j].vocab != b[j].vocab) return false;
    return true;
  };
  return slots_match(product_cat, other.product_cat) &&
         slots_match(product_text, other.product_text) &&
         slots_match(context_cat, other.context_cat) &&
         slots_match(context_text, other.context_text);
}

namespace {

ojson slots_to_json(const std::vector<EmbedSlot>& slots) {
  ojson arr = ojson::array();
  for (const auto& s : slots) arr.push_back({{"vocab", s.vocab}, {"dim", s.dim}});
  return arr;
}

std::vector<EmbedSlot> slots_from_json(const json& arr, const std::string& path) {
  if (!arr.is_array()) throw_parse(path + ": expected an array");
  std::vector<EmbedSlot> out;
  for (size_t j = 0; j < arr.size(); ++j) {
    const json& s = arr[j];
    std::string p = path + "[" + std::to_string(j) + "]";
    check_keys(s, {"vocab", "dim"}, p);
    EmbedSlot slot;
    slot.vocab = static_cast<size_t>(get_int(s, "vocab", p));
    slot.dim = static_cast<size_t>(get_int(s, "dim", p));
    out.push_back(slot);
  }
  return out;
}

}  // namespace

ojson FeatureSchema::to_json() const {
  ojson j;
  ojson nums = ojson::array();
  for (const auto& f : numeric) {
    ojson e;
    e["kind"] = numeric_kind_name(f.kind);
    if (fitted) {
      e["mean"] = f.mean;
      e["std"] = f.std_dev;
      e["clamped"] = f.clamped;
    }
    nums.push_back(std::move(e));
  }
  j["numeric"] = std::move(nums);
  j["product_cat"] = slots_to_json(product_cat);
  j["product_text"] = slots_to_json(product_text);
  j["context_cat"] = slots_to_json(context_cat);
  j["context_text"] = slots_to_json(context_text);
  j["fitted"] = fitted;
  return j;
}

FeatureSchema FeatureSchema::from_json(const json& j, const std::string& path) {
  check_keys(j, {"numeric", "product_cat", "product_text", "context_cat", "context_text",
                 "fitted"},
             path);
  FeatureSchema s;
  const json& nums = get_arr(j, "numeric", path);
  for (size_t i = 0; i < nums.size(); ++i) {
    std::string p = path + ".numeric[" + std::to_string(i) + "]";
    check_keys(nums[i], {"kind", "mean", "std", "clamped"}, p);
    NumericField f;
    f.kind = numeric_kind_from(get_str(nums[i], "kind", p));
    f.mean = get_num_or(nums[i], "mean", 0.0, p);
    f.std_dev = get_num_or(nums[i], "std", 1.0, p);
    if (auto it = nums[i].find("clamped"); it != nums[i].end()) f.clamped = it->get<bool>();
    s.numeric.push_back(f);
  }
  s.product_cat = slots_from_json(get_arr(j, "product_cat", path), path + ".product_cat");
  s.product_text = slots_from_json(get_arr(j, "product_text", path), path + ".product_text");
  s.context_cat = slots_from_json(get_arr(j, "context_cat", path), path + ".context_cat");
  s.context_text = slots_from_json(get_arr(j, "context_text", path), path + ".context_text");
  if (auto it = j.find("fitted"); it != j.end()) s.fitted = it->get<bool>();
  s.validate();
  return s;
}

uint64_t product_key(const ProductFeatures& p) {
  uint64_t h = fnv1a64("prod", 4);
  h = fnv1a64_u64(p.numeric.size(), h);
  for (double v : p.numeric) h = fnv1a64_f64(v, h);
  h = fnv1a64_u64(p.categorical.size(), h);
  for (int id : p.categorical) h = fnv1a64_u64(static_cast<uint64_t>(id), h);
  h = fnv1a64_u64(p.textual.size(), h);
  for (const auto& bag : p.textual) {
    std::vector<int> sorted(bag);
    std::sort(sorted.begin(), sorted.end());
    h = fnv1a64_u64(sorted.size(), h);
    for (int w : sorted) h = fnv1a64_u64(static_cast<uint64_t>(w), h);
  }
  h = fnv1a64_f64(p.price, h);
  return h;
}

EmbeddingTables EmbeddingTables::create(const FeatureSchema& schema, Rng& rng) {
  EmbeddingTables t;
  auto make = [&rng](const std::vector<EmbedSlot>& slots) {
    std::vector<EmbeddingTable> tables;
    for (const auto& s : slots) {
      EmbeddingTable e;
      e.rows = Tensor({s.vocab, s.dim});
      init_embedding(e.rows, rng);
      tables.push_back(std::move(e));
    }
    return tables;
  };
  t.product_cat = make(schema.product_cat);
  t.product_text = make(schema.product_text);
  t.context_cat = make(schema.context_cat);
  t.context_text = make(schema.context_text);
  return t;
}

std::vector<Tensor*> EmbeddingTables::trainable_params() {
  std::vector<Tensor*> ps;
  for (auto* group : {&product_cat, &product_text, &context_cat, &context_text})
    for (auto& t : *group)
      if (t.trainable) ps.push_back(&t.rows);
  return ps;
}

NumericStatsFitter::NumericStatsFitter(const FeatureSchema& schema) {
  for (const auto& f : schema.numeric) kinds_.push_back(f.kind);
  sum_.assign(kinds_.size(), 0.0);
  sumsq_.assign(kinds_.size(), 0.0);
}

void NumericStatsFitter::add(const ProductFeatures& p) {
  if (p.numeric.size() != kinds_.size())
    throw_invalid("numeric feature count " + std::to_string(p.numeric.size()) +
                  " does not match schema count " + std::to_string(kinds_.size()));
  for (size_t j = 0; j < kinds_.size(); ++j) {
    double v = p.numeric[j];
    if (kinds_[j] == NumericKind::kPowerLaw) {
      if (v < 0.0)
        throw_invalid("power-law numeric feature " + std::to_string(j) +
                      " received negative value " + std::to_string(v));
      v = std::log1p(v);
    }
    sum_[j] += v;
    sumsq_[j] += v * v;
  }
  ++count_;
}

std::vector<std::string> NumericStatsFitter::finish(FeatureSchema& schema) {
  if (schema.numeric.size() != kinds_.size()) throw_invalid("schema changed during fitting");
  if (!kinds_.empty() && count_ < 2)
    throw_invalid("numeric stats need at least 2 samples, got " + std::to_string(count_));
  std::vector<std::string> warnings;
  for (size_t j = 0; j < kinds_.size(); ++j) {
    double n = static_cast<double>(count_);
    double mean = sum_[j] / n;
    double var = std::max(0.0, sumsq_[j] / n - mean * mean);
    double sd = std::sqrt(var);
    NumericField& f = schema.numeric[j];
    f.mean = mean;
    if (sd < 1e-12) {
      f.std_dev = 1.0;
      f.clamped = true;
      warnings.push_back("numeric feature " + std::to_string(j) +
                         " has zero variance; std clamped to 1");
    } else {
      f.std_dev = sd;
      f.clamped = false;
    }
  }
  schema.fitted = true;
  return warnings;
}

double normalize_numeric(double x, const NumericField& f) {
  if (f.kind == NumericKind::kPowerLaw) {
    if (x < 0.0)
      throw_invalid("power-law normalization received negative value " + std::to_string(x));
    return (std::log1p(x) - f.mean) / f.std_dev;
  }
  return (x - f.mean) / f.std_dev;
}

size_t safe_row(int id, size_t vocab) {
  if (id < 0 || static_cast<size_t>(id) >= vocab) return 0;
  return static_cast<size_t>(id);
}

std::vector<double> embed_categorical(int id, const Tensor& table) {
  size_t r = safe_row(id, table.rows());
  const double* src = table.data.data() + r * table.cols();
  return std::vector<double>(src, src + table.cols());
}

std::vector<double> embed_text_bow(const std::vector<int>& bag, const Tensor& table) {
  std::vector<double> out(table.cols(), 0.0);
  for (int w : bag) {
    const double* src = table.data.data() + safe_row(w, table.rows()) * table.cols();
    for (size_t i = 0; i < out.size(); ++i) out[i] += src[i];
  }
  return out;
}

namespace {

void check_product_shape(const ProductFeatures& p, const FeatureSchema& schema) {
  if (p.numeric.size() != schema.numeric.size())
    throw_invalid("product numeric count mismatch");
  if (p.categorical.size() != schema.product_cat.size())
    throw_invalid("product categorical count mismatch");
  if (p.textual.size() != schema.product_text.size())
    throw_invalid("product textual count mismatch");
}

void check_context_shape(const ContextFeatures& c, const FeatureSchema& schema) {
  if (c.categorical.size() != schema.context_cat.size())
    throw_invalid("context categorical count mismatch");
  if (c.textual.size() != schema.context_text.size())
    throw_invalid("context textual count mismatch");
}

void require_fitted(const FeatureSchema& schema) {
  if (!schema.numeric.empty() && !schema.fitted)
    throw_invalid("schema stats not fitted; fit on the training split first");
}

}  // namespace

std::vector<double> build_product_embedding(const ProductFeatures& p,
                                            const FeatureSchema& schema,
                                            const EmbeddingTables& tables) {
  check_product_shape(p, schema);
  require_fitted(schema);
  std::vector<double> out;
  out.reserve(schema.d_product());
  for (size_t j = 0; j < schema.numeric.size(); ++j)
    out.push_back(normalize_numeric(p.numeric[j], schema.numeric[j]));
  for (size_t j = 0; j < schema.product_cat.size(); ++j) {
    auto e = embed_categorical(p.categorical[j], tables.product_cat[j].rows);
    out.insert(out.end(), e.begin(), e.end());
  }
  for (size_t j = 0; j < schema.product_text.size(); ++j) {
    auto e = embed_text_bow(p.textual[j], tables.product_text[j].rows);
    out.insert(out.end(), e.begin(), e.end());
  }
  return out;
}

std::vector<double> build_context_embedding(const ContextFeatures& c,
                                            const FeatureSchema& schema,
                                            const EmbeddingTables& tables) {
  check_context_shape(c, schema);
  std::vector<double> out;
  out.reserve(schema.d_context());
  for (size_t j = 0; j < schema.context_cat.size(); ++j) {
    auto e = embed_categorical(c.categorical[j], tables.context_cat[j].rows);
    out.insert(out.end(), e.begin(), e.end());
  }
  for (size_t j = 0; j < schema.context_text.size(); ++j) {
    auto e = embed_text_bow(c.textual[j], tables.context_text[j].rows);
    out.insert(out.end(), e.begin(), e.end());
  }
  return out;
}

TableNodes table_nodes(Graph& g, EmbeddingTables& tables) {
  TableNodes tn;
  for (auto& t : tables.product_cat) tn.product_cat.push_back(g.param(t.rows));
  for (auto& t : tables.product_text) tn.product_text.push_back(g.param(t.rows));
  for (auto& t : tables.context_cat) tn.context_cat.push_back(g.param(t.rows));
  for (auto& t : tables.context_text) tn.context_text.push_back(g.param(t.rows));
  return tn;
}

ValueId product_matrix_node(Graph& g, const FeatureSchema& schema, const TableNodes& tn,
                            std::span<const ProductFeatures> products) {
  size_t n = products.size();
  require_fitted(schema);
  std::vector<ValueId> parts;
  if (!schema.numeric.empty()) {
    std::vector<double> nums(n * schema.numeric.size());
    for (size_t r = 0; r < n; ++r) {
      check_product_shape(products[r], schema);
      for (size_t j = 0; j < schema.numeric.size(); ++j)
        nums[r * schema.numeric.size() + j] =
            normalize_numeric(products[r].numeric[j], schema.numeric[j]);
    }
    parts.push_back(g.constant(std::move(nums), n, schema.numeric.size()));
  } else {
    for (size_t r = 0; r < n; ++r) check_product_shape(products[r], schema);
  }
  std::vector<std::vector<int>> bags(n);
  for (size_t j = 0; j < schema.product_cat.size(); ++j) {
    for (size_t r = 0; r < n; ++r)
      bags[r] = {static_cast<int>(safe_row(products[r].categorical[j],
                                           schema.product_cat[j].vocab))};
    parts.push_back(g.embed_rows(tn.product_cat[j], bags));
  }
  for (size_t j = 0; j < schema.product_text.size(); ++j) {
    for (size_t r = 0; r < n; ++r) {
      bags[r].clear();
      for (int w : products[r].textual[j])
        bags[r].push_back(static_cast<int>(safe_row(w, schema.product_text[j].vocab)));
    }
    parts.push_back(g.embed_rows(tn.product_text[j], bags));
  }
  return g.concat_cols(parts, n);
}

ValueId context_row_node(Graph& g, const FeatureSchema& schema, const TableNodes& tn,
                         const ContextFeatures& c) {
  check_context_shape(c, schema);
  std::vector<ValueId> parts;
  std::vector<std::vector<int>> bag(1);
  for (size_t j = 0; j < schema.context_cat.size(); ++j) {
    bag[0] = {static_cast<int>(safe_row(c.categorical[j], schema.context_cat[j].vocab))};
    parts.push_back(g.embed_rows(tn.context_cat[j], bag));
  }
  for (size_t j = 0; j < schema.context_text.size(); ++j) {
    bag[0].clear();
    for (int w : c.textual[j])
      bag[0].push_back(static_cast<int>(safe_row(w, schema.context_text[j].vocab)));
    parts.push_back(g.embed_rows(tn.context_text[j], bag));
  }
  return g.concat_cols(parts, 1);
}

}  // namespace ltr

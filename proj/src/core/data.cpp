#include "core/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace ltr {

void GeneratorConfig::validate() const {
  if (lists < 1) throw_invalid("generator: lists must be >= 1");
  if (min_products < 2) throw_invalid("generator: min_products must be >= 2");
  if (max_products < min_products)
    throw_invalid("generator: max_products must be >= min_products");
  if (!(click_base_rate > 0.0 && click_base_rate < 1.0))
    throw_invalid("generator: click_base_rate must be in (0, 1)");
  if (!(order_rate > 0.0 && order_rate < 1.0))
    throw_invalid("generator: order_rate must be in (0, 1)");
  if (!(steepness > 0.0)) throw_invalid("generator: steepness must be positive");
  if (ts_span < static_cast<int64_t>(lists))
    throw_invalid("generator: ts_span must be >= lists for strictly increasing timestamps");
  if (max_resample < 1) throw_invalid("generator: max_resample must be >= 1");
  schema().validate();
}

FeatureSchema GeneratorConfig::schema() const {
  FeatureSchema s;
  for (NumericKind k : numeric) s.numeric.push_back({k, 0.0, 1.0, false});
  s.product_cat = product_cat;
  for (const auto& t : product_text) s.product_text.push_back({t.vocab, t.dim});
  s.context_cat = context_cat;
  for (const auto& t : context_text) s.context_text.push_back({t.vocab, t.dim});
  return s;
}

namespace {

ojson text_slots_to_json(const std::vector<GenTextSlot>& slots) {
  ojson arr = ojson::array();
  for (const auto& t : slots)
    arr.push_back({{"vocab", t.vocab}, {"dim", t.dim}, {"max_words", t.max_words}});
  return arr;
}

ojson cat_slots_to_json(const std::vector<EmbedSlot>& slots) {
  ojson arr = ojson::array();
  for (const auto& s : slots) arr.push_back({{"vocab", s.vocab}, {"dim", s.dim}});
  return arr;
}

std::vector<GenTextSlot> text_slots_from_json(const json& arr, const std::string& path) {
  if (!arr.is_array()) throw_parse(path + ": expected an array");
  std::vector<GenTextSlot> out;
  for (size_t j = 0; j < arr.size(); ++j) {
    std::string p = path + "[" + std::to_string(j) + "]";
    check_keys(arr[j], {"vocab", "dim", "max_words"}, p);
    GenTextSlot t;
    t.vocab = static_cast<size_t>(get_int(arr[j], "vocab", p));
    t.dim = static_cast<size_t>(get_int(arr[j], "dim", p));
    t.max_words = static_cast<size_t>(get_int(arr[j], "max_words", p));
    out.push_back(t);
  }
  return out;
}

std::vector<EmbedSlot> cat_slots_from_json(const json& arr, const std::string& path) {
  if (!arr.is_array()) throw_parse(path + ": expected an array");
  std::vector<EmbedSlot> out;
  for (size_t j = 0; j < arr.size(); ++j) {
    std::string p = path + "[" + std::to_string(j) + "]";
    check_keys(arr[j], {"vocab", "dim"}, p);
    EmbedSlot s;
    s.vocab = static_cast<size_t>(get_int(arr[j], "vocab", p));
    s.dim = static_cast<size_t>(get_int(arr[j], "dim", p));
    out.push_back(s);
  }
  return out;
}

}  // namespace

ojson GeneratorConfig::to_json() const {
  ojson j;
  j["lists"] = lists;
  j["products_per_list"] = {min_products, max_products};
  ojson nums = ojson::array();
  for (NumericKind k : numeric) nums.push_back(numeric_kind_name(k));
  j["numeric"] = std::move(nums);
  j["product_cat"] = cat_slots_to_json(product_cat);
  j["product_text"] = text_slots_to_json(product_text);
  j["context_cat"] = cat_slots_to_json(context_cat);
  j["context_text"] = text_slots_to_json(context_text);
  j["click_base_rate"] = click_base_rate;
  j["order_rate"] = order_rate;
  j["steepness"] = steepness;
  j["utility_seed"] = utility_seed;
  j["ts_start"] = ts_start;
  j["ts_span"] = ts_span;
  j["max_resample"] = max_resample;
  return j;
}

GeneratorConfig GeneratorConfig::from_json(const json& j, const std::string& path) {
  check_keys(j,
             {"lists", "products_per_list", "numeric", "product_cat", "product_text",
              "context_cat", "context_text", "click_base_rate", "order_rate", "steepness",
              "utility_seed", "ts_start", "ts_span", "max_resample"},
             path);
  GeneratorConfig c;
  c.lists = static_cast<size_t>(get_int_or(j, "lists", static_cast<int64_t>(c.lists), path));
  if (auto it = j.find("products_per_list"); it != j.end()) {
    if (!it->is_array() || it->size() != 2)
      throw_parse(path + ".products_per_list: expected [min, max]");
    c.min_products = (*it)[0].get<size_t>();
    c.max_products = (*it)[1].get<size_t>();
  }
  if (auto it = j.find("numeric"); it != j.end()) {
    if (!it->is_array()) throw_parse(path + ".numeric: expected an array of kinds");
    c.numeric.clear();
    for (const auto& k : *it) c.numeric.push_back(numeric_kind_from(k.get<std::string>()));
  }
  if (auto it = j.find("product_cat"); it != j.end())
    c.product_cat = cat_slots_from_json(*it, path + ".product_cat");
  if (auto it = j.find("product_text"); it != j.end())
    c.product_text = text_slots_from_json(*it, path + ".product_text");
  if (auto it = j.find("context_cat"); it != j.end())
    c.context_cat = cat_slots_from_json(*it, path + ".context_cat");
  if (auto it = j.find("context_text"); it != j.end())
    c.context_text = text_slots_from_json(*it, path + ".context_text");
  c.click_base_rate = get_num_or(j, "click_base_rate", c.click_base_rate, path);
  c.order_rate = get_num_or(j, "order_rate", c.order_rate, path);
  c.steepness = get_num_or(j, "steepness", c.steepness, path);
  c.utility_seed =
      static_cast<uint64_t>(get_int_or(j, "utility_seed", static_cast<int64_t>(c.utility_seed), path));
  c.ts_start = get_int_or(j, "ts_start", c.ts_start, path);
  c.ts_span = get_int_or(j, "ts_span", c.ts_span, path);
  c.max_resample = static_cast<int>(get_int_or(j, "max_resample", c.max_resample, path));
  c.validate();
  return c;
}

GeneratorConfig GeneratorConfig::preset(const std::string& name) {
  GeneratorConfig c;
  if (name == "paper-ratio") {
    c.lists = 62000;
  } else if (name == "smoke") {
    c.lists = 2000;
  } else {
    throw_invalid("unknown generator preset \"" + name +
                  "\" (expected paper-ratio or smoke)");
  }
  return c;
}

namespace {

// Component weights of the hidden utility. Product-varying parts dominate so
// within-list order is learnable from product features.
constexpr double kWNum = 1.0;
constexpr double kWPCat = 0.9;
constexpr double kWPText = 0.5;
constexpr double kWCCat = 0.3;
constexpr double kWCText = 0.2;
constexpr double kWInter = 0.6;
constexpr size_t kProbeCount = 4096;

double half_normal_mean() { return std::sqrt(2.0 / 3.14159265358979323846); }
double half_normal_std() { return std::sqrt(1.0 - 2.0 / 3.14159265358979323846); }

double bag_mean(const std::vector<int>& bag, const std::vector<double>& w) {
  if (bag.empty()) return 0.0;
  double sum = 0.0;
  for (int id : bag) sum += w[safe_row(id, w.size())];
  return sum / static_cast<double>(bag.size());
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

}  // namespace

PlantedUtility::PlantedUtility(const GeneratorConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(cfg_.utility_seed);
  for (size_t j = 0; j < cfg_.numeric.size(); ++j) {
    num_mu_.push_back(rng.uniform(-1.0, 1.0));
    num_sigma_.push_back(rng.uniform(0.5, 2.0));
    num_logscale_.push_back(rng.uniform(0.6, 1.4));
    w_num_.push_back(rng.normal());
  }
  auto draw = [&rng](size_t count) {
    std::vector<double> w(count);
    for (double& v : w) v = rng.normal();
    return w;
  };
  for (const auto& s : cfg_.product_cat) w_pcat_.push_back(draw(s.vocab));
  for (const auto& s : cfg_.product_text) w_ptext_.push_back(draw(s.vocab));
  for (const auto& s : cfg_.context_cat) w_ccat_.push_back(draw(s.vocab));
  for (const auto& s : cfg_.context_text) w_ctext_.push_back(draw(s.vocab));
  if (!cfg_.context_cat.empty() && !cfg_.product_cat.empty())
    w_inter_ = draw(cfg_.context_cat[0].vocab * cfg_.product_cat[0].vocab);

  // Probe pairs standardize the raw utility and calibrate the click intercept
  // against the configured base rate.
  Rng probe(splitmix64(cfg_.utility_seed ^ 0x50524f4245ULL));
  std::vector<double> raw(kProbeCount);
  for (size_t i = 0; i < kProbeCount; ++i) {
    ContextFeatures c = sample_context(probe);
    ProductFeatures p = sample_product(probe);
    raw[i] = raw_utility(c, p);
  }
  double mean = 0.0;
  for (double v : raw) mean += v;
  mean /= static_cast<double>(kProbeCount);
  double var = 0.0;
  for (double v : raw) var += (v - mean) * (v - mean);
  var /= static_cast<double>(kProbeCount);
  u_mean_ = mean;
  u_std_ = var > 1e-18 ? std::sqrt(var) : 1.0;

  double lo = -60.0, hi = 60.0;
  for (int it = 0; it < 200; ++it) {
    double b = 0.5 * (lo + hi);
    double rate = 0.0;
    for (double v : raw) rate += sigmoid(cfg_.steepness * (v - u_mean_) / u_std_ + b);
    rate /= static_cast<double>(kProbeCount);
    if (rate < cfg_.click_base_rate)
      lo = b;
    else
      hi = b;
  }
  intercept_ = 0.5 * (lo + hi);
}

ContextFeatures PlantedUtility::sample_context(Rng& rng) const {
  ContextFeatures c;
  for (const auto& s : cfg_.context_cat)
    c.categorical.push_back(static_cast<int>(rng.uniform_int(1, static_cast<int64_t>(s.vocab) - 1)));
  for (const auto& s : cfg_.context_text) {
    size_t m = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(s.max_words)));
    std::vector<int> bag(m);
    for (auto& w : bag)
      w = static_cast<int>(rng.uniform_int(1, static_cast<int64_t>(s.vocab) - 1));
    c.textual.push_back(std::move(bag));
  }
  return c;
}

ProductFeatures PlantedUtility::sample_product(Rng& rng) const {
  ProductFeatures p;
  for (size_t j = 0; j < cfg_.numeric.size(); ++j) {
    double t = rng.normal();
    if (cfg_.numeric[j] == NumericKind::kPowerLaw)
      p.numeric.push_back(std::expm1(num_logscale_[j] * std::fabs(t)));
    else
      p.numeric.push_back(num_mu_[j] + num_sigma_[j] * t);
  }
  for (const auto& s : cfg_.product_cat)
    p.categorical.push_back(static_cast<int>(rng.uniform_int(1, static_cast<int64_t>(s.vocab) - 1)));
  for (const auto& s : cfg_.product_text) {
    size_t m = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(s.max_words)));
    std::vector<int> bag(m);
    for (auto& w : bag)
      w = static_cast<int>(rng.uniform_int(1, static_cast<int64_t>(s.vocab) - 1));
    p.textual.push_back(std::move(bag));
  }
  p.price = round2(std::exp(2.5 + 0.8 * rng.normal()));
  return p;
}

double PlantedUtility::raw_utility(const ContextFeatures& c, const ProductFeatures& p) const {
  double a_num = 0.0;
  for (size_t j = 0; j < cfg_.numeric.size(); ++j) {
    double t;
    if (cfg_.numeric[j] == NumericKind::kPowerLaw) {
      double g = std::log1p(std::max(0.0, p.numeric[j])) / num_logscale_[j];
      t = (g - half_normal_mean()) / half_normal_std();
    } else {
      t = (p.numeric[j] - num_mu_[j]) / num_sigma_[j];
    }
    a_num += w_num_[j] * t;
  }
  if (!cfg_.numeric.empty()) a_num /= std::sqrt(static_cast<double>(cfg_.numeric.size()));

  double a_pcat = 0.0;
  for (size_t j = 0; j < w_pcat_.size(); ++j)
    a_pcat += w_pcat_[j][safe_row(p.categorical[j], cfg_.product_cat[j].vocab)];
  if (!w_pcat_.empty()) a_pcat /= std::sqrt(static_cast<double>(w_pcat_.size()));

  double a_ptext = 0.0;
  for (size_t j = 0; j < w_ptext_.size(); ++j) a_ptext += bag_mean(p.textual[j], w_ptext_[j]);
  if (!w_ptext_.empty()) a_ptext /= std::sqrt(static_cast<double>(w_ptext_.size()));

  double a_ccat = 0.0;
  for (size_t j = 0; j < w_ccat_.size(); ++j)
    a_ccat += w_ccat_[j][safe_row(c.categorical[j], cfg_.context_cat[j].vocab)];
  if (!w_ccat_.empty()) a_ccat /= std::sqrt(static_cast<double>(w_ccat_.size()));

  double a_ctext = 0.0;
  for (size_t j = 0; j < w_ctext_.size(); ++j) a_ctext += bag_mean(c.textual[j], w_ctext_[j]);
  if (!w_ctext_.empty()) a_ctext /= std::sqrt(static_cast<double>(w_ctext_.size()));

  double a_int = 0.0;
  if (!w_inter_.empty()) {
    size_t ci = safe_row(c.categorical[0], cfg_.context_cat[0].vocab);
    size_t pi = safe_row(p.categorical[0], cfg_.product_cat[0].vocab);
    a_int = w_inter_[ci * cfg_.product_cat[0].vocab + pi];
  }

  return kWNum * a_num + kWPCat * a_pcat + kWPText * a_ptext + kWCCat * a_ccat +
         kWCText * a_ctext + kWInter * a_int;
}

double PlantedUtility::utility(const ContextFeatures& c, const ProductFeatures& p) const {
  return (raw_utility(c, p) - u_mean_) / u_std_;
}

double PlantedUtility::click_prob(double u) const {
  return sigmoid(cfg_.steepness * u + intercept_);
}

double PlantedUtility::order_prob_given_click(double u) const {
  return cfg_.order_rate * sigmoid(u);
}

Dataset generate_synthetic_dataset(const GeneratorConfig& cfg, uint64_t seed) {
  cfg.validate();
  PlantedUtility util(cfg);
  Rng rng(seed);

  std::vector<int64_t> ts(cfg.lists);
  for (auto& t : ts) t = rng.uniform_int(0, cfg.ts_span - 1);
  std::sort(ts.begin(), ts.end());
  for (size_t i = 1; i < ts.size(); ++i) ts[i] = std::max(ts[i], ts[i - 1] + 1);

  Dataset d;
  d.schema = cfg.schema();
  d.provenance = {seed, "ltrlab-gen/1"};
  d.generator_config = cfg.to_json();
  d.lists.reserve(cfg.lists);

  for (size_t li = 0; li < cfg.lists; ++li) {
    InteractionList list;
    bool ok = false;
    for (int attempt = 0; attempt < cfg.max_resample; ++attempt) {
      size_t n = static_cast<size_t>(rng.uniform_int(
          static_cast<int64_t>(cfg.min_products), static_cast<int64_t>(cfg.max_products)));
      list.context = util.sample_context(rng);
      list.products.clear();
      std::vector<int> yc(n, 0), yo(n, 0);
      for (size_t i = 0; i < n; ++i) {
        list.products.push_back(util.sample_product(rng));
        double u = util.utility(list.context, list.products.back());
        if (rng.uniform() < util.click_prob(u)) {
          yc[i] = 1;
          if (rng.uniform() < util.order_prob_given_click(u)) yo[i] = 1;
        }
      }
      list.y_c = LabelVector::from(std::move(yc));
      list.y_o = LabelVector::from(std::move(yo));
      if (list.y_c.positives > 0) {
        ok = true;
        break;
      }
    }
    if (!ok)
      throw Error(Status::kGenerationFailed,
                  "list " + std::to_string(li) + ": no positives after " +
                      std::to_string(cfg.max_resample) +
                      " resamples; raise click_base_rate or steepness");
    list.ts = cfg.ts_start + ts[li];
    d.lists.push_back(std::move(list));
  }
  return d;
}

std::pair<Dataset, Dataset> temporal_split(const Dataset& d, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw_invalid("train fraction must be in (0, 1)");
  if (d.lists.empty()) throw_invalid("cannot split an empty dataset");
  std::vector<int64_t> ts;
  ts.reserve(d.lists.size());
  for (const auto& l : d.lists) ts.push_back(l.ts);
  std::sort(ts.begin(), ts.end());
  if (ts.front() == ts.back())
    throw_invalid(
        "all timestamps are equal; temporal split impossible (regenerate with a wider "
        "time span or fix the ingested timestamps)");
  size_t count = ts.size();
  // Epsilon guard keeps intended-integer fractions (e.g. 61000/62000) exact.
  size_t train_target = static_cast<size_t>(
      std::ceil(train_fraction * static_cast<double>(count) - 1e-9));
  train_target = std::min(std::max<size_t>(train_target, 1), count - 1);
  int64_t boundary = ts[train_target - 1];

  Dataset train, test;
  train.schema = test.schema = d.schema;
  train.provenance = test.provenance = d.provenance;
  train.generator_config = test.generator_config = d.generator_config;
  for (const auto& l : d.lists) {
    if (l.ts <= boundary)
      train.lists.push_back(l);
    else
      test.lists.push_back(l);
  }
  if (train.lists.empty() || test.lists.empty())
    throw_invalid("temporal split produced an empty side; adjust the fraction");
  return {std::move(train), std::move(test)};
}

namespace {

ojson list_to_json(const InteractionList& l) {
  ojson j;
  ojson ctx;
  ctx["cat"] = l.context.categorical;
  ctx["text"] = l.context.textual;
  j["context"] = std::move(ctx);
  ojson prods = ojson::array();
  for (const auto& p : l.products) {
    ojson pj;
    pj["num"] = p.numeric;
    pj["cat"] = p.categorical;
    pj["text"] = p.textual;
    pj["price"] = p.price;
    prods.push_back(std::move(pj));
  }
  j["products"] = std::move(prods);
  j["y_c"] = l.y_c.y;
  j["y_o"] = l.y_o.y;
  j["ts"] = l.ts;
  return j;
}

std::vector<int> int_array(const json& v, const std::string& path) {
  if (!v.is_array()) throw_parse(path + ": expected an array");
  std::vector<int> out;
  out.reserve(v.size());
  for (const auto& e : v) {
    if (!e.is_number_integer()) throw_parse(path + ": expected integers");
    out.push_back(e.get<int>());
  }
  return out;
}

InteractionList list_from_json(const json& j, const FeatureSchema& schema,
                               const std::string& where,
                               std::vector<std::string>* warnings) {
  check_keys(j, {"context", "products", "y_c", "y_o", "ts"}, where);
  InteractionList l;

  const json& ctx = require(j, "context", where);
  check_keys(ctx, {"cat", "text"}, where + ".context");
  l.context.categorical = int_array(require(ctx, "cat", where + ".context"), where + ".context.cat");
  const json& ctext = require(ctx, "text", where + ".context");
  if (!ctext.is_array()) throw_parse(where + ".context.text: expected an array");
  for (size_t t = 0; t < ctext.size(); ++t)
    l.context.textual.push_back(
        int_array(ctext[t], where + ".context.text[" + std::to_string(t) + "]"));
  if (l.context.categorical.size() != schema.context_cat.size())
    throw_parse(where + ".context.cat: expected " + std::to_string(schema.context_cat.size()) +
                " values, got " + std::to_string(l.context.categorical.size()));
  if (l.context.textual.size() != schema.context_text.size())
    throw_parse(where + ".context.text: expected " + std::to_string(schema.context_text.size()) +
                " bags, got " + std::to_string(l.context.textual.size()));

  const json& prods = get_arr(j, "products", where);
  if (prods.size() < 2) throw_parse(where + ".products: a list needs at least 2 products");
  for (size_t i = 0; i < prods.size(); ++i) {
    std::string pw = where + ".products[" + std::to_string(i) + "]";
    check_keys(prods[i], {"num", "cat", "text", "price"}, pw);
    ProductFeatures p;
    const json& nums = get_arr(prods[i], "num", pw);
    for (const auto& v : nums) {
      if (!v.is_number()) throw_parse(pw + ".num: expected numbers");
      p.numeric.push_back(v.get<double>());
    }
    if (p.numeric.size() != schema.numeric.size())
      throw_parse(pw + ".num: expected " + std::to_string(schema.numeric.size()) +
                  " values, got " + std::to_string(p.numeric.size()));
    p.categorical = int_array(require(prods[i], "cat", pw), pw + ".cat");
    if (p.categorical.size() != schema.product_cat.size())
      throw_parse(pw + ".cat: expected " + std::to_string(schema.product_cat.size()) +
                  " values, got " + std::to_string(p.categorical.size()));
    const json& ptext = require(prods[i], "text", pw);
    if (!ptext.is_array()) throw_parse(pw + ".text: expected an array");
    for (size_t t = 0; t < ptext.size(); ++t)
      p.textual.push_back(int_array(ptext[t], pw + ".text[" + std::to_string(t) + "]"));
    if (p.textual.size() != schema.product_text.size())
      throw_parse(pw + ".text: expected " + std::to_string(schema.product_text.size()) +
                  " bags, got " + std::to_string(p.textual.size()));
    p.price = get_num(prods[i], "price", pw);
    if (p.price < 0.0) throw_parse(pw + ".price: must be >= 0");
    l.products.push_back(std::move(p));
  }

  std::vector<int> yc = int_array(require(j, "y_c", where), where + ".y_c");
  std::vector<int> yo = int_array(require(j, "y_o", where), where + ".y_o");
  if (yc.size() != l.products.size())
    throw_parse(where + ".y_c: expected " + std::to_string(l.products.size()) +
                " labels, got " + std::to_string(yc.size()));
  if (yo.size() != l.products.size())
    throw_parse(where + ".y_o: expected " + std::to_string(l.products.size()) +
                " labels, got " + std::to_string(yo.size()));
  for (int v : yc)
    if (v != 0 && v != 1) throw_parse(where + ".y_c: labels must be 0 or 1");
  for (int v : yo)
    if (v != 0 && v != 1) throw_parse(where + ".y_o: labels must be 0 or 1");
  if (warnings) {
    for (size_t i = 0; i < yc.size(); ++i)
      if (yo[i] > yc[i]) {
        warnings->push_back(where + ": order without click at position " + std::to_string(i));
        break;
      }
    bool any = false;
    for (size_t i = 0; i < yc.size(); ++i) any = any || yc[i] || yo[i];
    if (!any) warnings->push_back(where + ": list has no positive labels");
  }
  l.y_c = LabelVector::from(std::move(yc));
  l.y_o = LabelVector::from(std::move(yo));

  const json& ts = require(j, "ts", where);
  if (!ts.is_number_integer()) throw_parse(where + ".ts: expected an integer");
  l.ts = ts.get<int64_t>();
  return l;
}

}  // namespace

void save_dataset(const Dataset& d, const std::string& jsonl_path,
                  const std::string& schema_path) {
  ojson sj;
  sj["format"] = "ltrlab-dataset";
  sj["format_version"] = 1;
  sj["schema"] = d.schema.to_json();
  ojson prov;
  prov["seed"] = d.provenance.seed;
  prov["generator_version"] = d.provenance.generator_version;
  sj["provenance"] = std::move(prov);
  sj["generator_config"] = d.generator_config;
  sj["lists"] = d.lists.size();
  {
    std::ofstream out(schema_path, std::ios::binary);
    if (!out) throw_io("cannot open " + schema_path + " for writing");
    out << sj.dump(2) << '\n';
    if (!out) throw_io("failed writing " + schema_path);
  }
  std::ofstream out(jsonl_path, std::ios::binary);
  if (!out) throw_io("cannot open " + jsonl_path + " for writing");
  for (const auto& l : d.lists) out << list_to_json(l).dump() << '\n';
  if (!out) throw_io("failed writing " + jsonl_path);
}

Dataset load_dataset(const std::string& jsonl_path, const std::string& schema_path,
                     std::vector<std::string>* warnings) {
  Dataset d;
  {
    std::ifstream in(schema_path, std::ios::binary);
    if (!in) throw_io("cannot open " + schema_path);
    std::string stext((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    json sj;
    try {
      sj = json::parse(stext);
    } catch (const json::exception& e) {
      throw_parse(schema_path + ": " + e.what());
    }
    check_keys(sj, {"format", "format_version", "schema", "provenance", "generator_config",
                    "lists"},
               schema_path);
    if (get_str(sj, "format", schema_path) != "ltrlab-dataset")
      throw Error(Status::kFormatError, schema_path + ": not an ltrlab dataset schema");
    if (get_int(sj, "format_version", schema_path) != 1)
      throw Error(Status::kFormatError, schema_path + ": unsupported format version");
    d.schema = FeatureSchema::from_json(require(sj, "schema", schema_path),
                                        schema_path + ".schema");
    const json& prov = require(sj, "provenance", schema_path);
    check_keys(prov, {"seed", "generator_version"}, schema_path + ".provenance");
    d.provenance.seed =
        static_cast<uint64_t>(get_int_or(prov, "seed", 0, schema_path + ".provenance"));
    d.provenance.generator_version =
        get_str_or(prov, "generator_version", "", schema_path + ".provenance");
    // Reparse as ordered json so the config keeps its authored key order.
    if (auto it = sj.find("generator_config"); it != sj.end() && !it->is_null())
      d.generator_config = ojson::parse(stext).at("generator_config");
  }

  std::ifstream in(jsonl_path, std::ios::binary);
  if (!in) throw_io("cannot open " + jsonl_path);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw_parse(jsonl_path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    d.lists.push_back(
        list_from_json(j, d.schema, jsonl_path + ":" + std::to_string(lineno), warnings));
  }
  if (d.lists.empty())
    throw_parse(jsonl_path + ": empty dataset (no records)");
  return d;
}

std::vector<std::string> fit_schema_stats(Dataset& d) {
  NumericStatsFitter fitter(d.schema);
  for (const auto& l : d.lists)
    for (const auto& p : l.products) fitter.add(p);
  return fitter.finish(d.schema);
}

}  // namespace ltr

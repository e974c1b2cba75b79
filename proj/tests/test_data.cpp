#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "core/data.hpp"
#include "test_util.hpp"

using namespace ltr;

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("ltrlab_data_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string read_bytes(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

GeneratorConfig small_config() {
  GeneratorConfig c;
  c.lists = 50;
  c.min_products = 4;
  c.max_products = 9;
  c.ts_span = 100000;
  return c;
}

Dataset hand_dataset(const std::vector<int64_t>& timestamps) {
  Dataset d;
  d.schema.numeric = {{NumericKind::kZScore, 0.0, 1.0, false}};
  d.schema.fitted = true;
  for (int64_t t : timestamps) {
    InteractionList l;
    for (int i = 0; i < 2; ++i) {
      ProductFeatures p;
      p.numeric = {static_cast<double>(i)};
      p.price = 1.0;
      l.products.push_back(p);
    }
    l.y_c = LabelVector::from({1, 0});
    l.y_o = LabelVector::from({0, 0});
    l.ts = t;
    d.lists.push_back(std::move(l));
  }
  return d;
}

}  // namespace

TEST_CASE("generator config validation names the offending field") {
  GeneratorConfig c;
  c.lists = 0;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("lists"), Error);

  c = GeneratorConfig{};
  c.min_products = 1;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("min_products"), Error);

  c = GeneratorConfig{};
  c.max_products = c.min_products - 1;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("max_products"), Error);

  c = GeneratorConfig{};
  c.click_base_rate = 0.0;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("click_base_rate"), Error);

  c = GeneratorConfig{};
  c.order_rate = 1.0;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("order_rate"), Error);

  c = GeneratorConfig{};
  c.steepness = 0.0;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("steepness"), Error);

  c = GeneratorConfig{};
  c.ts_span = static_cast<int64_t>(c.lists) - 1;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("ts_span"), Error);

  c = GeneratorConfig{};
  c.max_resample = 0;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("max_resample"), Error);
}

TEST_CASE("generator config json round trip and unknown keys") {
  GeneratorConfig c = small_config();
  c.click_base_rate = 0.2;
  c.utility_seed = 99;
  ojson j = c.to_json();
  GeneratorConfig back = GeneratorConfig::from_json(j, "cfg");
  CHECK(back.lists == c.lists);
  CHECK(back.min_products == c.min_products);
  CHECK(back.max_products == c.max_products);
  CHECK(back.numeric == c.numeric);
  CHECK(back.click_base_rate == c.click_base_rate);
  CHECK(back.utility_seed == c.utility_seed);
  CHECK(back.to_json() == j);

  json bad = j;
  bad["clicks"] = 1;
  CHECK_THROWS_WITH_AS(GeneratorConfig::from_json(bad, "cfg"),
                       doctest::Contains("clicks"), Error);

  CHECK_THROWS_AS(GeneratorConfig::preset("bogus"), Error);
  CHECK(GeneratorConfig::preset("paper-ratio").lists == 62000);
  CHECK(GeneratorConfig::preset("smoke").lists == 2000);
}

TEST_CASE("generation is deterministic per seed and honors structural invariants") {
  GeneratorConfig c = small_config();
  Dataset d1 = generate_synthetic_dataset(c, 5);
  Dataset d2 = generate_synthetic_dataset(c, 5);
  Dataset d3 = generate_synthetic_dataset(c, 6);

  TempDir tmp;
  save_dataset(d1, tmp.file("a.jsonl"), tmp.file("a.schema.json"));
  save_dataset(d2, tmp.file("b.jsonl"), tmp.file("b.schema.json"));
  save_dataset(d3, tmp.file("c.jsonl"), tmp.file("c.schema.json"));
  CHECK(read_bytes(tmp.file("a.jsonl")) == read_bytes(tmp.file("b.jsonl")));
  CHECK(read_bytes(tmp.file("a.schema.json")) == read_bytes(tmp.file("b.schema.json")));
  CHECK(read_bytes(tmp.file("a.jsonl")) != read_bytes(tmp.file("c.jsonl")));

  REQUIRE(d1.lists.size() == c.lists);
  CHECK(d1.provenance.seed == 5);
  CHECK(!d1.provenance.generator_version.empty());
  CHECK(d1.generator_config == c.to_json());

  int64_t prev_ts = std::numeric_limits<int64_t>::min();
  for (const auto& l : d1.lists) {
    CHECK(l.ts > prev_ts);
    prev_ts = l.ts;
    CHECK(l.ts >= c.ts_start);
    CHECK(l.ts < c.ts_start + c.ts_span + static_cast<int64_t>(c.lists));
    CHECK(l.products.size() >= c.min_products);
    CHECK(l.products.size() <= c.max_products);
    CHECK(l.y_c.positives >= 1);
    REQUIRE(l.y_c.size() == l.products.size());
    REQUIRE(l.y_o.size() == l.products.size());
    for (size_t i = 0; i < l.y_c.size(); ++i) CHECK(l.y_o.y[i] <= l.y_c.y[i]);
    for (const auto& p : l.products) {
      REQUIRE(p.numeric.size() == c.numeric.size());
      REQUIRE(p.categorical.size() == c.product_cat.size());
      REQUIRE(p.textual.size() == c.product_text.size());
      CHECK(p.price >= 0.0);
      for (size_t s = 0; s < p.categorical.size(); ++s) {
        CHECK(p.categorical[s] >= 1);
        CHECK(p.categorical[s] < static_cast<int>(c.product_cat[s].vocab));
      }
    }
    CHECK(l.context.categorical.size() == c.context_cat.size());
    CHECK(l.context.textual.size() == c.context_text.size());
  }
}

TEST_CASE("click rate lands near the configured base rate") {
  GeneratorConfig c;
  c.lists = 2000;
  Dataset d = generate_synthetic_dataset(c, 1);
  size_t clicks = 0, items = 0;
  for (const auto& l : d.lists) {
    clicks += static_cast<size_t>(l.y_c.positives);
    items += l.y_c.size();
  }
  double rate = static_cast<double>(clicks) / static_cast<double>(items);
  // Resampling lists without clicks biases the realized rate slightly upward.
  CHECK(rate > 0.13);
  CHECK(rate < 0.19);

  size_t orders = 0;
  for (const auto& l : d.lists) orders += static_cast<size_t>(l.y_o.positives);
  CHECK(orders > 0);
  double order_given_click = static_cast<double>(orders) / static_cast<double>(clicks);
  CHECK(order_given_click > 0.25);
  CHECK(order_given_click < 0.60);
}

TEST_CASE("temporal split sizes and boundary handling") {
  GeneratorConfig c = small_config();
  Dataset d = generate_synthetic_dataset(c, 2);

  auto [tr, te] = temporal_split(d, 0.8);
  CHECK(tr.lists.size() == 40);
  CHECK(te.lists.size() == 10);
  int64_t max_train = std::numeric_limits<int64_t>::min();
  for (const auto& l : tr.lists) max_train = std::max(max_train, l.ts);
  for (const auto& l : te.lists) CHECK(l.ts > max_train);
  CHECK(tr.schema.layout_matches(d.schema));
  CHECK(tr.generator_config == d.generator_config);
  CHECK(tr.provenance.seed == d.provenance.seed);

  // Intended-integer fractions stay exact.
  Dataset d62 = hand_dataset([] {
    std::vector<int64_t> ts;
    for (int i = 0; i < 62; ++i) ts.push_back(100 + i);
    return ts;
  }());
  auto [tr62, te62] = temporal_split(d62, 61.0 / 62.0);
  CHECK(tr62.lists.size() == 61);
  CHECK(te62.lists.size() == 1);

  // Extreme fractions clamp to leave one list on each side.
  Dataset d10 = hand_dataset({1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  CHECK(temporal_split(d10, 0.001).first.lists.size() == 1);
  CHECK(temporal_split(d10, 0.999).first.lists.size() == 9);

  // Lists sharing the boundary timestamp all go to train.
  Dataset tied = hand_dataset({1, 1, 1, 2});
  auto [ttr, tte] = temporal_split(tied, 0.25);
  CHECK(ttr.lists.size() == 3);
  CHECK(tte.lists.size() == 1);

  CHECK_THROWS_AS(temporal_split(d, 0.0), Error);
  CHECK_THROWS_AS(temporal_split(d, 1.0), Error);
  Dataset flat = hand_dataset({7, 7, 7});
  CHECK_THROWS_WITH_AS(temporal_split(flat, 0.5), doctest::Contains("timestamps"), Error);
}

TEST_CASE("dataset save and load round trip") {
  GeneratorConfig c = small_config();
  c.lists = 20;
  Dataset d = generate_synthetic_dataset(c, 9);
  fit_schema_stats(d);

  TempDir tmp;
  save_dataset(d, tmp.file("d.jsonl"), tmp.file("d.schema.json"));
  std::vector<std::string> warnings;
  Dataset back = load_dataset(tmp.file("d.jsonl"), tmp.file("d.schema.json"), &warnings);
  CHECK(warnings.empty());

  REQUIRE(back.lists.size() == d.lists.size());
  CHECK(back.provenance.seed == d.provenance.seed);
  CHECK(back.provenance.generator_version == d.provenance.generator_version);
  CHECK(back.generator_config == d.generator_config);
  CHECK(back.schema.fitted == d.schema.fitted);
  REQUIRE(back.schema.numeric.size() == d.schema.numeric.size());
  for (size_t i = 0; i < d.schema.numeric.size(); ++i) {
    CHECK(back.schema.numeric[i].kind == d.schema.numeric[i].kind);
    CHECK(back.schema.numeric[i].mean == doctest::Approx(d.schema.numeric[i].mean));
    CHECK(back.schema.numeric[i].std_dev == doctest::Approx(d.schema.numeric[i].std_dev));
  }
  for (size_t i = 0; i < d.lists.size(); ++i) {
    const auto& a = d.lists[i];
    const auto& b = back.lists[i];
    CHECK(a.ts == b.ts);
    CHECK(a.y_c.y == b.y_c.y);
    CHECK(a.y_o.y == b.y_o.y);
    CHECK(a.context.categorical == b.context.categorical);
    CHECK(a.context.textual == b.context.textual);
    REQUIRE(a.products.size() == b.products.size());
    for (size_t p = 0; p < a.products.size(); ++p) {
      CHECK(a.products[p].numeric == b.products[p].numeric);
      CHECK(a.products[p].categorical == b.products[p].categorical);
      CHECK(a.products[p].textual == b.products[p].textual);
      CHECK(a.products[p].price == b.products[p].price);
    }
  }
}

TEST_CASE("loader reports precise locations and schema violations") {
  GeneratorConfig c = small_config();
  c.lists = 3;
  Dataset d = generate_synthetic_dataset(c, 4);
  TempDir tmp;
  save_dataset(d, tmp.file("ok.jsonl"), tmp.file("ok.schema.json"));
  std::string schema_path = tmp.file("ok.schema.json");

  CHECK_THROWS_AS(load_dataset(tmp.file("missing.jsonl"), schema_path, nullptr), Error);
  CHECK_THROWS_AS(load_dataset(tmp.file("ok.jsonl"), tmp.file("missing.schema.json"), nullptr),
                  Error);

  std::string good = read_bytes(tmp.file("ok.jsonl"));

  // Malformed JSON on line 2 of a copy.
  {
    std::istringstream in(good);
    std::string l1;
    std::getline(in, l1);
    write_text(tmp.file("bad.jsonl"), l1 + "\n{not json\n");
    try {
      load_dataset(tmp.file("bad.jsonl"), schema_path, nullptr);
      FAIL("expected a parse error");
    } catch (const Error& e) {
      CHECK(e.status() == Status::kParseError);
      CHECK(std::string(e.what()).find(":2:") != std::string::npos);
    }
  }

  std::istringstream in(good);
  std::string first;
  std::getline(in, first);
  json rec = json::parse(first);

  {
    json one = rec;
    one["products"] = json::array({one["products"][0]});
    one["y_c"] = json::array({1});
    one["y_o"] = json::array({0});
    write_text(tmp.file("short.jsonl"), one.dump() + "\n");
    CHECK_THROWS_WITH_AS(load_dataset(tmp.file("short.jsonl"), schema_path, nullptr),
                         doctest::Contains("at least 2 products"), Error);
  }
  {
    json graded = rec;
    graded["y_c"][0] = 2;
    write_text(tmp.file("graded.jsonl"), graded.dump() + "\n");
    CHECK_THROWS_WITH_AS(load_dataset(tmp.file("graded.jsonl"), schema_path, nullptr),
                         doctest::Contains("labels must be 0 or 1"), Error);
  }
  {
    json extra = rec;
    extra["extra"] = 1;
    write_text(tmp.file("extra.jsonl"), extra.dump() + "\n");
    CHECK_THROWS_WITH_AS(load_dataset(tmp.file("extra.jsonl"), schema_path, nullptr),
                         doctest::Contains("extra"), Error);
  }
  {
    write_text(tmp.file("empty.jsonl"), "\n");
    CHECK_THROWS_WITH_AS(load_dataset(tmp.file("empty.jsonl"), schema_path, nullptr),
                         doctest::Contains("empty dataset"), Error);
  }
  {
    write_text(tmp.file("not_schema.json"), "{\"format\": \"something-else\"}\n");
    CHECK_THROWS_AS(load_dataset(tmp.file("ok.jsonl"), tmp.file("not_schema.json"), nullptr),
                    Error);
  }

  // Suspicious but loadable labels surface as warnings, not errors.
  {
    json odd = rec;
    for (auto& v : odd["y_c"]) v = 0;
    for (auto& v : odd["y_o"]) v = 0;
    odd["y_o"][0] = 1;
    write_text(tmp.file("warn.jsonl"), odd.dump() + "\n");
    std::vector<std::string> warnings;
    Dataset w = load_dataset(tmp.file("warn.jsonl"), schema_path, &warnings);
    REQUIRE(w.lists.size() == 1);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("order without click") != std::string::npos);

    for (auto& v : odd["y_o"]) v = 0;
    write_text(tmp.file("warn2.jsonl"), odd.dump() + "\n");
    warnings.clear();
    load_dataset(tmp.file("warn2.jsonl"), schema_path, &warnings);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("no positive labels") != std::string::npos);
  }
}

TEST_CASE("schema stats fitting marks the schema and stays finite") {
  GeneratorConfig c = small_config();
  Dataset d = generate_synthetic_dataset(c, 11);
  CHECK(!d.schema.fitted);
  auto warnings = fit_schema_stats(d);
  CHECK(warnings.empty());
  CHECK(d.schema.fitted);
  for (const auto& f : d.schema.numeric) {
    CHECK(std::isfinite(f.mean));
    CHECK(std::isfinite(f.std_dev));
    CHECK(f.std_dev > 0.0);
    CHECK(!f.clamped);
  }
}

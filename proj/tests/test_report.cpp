#include <doctest.h>

#include <cctype>
#include <sstream>
#include <string>
#include <vector>

#include "core/data.hpp"
#include "core/report.hpp"
#include "core/train.hpp"
#include "test_util.hpp"

using namespace ltr;

namespace {

Dataset small_dataset(uint64_t seed) {
  GeneratorConfig c;
  c.lists = 60;
  c.min_products = 4;
  c.max_products = 9;
  c.ts_span = 100000;
  return generate_synthetic_dataset(c, seed);
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(' ');
  size_t b = s.find_last_not_of(' ');
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

// Signed two-decimal percent, sign omitted only for the literal zero cell.
bool is_pct(const std::string& cell) {
  std::string s = cell;
  if (s.empty() || s.back() != '%') return false;
  s.pop_back();
  size_t i = 0;
  if (s == "0.00") return true;
  if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
  else return false;
  size_t digits = 0;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
    ++i;
    ++digits;
  }
  if (digits == 0 || i >= s.size() || s[i] != '.') return false;
  ++i;
  return s.size() - i == 2 && std::isdigit(static_cast<unsigned char>(s[i])) &&
         std::isdigit(static_cast<unsigned char>(s[i + 1]));
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("comparing a model against itself reports flat zero uplift") {
  Dataset d = small_dataset(41);
  ModelArtifact a = make_random_model(5, d.schema);
  a.name = "cand";
  ModelArtifact b = make_random_model(5, d.schema);
  b.name = "base";

  std::vector<const ModelArtifact*> models{&a, &b};
  CompareReport rep = build_compare_report(models, 1, d, 15);
  REQUIRE(rep.rows.size() == 2);
  CHECK(rep.baseline == "base");
  CHECK(rep.lists == d.lists.size());
  for (const auto& row : rep.rows) {
    for (const MetricComparison* m : {&row.ndcg_c, &row.ndcg_o, &row.aiv}) {
      CHECK(m->uplift == "0.00%");
      CHECK(m->test.t == 0.0);
      CHECK(m->test.p == doctest::Approx(1.0));
      CHECK(m->test.diff == 0.0);
    }
  }

  CHECK_THROWS_AS(build_compare_report(std::vector<const ModelArtifact*>{&a}, 0, d, 15),
                  Error);
  CHECK_THROWS_AS(build_compare_report(models, 2, d, 15), Error);
}

TEST_CASE("the six-model grid renders as a two-loss three-architecture table") {
  Dataset d = small_dataset(42);

  std::vector<ModelArtifact> arts;
  const ModelKind kinds[] = {ModelKind::kTwoTower, ModelKind::kCrossEncoder,
                             ModelKind::kTransformer};
  const LossKind losses[] = {LossKind::kSoftmaxCE, LossKind::kRankNet};
  for (LossKind lk : losses) {
    for (ModelKind mk : kinds) {
      TrainConfig cfg;
      cfg.kind = mk;
      cfg.loss.kind = lk;
      cfg.hidden = 8;
      cfg.blocks = 1;
      cfg.epochs = 0;
      cfg.seed = 7;
      TrainResult r = train_neural(d, cfg);
      r.artifact.name = std::string(model_kind_name(mk)) + "_" + loss_kind_name(lk);
      arts.push_back(std::move(r.artifact));
    }
  }
  arts.push_back(make_random_model(2, d.schema));

  std::vector<const ModelArtifact*> models;
  for (const auto& a : arts) models.push_back(&a);
  CompareReport rep = build_compare_report(models, models.size() - 1, d, 15);
  REQUIRE(rep.rows.size() == 7);

  ojson j = compare_to_json(rep);
  CompareReport back = compare_from_json(j, "report");
  CHECK(compare_to_json(back) == j);

  std::string table = render_report(j, "table");
  auto lines = lines_of(table);
  REQUIRE(lines.size() >= 8);

  // Header rows carry the loss titles and the architecture labels.
  CHECK(table.find("CE loss") != std::string::npos);
  CHECK(table.find("RN loss") != std::string::npos);
  size_t arch_line = 0;
  for (size_t i = 0; i < lines.size(); ++i)
    if (lines[i].find("two_tower") != std::string::npos &&
        lines[i].find("transformer") != std::string::npos)
      arch_line = i;
  REQUIRE(arch_line > 0);
  const size_t label_w = 12, cell_w = 15;
  std::string archs = lines[arch_line];
  CHECK(trim(archs.substr(label_w + 0 * cell_w, cell_w)) == "two_tower");
  CHECK(trim(archs.substr(label_w + 1 * cell_w, cell_w)) == "cross_encoder");
  CHECK(trim(archs.substr(label_w + 2 * cell_w, cell_w)) == "transformer");
  CHECK(trim(archs.substr(label_w + 3 * cell_w, cell_w)) == "two_tower");

  int metric_rows = 0;
  for (const auto& line : lines) {
    if (line.rfind("NDCG_c@15", 0) == 0 || line.rfind("NDCG_o@15", 0) == 0 ||
        line.rfind("AIV@15", 0) == 0) {
      ++metric_rows;
      REQUIRE(line.size() >= label_w + 6 * cell_w - 1);
      for (int cell = 0; cell < 6; ++cell) {
        size_t at = label_w + static_cast<size_t>(cell) * cell_w;
        size_t len = std::min(cell_w, line.size() - at);
        std::string v = trim(line.substr(at, len));
        CHECK_MESSAGE(is_pct(v), "cell \"", v, "\" in row: ", line);
      }
    }
  }
  CHECK(metric_rows == 3);

  // The baseline sits below the grid without an uplift suffix.
  bool baseline_line = false;
  for (const auto& line : lines)
    if (line.rfind("random:", 0) == 0) {
      baseline_line = true;
      CHECK(line.find("uplift") == std::string::npos);
    }
  CHECK(baseline_line);

  std::string csv = render_report(j, "csv");
  auto csv_lines = lines_of(csv);
  REQUIRE(csv_lines.size() == 1 + 7 * 3);
  CHECK(csv_lines[0] == "model,metric,mean,baseline_mean,uplift_pct,ci_low_pct,ci_high_pct,p");
  for (size_t i = 1; i < csv_lines.size(); ++i) {
    size_t commas = 0;
    for (char ch : csv_lines[i]) commas += ch == ',';
    CHECK(commas == 7);
  }

  std::string kv = render_report(j, "kv");
  CHECK(kv.find("command = compare\n") != std::string::npos);
  CHECK(kv.find("baseline = random\n") != std::string::npos);
  CHECK(kv.find("two_tower_softmax_ce.ndcg_c.uplift = ") != std::string::npos);
  CHECK(kv.find("transformer_ranknet.aiv.p = ") != std::string::npos);
}

TEST_CASE("a partial model set falls back to the flat table") {
  Dataset d = small_dataset(43);
  ModelArtifact a = make_random_model(1, d.schema);
  a.name = "a";
  ModelArtifact b = make_random_model(9, d.schema);
  b.name = "b";
  std::vector<const ModelArtifact*> models{&a, &b};
  CompareReport rep = build_compare_report(models, 0, d, 15);
  std::string table = render_report(compare_to_json(rep), "table");
  CHECK(table.find("CE loss") == std::string::npos);
  CHECK(table.find("model") != std::string::npos);
  auto lines = lines_of(table);
  bool found_b = false;
  for (const auto& line : lines)
    if (line.rfind("b", 0) == 0) {
      found_b = true;
      std::string cell = trim(line.substr(18, 15));
      CHECK(is_pct(cell));
    }
  CHECK(found_b);
}

TEST_CASE("evaluate and abtest reports render in all formats") {
  MetricReport r;
  r.model = "two_tower";
  r.ndcg_c = 0.61234567;
  r.ndcg_o = 0.5;
  r.aiv = 12.344;
  r.lists = 100;
  r.ndcg_c_lists = 100;
  r.ndcg_o_lists = 73;
  ojson j = evaluate_to_json(r, 15);
  CHECK(j["command"] == "evaluate");

  std::string table = render_report(j, "table");
  CHECK(table.find("two_tower") != std::string::npos);
  CHECK(table.find("NDCG_c@15") != std::string::npos);
  CHECK(table.find("0.6123") != std::string::npos);
  CHECK(table.find("12.34") != std::string::npos);

  std::string kv = render_report(j, "kv");
  CHECK(kv.find("ndcg_c = 0.612346\n") != std::string::npos);
  CHECK(kv.find("lists = 100\n") != std::string::npos);

  std::string csv = render_report(j, "csv");
  auto csv_lines = lines_of(csv);
  REQUIRE(csv_lines.size() == 4);
  CHECK(csv_lines[0] == "metric,value");

  TTestResult t;
  t.mean_a = 1.5;
  t.mean_b = 1.0;
  t.diff = 0.5;
  t.rel_uplift = 50.0;
  t.t = 2.5;
  t.dof = 17.3;
  t.p = 0.023;
  t.ci_low = 0.1;
  t.ci_high = 0.9;
  ojson aj = abtest_to_json(t, 40, 45);
  std::string akv = render_report(aj, "kv");
  CHECK(akv.find("command = abtest\n") != std::string::npos);
  CHECK(akv.find("n_a = 40\n") != std::string::npos);
  CHECK(akv.find("rel_uplift = 50\n") != std::string::npos);
  std::string acsv = render_report(aj, "csv");
  auto acsv_lines = lines_of(acsv);
  REQUIRE(acsv_lines.size() == 2);
  CHECK(acsv_lines[0].rfind("n_a,n_b,mean_a", 0) == 0);
}

TEST_CASE("render rejects unknown formats and commands") {
  MetricReport r;
  r.model = "m";
  ojson j = evaluate_to_json(r, 15);
  CHECK_THROWS_WITH_AS(render_report(j, "yaml"), doctest::Contains("format"), Error);

  json bogus = {{"command", "sideways"}};
  CHECK_THROWS_WITH_AS(render_report(bogus, "kv"), doctest::Contains("sideways"), Error);

  json empty = json::object();
  CHECK_THROWS_AS(render_report(empty, "kv"), Error);

  json broken = {{"command", "compare"}, {"cutoff", 15}};
  CHECK_THROWS_AS(render_report(broken, "table"), Error);
}

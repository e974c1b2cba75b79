#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "core/data.hpp"
#include "core/metrics.hpp"
#include "core/train.hpp"
#include "test_util.hpp"

using namespace ltr;

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("ltrlab_train_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
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

void write_bytes(const std::string& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

Dataset tiny_dataset(uint64_t seed, size_t lists = 60) {
  GeneratorConfig c;
  c.lists = lists;
  c.min_products = 4;
  c.max_products = 9;
  c.ts_span = 100000;
  return generate_synthetic_dataset(c, seed);
}

TrainConfig tiny_config(ModelKind kind) {
  TrainConfig c;
  c.kind = kind;
  c.hidden = 8;
  c.blocks = 1;
  c.epochs = 1;
  c.batch_size = 25;
  c.valid_fraction = 0.1;
  c.seed = 3;
  return c;
}

void check_same_scores(const ModelArtifact& a, const ModelArtifact& b, const Dataset& d,
                       size_t lists) {
  for (size_t i = 0; i < lists && i < d.lists.size(); ++i) {
    auto sa = score_list(a, d, i);
    auto sb = score_list(b, d, i);
    REQUIRE(sa.size() == sb.size());
    for (size_t j = 0; j < sa.size(); ++j) CHECK(sa[j] == sb[j]);
  }
}

}  // namespace

TEST_CASE("train config presets and validation") {
  TrainConfig desk_tt = TrainConfig::preset("desk", ModelKind::kTwoTower);
  CHECK(desk_tt.hidden == 32);
  CHECK(desk_tt.blocks == 2);
  CHECK(desk_tt.dropout == 0.0);
  CHECK(desk_tt.learning_rate == 1e-3);
  TrainConfig desk_tf = TrainConfig::preset("desk", ModelKind::kTransformer);
  CHECK(desk_tf.learning_rate == 5e-4);
  CHECK(desk_tf.dropout == 0.1);

  TrainConfig paper_cr = TrainConfig::preset("paper", ModelKind::kCrossEncoder);
  CHECK(paper_cr.hidden == 1024);
  CHECK(paper_cr.blocks == 3);
  CHECK(paper_cr.batch_size == 1000);
  CHECK(paper_cr.d_cat == 128);
  CHECK(paper_cr.d_text == 512);
  CHECK(paper_cr.dropout == 0.3);
  TrainConfig paper_tf = TrainConfig::preset("paper", ModelKind::kTransformer);
  CHECK(paper_tf.learning_rate == 1e-4);
  CHECK(paper_tf.dropout == 0.5);

  CHECK_THROWS_AS(TrainConfig::preset("bogus", ModelKind::kTwoTower), Error);
  CHECK_THROWS_AS(TrainConfig::preset("desk", ModelKind::kGbdt), Error);

  TrainConfig c;
  c.hidden = 0;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("hidden"), Error);
  c = TrainConfig{};
  c.dropout = 1.0;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("dropout"), Error);
  c = TrainConfig{};
  c.learning_rate = 0.0;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("learning_rate"), Error);
  c = TrainConfig{};
  c.valid_fraction = 0.5;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("valid_fraction"), Error);
  c = TrainConfig{};
  c.kind = ModelKind::kGbdt;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("kind"), Error);

  json j = {{"kind", "cross_encoder"}, {"preset", "desk"}, {"hidden", 12}};
  TrainConfig merged = TrainConfig::from_json(j, "cfg");
  CHECK(merged.kind == ModelKind::kCrossEncoder);
  CHECK(merged.hidden == 12);
  CHECK(merged.dropout == 0.1);

  json bad = {{"kind", "two_tower"}, {"hiden", 8}};
  CHECK_THROWS_WITH_AS(TrainConfig::from_json(bad, "cfg"), doctest::Contains("hiden"),
                       Error);

  TrainConfig rt = tiny_config(ModelKind::kTransformer);
  CHECK(TrainConfig::from_json(rt.to_json(), "cfg").to_json() == rt.to_json());
}

TEST_CASE("neural training is deterministic per seed") {
  Dataset d = tiny_dataset(21);
  TrainConfig cfg = tiny_config(ModelKind::kTwoTower);

  TrainResult a = train_neural(d, cfg);
  TrainResult b = train_neural(d, cfg);
  CHECK(a.final_loss == b.final_loss);
  // Per-epoch wall time is the one nondeterministic log field.
  ojson la = a.log, lb = b.log;
  for (auto& e : la) e.erase("seconds");
  for (auto& e : lb) e.erase("seconds");
  CHECK(la == lb);
  check_same_scores(a.artifact, b.artifact, d, 5);

  TrainConfig other = cfg;
  other.seed = 4;
  TrainResult c = train_neural(d, other);
  CHECK(c.final_loss != a.final_loss);

  REQUIRE(a.log.size() == cfg.epochs);
  const auto& entry = a.log[0];
  CHECK(entry.contains("epoch"));
  CHECK(entry.contains("train_loss"));
  CHECK(entry.contains("valid_ndcg_c"));
  CHECK(entry.contains("seconds"));
  CHECK(entry["epoch"] == 1);
  CHECK(std::isfinite(entry["train_loss"].get<double>()));

  CHECK(a.artifact.kind == ModelKind::kTwoTower);
  CHECK(a.artifact.name == "two_tower");
  CHECK(a.artifact.hyper == cfg.to_json());
  CHECK(a.artifact.schema.fitted);
}

TEST_CASE("training without a validation slice logs no validation metric") {
  Dataset d = tiny_dataset(22);
  TrainConfig cfg = tiny_config(ModelKind::kCrossEncoder);
  cfg.valid_fraction = 0.0;
  TrainResult r = train_neural(d, cfg);
  REQUIRE(r.log.size() == 1);
  CHECK(!r.log[0].contains("valid_ndcg_c"));
}

TEST_CASE("flat timestamps fall back to training on everything with a warning") {
  Dataset d = tiny_dataset(23, 40);
  for (auto& l : d.lists) l.ts = 777;
  TrainConfig cfg = tiny_config(ModelKind::kTwoTower);
  std::vector<std::string> warnings;
  TrainResult r = train_neural(d, cfg, &warnings);
  REQUIRE(r.log.size() == 1);
  CHECK(!r.log[0].contains("valid_ndcg_c"));
  bool mentioned = false;
  for (const auto& w : warnings)
    mentioned = mentioned || w.find("validation slice unavailable") != std::string::npos;
  CHECK(mentioned);
}

TEST_CASE("zero epochs produce a usable untouched model") {
  Dataset d = tiny_dataset(24);
  TrainConfig cfg = tiny_config(ModelKind::kTransformer);
  cfg.epochs = 0;
  TrainResult a = train_neural(d, cfg);
  TrainResult b = train_neural(d, cfg);
  CHECK(a.log.empty());
  CHECK(a.final_loss == 0.0);
  check_same_scores(a.artifact, b.artifact, d, 5);

  EvalConfig ec;
  MetricReport rep = evaluate_model(a.artifact, d, ec);
  CHECK(rep.lists == d.lists.size());
  CHECK(std::isfinite(rep.ndcg_c));
}

TEST_CASE("embedding width overrides reshape the artifact schema only") {
  Dataset d = tiny_dataset(25);
  TrainConfig cfg = tiny_config(ModelKind::kTwoTower);
  cfg.epochs = 0;
  cfg.d_cat = 3;
  cfg.d_text = 5;
  TrainResult r = train_neural(d, cfg);
  for (const auto& s : r.artifact.schema.product_cat) CHECK(s.dim == 3);
  for (const auto& s : r.artifact.schema.product_text) CHECK(s.dim == 5);
  for (const auto& s : r.artifact.schema.context_cat) CHECK(s.dim == 3);
  // Dim overrides keep layout compatibility with the source dataset.
  auto scores = score_list(r.artifact, d, 0);
  CHECK(scores.size() == d.lists[0].products.size());
}

TEST_CASE("an absurd learning rate raises a divergence error") {
  Dataset d = tiny_dataset(26, 40);
  TrainConfig cfg = tiny_config(ModelKind::kTwoTower);
  cfg.loss.kind = LossKind::kRankNet;
  cfg.learning_rate = 1e308;
  cfg.epochs = 3;
  cfg.batch_size = 1000;
  cfg.valid_fraction = 0.0;
  try {
    train_neural(d, cfg);
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.status() == Status::kDiverged);
    CHECK(std::string(e.what()).find("diverged") != std::string::npos);
  }
}

TEST_CASE("model artifacts round trip through disk for every kind") {
  TempDir tmp;
  Dataset d = tiny_dataset(27);

  // Neural artifact with trained tables.
  TrainConfig cfg = tiny_config(ModelKind::kCrossEncoder);
  TrainResult r = train_neural(d, cfg);
  std::string p = tmp.file("ce.ltr");
  save_model(r.artifact, p);
  ModelArtifact back = load_model(p);
  CHECK(back.kind == ModelKind::kCrossEncoder);
  CHECK(back.name == r.artifact.name);
  CHECK(back.hyper == r.artifact.hyper);
  check_same_scores(r.artifact, back, d, 8);

  // Saving the loaded copy reproduces the file byte for byte.
  std::string p2 = tmp.file("ce2.ltr");
  save_model(back, p2);
  CHECK(read_bytes(p) == read_bytes(p2));

  GbdtConfig gcfg;
  gcfg.trees = 5;
  TrainResult g = train_gbdt_model(d, gcfg);
  std::string gp = tmp.file("g.ltr");
  save_model(g.artifact, gp);
  ModelArtifact gback = load_model(gp);
  CHECK(gback.kind == ModelKind::kGbdt);
  check_same_scores(g.artifact, gback, d, 8);
  CHECK(std::isnan(g.final_loss));
  CHECK(g.final_train_ndcg > 0.0);

  ModelArtifact rnd = make_random_model(11, d.schema);
  std::string rp = tmp.file("r.ltr");
  save_model(rnd, rp);
  check_same_scores(rnd, load_model(rp), d, 8);

  ModelArtifact oracle = make_oracle_model(d);
  std::string op = tmp.file("o.ltr");
  save_model(oracle, op);
  check_same_scores(oracle, load_model(op), d, 8);
}

TEST_CASE("the oracle scorer dominates the random baseline") {
  Dataset d = tiny_dataset(28, 100);
  EvalConfig ec;
  MetricReport ro = evaluate_model(make_oracle_model(d), d, ec);
  MetricReport rr = evaluate_model(make_random_model(5, d.schema), d, ec);
  CHECK(ro.ndcg_c > rr.ndcg_c + 0.1);

  Dataset hand;
  hand.schema = d.schema;
  hand.lists.push_back(d.lists[0]);
  // generator_config stays null, so the oracle cannot be reconstructed.
  CHECK_THROWS_WITH_AS(make_oracle_model(hand), doctest::Contains("generated"), Error);
}

TEST_CASE("corrupt artifact files are rejected") {
  TempDir tmp;
  Dataset d = tiny_dataset(29);
  ModelArtifact rnd = make_random_model(3, d.schema);
  std::string p = tmp.file("m.ltr");
  save_model(rnd, p);
  std::string bytes = read_bytes(p);
  REQUIRE(bytes.size() > 64);

  {
    write_bytes(tmp.file("trunc.ltr"), bytes.substr(0, bytes.size() / 2));
    try {
      load_model(tmp.file("trunc.ltr"));
      FAIL("expected a format error");
    } catch (const Error& e) {
      CHECK(e.status() == Status::kFormatError);
    }
  }
  {
    std::string flipped = bytes;
    flipped[flipped.size() - 1] = static_cast<char>(flipped[flipped.size() - 1] ^ 0x5a);
    write_bytes(tmp.file("flip.ltr"), flipped);
    CHECK_THROWS_WITH_AS(load_model(tmp.file("flip.ltr")),
                         doctest::Contains("checksum"), Error);
  }
  {
    std::string magic = bytes;
    magic[0] = 'X';
    write_bytes(tmp.file("magic.ltr"), magic);
    CHECK_THROWS_WITH_AS(load_model(tmp.file("magic.ltr")),
                         doctest::Contains("not a model artifact"), Error);
  }
  {
    std::string ver = bytes;
    ver[8] = 99;  // format version field
    write_bytes(tmp.file("ver.ltr"), ver);
    CHECK_THROWS_WITH_AS(load_model(tmp.file("ver.ltr")),
                         doctest::Contains("version"), Error);
  }
  CHECK_THROWS_AS(load_model(tmp.file("missing.ltr")), Error);
}

TEST_CASE("schema layout mismatches are rejected at scoring time") {
  Dataset d = tiny_dataset(30);
  TrainConfig cfg = tiny_config(ModelKind::kTwoTower);
  cfg.epochs = 0;
  TrainResult r = train_neural(d, cfg);

  GeneratorConfig other;
  other.lists = 10;
  other.min_products = 4;
  other.max_products = 9;
  other.ts_span = 100000;
  other.product_cat = {{51, 8}, {12, 4}};  // different vocab
  Dataset d2 = generate_synthetic_dataset(other, 30);
  try {
    score_list(r.artifact, d2, 0);
    FAIL("expected a schema mismatch");
  } catch (const Error& e) {
    CHECK(e.status() == Status::kSchemaMismatch);
  }

  // The random baseline ignores features entirely.
  ModelArtifact rnd = make_random_model(1, d.schema);
  CHECK(score_list(rnd, d2, 0).size() == d2.lists[0].products.size());
}

// End-to-end checks for the ltrlab binary. Every case shells out to the real
// executable (path injected by the build), captures exit code and streams,
// and inspects the files the run leaves behind.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "core/common.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("ltrlab_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), "cannot open " << p.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
  REQUIRE(out.good());
}

json load_json(const fs::path& p) {
  REQUIRE_MESSAGE(fs::exists(p), p.string() << " does not exist");
  return json::parse(read_bytes(p));
}

std::string fnv_hex(const fs::path& p) {
  std::string bytes = read_bytes(p);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(ltr::fnv1a64(bytes.data(), bytes.size())));
  return buf;
}

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

// Runs the binary with cwd set to `cwd`; env is a space-separated VAR=value list.
CliRun run_cli(const fs::path& cwd, const std::string& args, const std::string& env = "") {
  static int counter = 0;
  fs::path of = cwd / ("cli_stdout_" + std::to_string(counter) + ".txt");
  fs::path ef = cwd / ("cli_stderr_" + std::to_string(counter) + ".txt");
  ++counter;
  std::string cmd = "cd '" + cwd.string() + "' && env " + env + " '" + LTRLAB_CLI_PATH + "' " +
                    args + " >'" + of.string() + "' 2>'" + ef.string() + "'";
  int rc = std::system(cmd.c_str());
  CliRun r;
  if (rc != -1 && WIFEXITED(rc)) r.code = WEXITSTATUS(rc);
  r.out = read_bytes(of);
  r.err = read_bytes(ef);
  return r;
}

const char* kTinyGen = R"({"lists": 60, "products_per_list": [4, 9], "ts_span": 100000})";

// One shared workspace: a generated 60-list dataset plus a gbdt and a
// two_tower artifact, built through the binary exactly once.
struct Workspace {
  TempDir td;
  fs::path gen;
  fs::path gb;
  fs::path tt;
  fs::path gen_cfg;
  CliRun gen_run, gb_run, tt_run;
};

Workspace& ws() {
  static Workspace w;
  static bool ready = false;
  if (!ready) {
    w.gen = w.td.path / "gen";
    w.gb = w.td.path / "m_gbdt";
    w.tt = w.td.path / "m_tt";
    w.gen_cfg = w.td.path / "gen.json";
    write_text(w.gen_cfg, kTinyGen);
    w.gen_run = run_cli(w.td.path, "generate --config gen.json --seed 5 --train-fraction 0.8 "
                                   "--out gen");
    REQUIRE_MESSAGE(w.gen_run.code == 0, w.gen_run.err);

    write_text(w.td.path / "gb.json", R"({"trees": 5})");
    w.gb_run = run_cli(w.td.path, "train gen/train.jsonl --kind gbdt --config gb.json "
                                  "--name gb --out m_gbdt");
    REQUIRE_MESSAGE(w.gb_run.code == 0, w.gb_run.err);

    write_text(w.td.path / "tt.json",
               R"({"hidden": 8, "blocks": 1, "epochs": 1, "batch_size": 25,)"
               R"( "valid_fraction": 0.0})");
    w.tt_run = run_cli(w.td.path, "train gen/train.jsonl --kind two_tower --config tt.json "
                                  "--name tt --seed 3 --out m_tt");
    REQUIRE_MESSAGE(w.tt_run.code == 0, w.tt_run.err);
    ready = true;
  }
  return w;
}

}  // namespace

TEST_CASE("cli: version flag and argument errors") {
  TempDir td;
  CliRun v = run_cli(td.path, "--version");
  CHECK(v.code == 0);
  CHECK(v.out.find("ltrlab 1.0.0") != std::string::npos);

  CHECK(run_cli(td.path, "").code != 0);
  CHECK(run_cli(td.path, "frobnicate").code != 0);

  CliRun preset = run_cli(td.path, "generate --preset nope");
  CHECK(preset.code == 1);
  CHECK(preset.err.find("unknown generate preset") != std::string::npos);
}

TEST_CASE("cli: generate writes both splits and a checksummed manifest") {
  Workspace& w = ws();
  for (const char* name :
       {"train.jsonl", "train.schema.json", "test.jsonl", "test.schema.json", "manifest.json"})
    CHECK_MESSAGE(fs::exists(w.gen / name), name);

  CHECK(w.gen_run.out.find("generated 60 lists (train 48, test 12)") != std::string::npos);

  json man = load_json(w.gen / "manifest.json");
  CHECK(man.at("manifest_version") == 1);
  CHECK(man.at("tool") == "ltrlab 1.0.0");
  CHECK(man.at("command") == "generate");
  CHECK(man.at("seed") == 5);
  CHECK(man.at("config").at("lists") == 60);
  CHECK(man.at("config").at("train_fraction").get<double>() == doctest::Approx(0.8));
  CHECK(man.at("metrics").at("lists") == 60);
  CHECK(man.at("metrics").at("train_lists") == 48);
  CHECK(man.at("metrics").at("test_lists") == 12);
  CHECK(man.at("timings").at("seconds").get<double>() >= 0.0);

  const json& outputs = man.at("outputs");
  for (const char* role : {"train_data", "train_schema", "test_data", "test_schema"}) {
    const json& entry = outputs.at(role);
    // Recorded paths are relative to the invocation directory.
    fs::path p = w.td.path / entry.at("path").get<std::string>();
    CHECK(fs::exists(p));
    CHECK(entry.at("fnv64").get<std::string>() == fnv_hex(p));
  }
}

TEST_CASE("cli: generation is deterministic in the seed") {
  TempDir td;
  write_text(td.path / "gen.json", kTinyGen);
  CliRun a = run_cli(td.path, "generate --config gen.json --seed 9 --out g1");
  CliRun b = run_cli(td.path, "generate --config gen.json --seed 9 --out g2");
  CliRun c = run_cli(td.path, "generate --config gen.json --seed 10 --out g3");
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  REQUIRE(c.code == 0);
  CHECK(read_bytes(td.path / "g1/train.jsonl") == read_bytes(td.path / "g2/train.jsonl"));
  CHECK(read_bytes(td.path / "g1/test.schema.json") ==
        read_bytes(td.path / "g2/test.schema.json"));
  CHECK(read_bytes(td.path / "g1/train.jsonl") != read_bytes(td.path / "g3/train.jsonl"));
}

TEST_CASE("cli: generate rejects unknown config keys") {
  TempDir td;
  write_text(td.path / "gen.json", R"({"lists": 5, "clicks": true})");
  CliRun r = run_cli(td.path, "generate --config gen.json");
  CHECK(r.code == 2);
  CHECK(r.err.find("unknown key \"clicks\"") != std::string::npos);
}

TEST_CASE("cli: gbdt training writes model, log, and manifest") {
  Workspace& w = ws();
  CHECK(fs::exists(w.gb / "model.ltr"));
  CHECK(w.gb_run.out.find("trained gbdt model \"gb\"") != std::string::npos);

  json log = load_json(w.gb / "train_log.json");
  CHECK(log.at("log").size() == 5);
  CHECK(log.at("final_train_ndcg").get<double>() > 0.0);

  json man = load_json(w.gb / "manifest.json");
  CHECK(man.at("command") == "train");
  CHECK(man.at("config").at("kind") == "gbdt");
  CHECK(man.at("metrics").contains("final_train_ndcg"));
  for (const char* role : {"data", "schema"}) {
    const json& entry = man.at("inputs").at(role);
    fs::path p = w.td.path / entry.at("path").get<std::string>();
    CHECK(entry.at("fnv64").get<std::string>() == fnv_hex(p));
  }
}

TEST_CASE("cli: neural training is seed-deterministic") {
  Workspace& w = ws();
  CHECK(w.tt_run.out.find("trained two_tower model \"tt\"") != std::string::npos);

  CliRun a = run_cli(w.td.path, "train gen/train.jsonl --kind two_tower --config tt.json "
                                "--name tt --seed 3 --out t_same");
  REQUIRE_MESSAGE(a.code == 0, a.err);
  CHECK(read_bytes(w.tt / "model.ltr") == read_bytes(w.td.path / "t_same/model.ltr"));

  CliRun b = run_cli(w.td.path, "train gen/train.jsonl --kind two_tower --config tt.json "
                                "--name tt --seed 4 --out t_other");
  REQUIRE_MESSAGE(b.code == 0, b.err);
  CHECK(read_bytes(w.tt / "model.ltr") != read_bytes(w.td.path / "t_other/model.ltr"));
}

TEST_CASE("cli: unknown training config keys fail with the key named") {
  Workspace& w = ws();
  write_text(w.td.path / "bad_train.json", R"({"hiden": 8})");
  CliRun r = run_cli(w.td.path, "train gen/train.jsonl --config bad_train.json --out bad");
  CHECK(r.code == 2);
  CHECK(r.err.find("hiden") != std::string::npos);
}

TEST_CASE("cli: evaluate reports metrics and honours env overrides") {
  Workspace& w = ws();
  CliRun r = run_cli(w.td.path, "evaluate m_gbdt/model.ltr gen/test.jsonl --cutoff 10 "
                                "--format kv --out ev");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(r.out.find("ndcg_c = ") != std::string::npos);

  json rep = load_json(w.td.path / "ev/report.json");
  CHECK(rep.at("command") == "evaluate");
  CHECK(rep.at("cutoff") == 10);
  CHECK(rep.at("metrics").at("lists") == 12);
  double ndcg = rep.at("metrics").at("ndcg_c").get<double>();
  CHECK(ndcg > 0.0);
  CHECK(ndcg <= 1.0);
  CHECK(fs::exists(w.td.path / "ev/report.kv"));
  CHECK(fs::exists(w.td.path / "ev/report.txt"));
  json man = load_json(w.td.path / "ev/manifest.json");
  CHECK(man.at("metrics") == rep);

  CliRun e = run_cli(w.td.path, "evaluate m_gbdt/model.ltr gen/test.jsonl",
                     "LTRLAB_CUTOFF=7 LTRLAB_FORMAT=kv LTRLAB_OUT=ev_env");
  REQUIRE_MESSAGE(e.code == 0, e.err);
  CHECK(e.out.find("ndcg_c = ") != std::string::npos);
  CHECK(load_json(w.td.path / "ev_env/report.json").at("cutoff") == 7);

  CliRun bad = run_cli(w.td.path, "evaluate m_gbdt/model.ltr gen/test.jsonl --cutoff 0");
  CHECK(bad.code == 1);
  CHECK(bad.err.find("cutoff") != std::string::npos);
}

TEST_CASE("cli: compare of identical scorers is flat and baseline picks by name") {
  Workspace& w = ws();
  CliRun ra = run_cli(w.td.path, "train gen/train.jsonl --kind random --seed 5 --name a --out ra");
  CliRun rb = run_cli(w.td.path, "train gen/train.jsonl --kind random --seed 5 --name b --out rb");
  REQUIRE_MESSAGE(ra.code == 0, ra.err);
  REQUIRE_MESSAGE(rb.code == 0, rb.err);

  CliRun cmp = run_cli(w.td.path, "compare --models ra/model.ltr rb/model.ltr "
                                  "--data gen/test.jsonl --out cmp");
  REQUIRE_MESSAGE(cmp.code == 0, cmp.err);
  CHECK(cmp.out.find("0.00%") != std::string::npos);
  for (const char* name : {"compare.json", "compare.kv", "compare.txt", "compare.csv"})
    CHECK_MESSAGE(fs::exists(w.td.path / "cmp" / name), name);

  json rep = load_json(w.td.path / "cmp/compare.json");
  CHECK(rep.at("command") == "compare");
  CHECK(rep.at("baseline") == "a");
  REQUIRE(rep.at("models").size() == 2);
  for (const auto& model : rep.at("models"))
    for (const char* metric : {"ndcg_c", "ndcg_o", "aiv"}) {
      const json& m = model.at("metrics").at(metric);
      CHECK(m.at("uplift") == "0.00%");
      CHECK(m.at("t").get<double>() == 0.0);
      CHECK(m.at("p").get<double>() == 1.0);
    }
  std::string csv = read_bytes(w.td.path / "cmp/compare.csv");
  CHECK(csv.rfind("model,metric,mean,baseline_mean,uplift_pct,ci_low_pct,ci_high_pct,p\n", 0) ==
        0);
  json man = load_json(w.td.path / "cmp/manifest.json");
  CHECK(man.at("config").at("baseline_index") == 0);
  CHECK(man.at("inputs").at("models").size() == 2);

  CliRun named = run_cli(w.td.path, "compare --models ra/model.ltr rb/model.ltr "
                                    "--data gen/test.jsonl --baseline b --out cmp_b");
  REQUIRE_MESSAGE(named.code == 0, named.err);
  json man_b = load_json(w.td.path / "cmp_b/manifest.json");
  CHECK(man_b.at("config").at("baseline") == "b");
  CHECK(man_b.at("config").at("baseline_index") == 1);

  CliRun missing = run_cli(w.td.path, "compare --models ra/model.ltr rb/model.ltr "
                                      "--data gen/test.jsonl --baseline zzz --out cmp_z");
  CHECK(missing.code == 4);
  CHECK(missing.err.find("baseline \"zzz\"") != std::string::npos);

  CHECK(run_cli(w.td.path, "compare --models ra/model.ltr --data gen/test.jsonl").code != 0);
}

TEST_CASE("cli: abtest matches the welch oracle and rejects bad sample files") {
  TempDir td;
  std::vector<double> a = {1.0, 1.1, 0.9, 1.2, 0.8, 1.05};
  std::vector<double> b = {1.3, 1.25, 1.4, 1.2, 1.35};
  write_text(td.path / "a.txt", "# baseline samples\n1.0\n1.1\n\n0.9\n1.2\n0.8\n1.05\n");
  write_text(td.path / "b.txt", "1.3\n1.25\n1.4\n1.2\n1.35\n");

  CliRun r = run_cli(td.path, "abtest a.txt b.txt --format json --out ab");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  json rep = json::parse(r.out);
  CHECK(rep.at("command") == "abtest");
  CHECK(rep.at("n_a") == 6);
  CHECK(rep.at("n_b") == 5);

  testutil::WelchOracle expect = testutil::oracle_welch(a, b);
  CHECK(rep.at("t").get<double>() == doctest::Approx(expect.t).epsilon(1e-10));
  CHECK(rep.at("dof").get<double>() == doctest::Approx(expect.dof).epsilon(1e-10));
  CHECK(rep.at("p").get<double>() == doctest::Approx(expect.p).epsilon(1e-8));
  CHECK(rep.at("ci_low").get<double>() == doctest::Approx(expect.ci_low).epsilon(1e-8));
  CHECK(rep.at("ci_high").get<double>() == doctest::Approx(expect.ci_high).epsilon(1e-8));
  CHECK(load_json(td.path / "ab/abtest.json") == rep);

  write_text(td.path / "bad.txt", "1.0\n# fine\noops\n2.0\n");
  CliRun bad = run_cli(td.path, "abtest a.txt bad.txt");
  CHECK(bad.code == 2);
  CHECK(bad.err.find("bad.txt:3:") != std::string::npos);
  CHECK(bad.err.find("expected a number") != std::string::npos);

  write_text(td.path / "one.txt", "1.0\n");
  CliRun tiny = run_cli(td.path, "abtest a.txt one.txt");
  CHECK(tiny.code == 1);
  CHECK(tiny.err.find("at least 2 samples") != std::string::npos);
}

TEST_CASE("cli: rerun reproduces generate, train, and evaluate runs") {
  Workspace& w = ws();
  CliRun g = run_cli(w.td.path, "rerun --manifest gen/manifest.json --out gen_rr");
  REQUIRE_MESSAGE(g.code == 0, g.err);
  CHECK(read_bytes(w.td.path / "gen_rr/train.jsonl") == read_bytes(w.gen / "train.jsonl"));
  CHECK(read_bytes(w.td.path / "gen_rr/test.jsonl") == read_bytes(w.gen / "test.jsonl"));

  CliRun t = run_cli(w.td.path, "rerun --manifest m_tt/manifest.json --out tt_rr");
  REQUIRE_MESSAGE(t.code == 0, t.err);
  CHECK(read_bytes(w.td.path / "tt_rr/model.ltr") == read_bytes(w.tt / "model.ltr"));

  CliRun ev = run_cli(w.td.path, "evaluate m_tt/model.ltr gen/test.jsonl --out ev_tt");
  REQUIRE_MESSAGE(ev.code == 0, ev.err);
  CliRun rr = run_cli(w.td.path, "rerun --manifest ev_tt/manifest.json --out ev_tt_rr");
  REQUIRE_MESSAGE(rr.code == 0, rr.err);
  CHECK(load_json(w.td.path / "ev_tt_rr/report.json") ==
        load_json(w.td.path / "ev_tt/report.json"));

  write_text(w.td.path / "bad_manifest.json", R"({"manifest_version": 2})");
  CliRun bad = run_cli(w.td.path, "rerun --manifest bad_manifest.json");
  CHECK(bad.code == 8);
  CHECK(bad.err.find("unsupported manifest_version") != std::string::npos);

  CliRun gone = run_cli(w.td.path, "rerun --manifest nosuch_manifest.json");
  CHECK(gone.code == 3);
  CHECK(gone.err.find("nosuch_manifest.json") != std::string::npos);
}

TEST_CASE("cli: missing inputs fail with the file named") {
  Workspace& w = ws();
  CliRun ev = run_cli(w.td.path, "evaluate nosuch.ltr gen/test.jsonl");
  CHECK(ev.code == 3);
  CHECK(ev.err.find("nosuch.ltr") != std::string::npos);

  CliRun tr = run_cli(w.td.path, "train nosuch.jsonl --kind gbdt");
  CHECK(tr.code == 3);
  CHECK(tr.err.find("nosuch.jsonl") != std::string::npos);
}

// ltrlab command-line workbench. Links the shared library through the C API
// only; everything here is argument plumbing, file IO, and run manifests.

#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ltrlab/ltrlab.h"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct CliError {
  int code;
  std::string message;
};

struct CStr {
  char* p = nullptr;
  ~CStr() { ltr_string_free(p); }
  std::string str() const { return p ? std::string(p) : std::string(); }
};

struct DatasetHandle {
  ltr_dataset* p = nullptr;
  ~DatasetHandle() { ltr_dataset_free(p); }
};

struct ModelHandle {
  ltr_model* p = nullptr;
  ModelHandle() = default;
  ModelHandle(ModelHandle&& o) noexcept : p(o.p) { o.p = nullptr; }
  ModelHandle& operator=(ModelHandle&& o) noexcept {
    if (this != &o) {
      ltr_model_free(p);
      p = o.p;
      o.p = nullptr;
    }
    return *this;
  }
  ModelHandle(const ModelHandle&) = delete;
  ModelHandle& operator=(const ModelHandle&) = delete;
  ~ModelHandle() { ltr_model_free(p); }
};

void check(ltr_status st, const std::string& what) {
  if (st == LTR_OK) return;
  throw CliError{static_cast<int>(st), what + ": " + ltr_last_error()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw CliError{LTR_IO_ERROR, "cannot open " + p.string()};
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw CliError{LTR_IO_ERROR, "read failed: " + p.string()};
  return text;
}

void write_atomic(const fs::path& p, const std::string& text) {
  fs::path tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CliError{LTR_IO_ERROR, "cannot write " + tmp.string()};
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    if (!out) throw CliError{LTR_IO_ERROR, "write failed: " + tmp.string()};
  }
  std::error_code ec;
  fs::rename(tmp, p, ec);
  if (ec) throw CliError{LTR_IO_ERROR, "rename failed for " + p.string() + ": " + ec.message()};
}

json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw CliError{LTR_PARSE_ERROR, what + ": " + e.what()};
  }
}

json parse_json_file(const fs::path& p, const std::string& what) {
  return parse_json_text(slurp(p), what + " " + p.string());
}

uint64_t file_fnv64(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw CliError{LTR_IO_ERROR, "cannot open " + p.string() + " for checksum"};
  uint64_t h = 14695981039346656037ULL;
  char buf[65536];
  for (;;) {
    in.read(buf, sizeof buf);
    std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
    if (got < static_cast<std::streamsize>(sizeof buf)) break;
  }
  return h;
}

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

fs::path default_schema_path(const fs::path& data) {
  std::string s = data.string();
  const std::string ext = ".jsonl";
  if (s.size() > ext.size() && s.compare(s.size() - ext.size(), ext.size(), ext) == 0)
    return fs::path(s.substr(0, s.size() - ext.size()) + ".schema.json");
  return fs::path(s + ".schema.json");
}

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// Run record: resolved config, input/output checksums, and the metric numbers
// a rerun must reproduce. Timings live apart from metrics on purpose.
class RunManifest {
 public:
  RunManifest(const std::string& command, uint64_t seed, json config) {
    j_["manifest_version"] = 1;
    j_["tool"] = ltr_version();
    j_["command"] = command;
    j_["seed"] = seed;
    j_["config"] = std::move(config);
    j_["inputs"] = json::object();
    j_["outputs"] = json::object();
    j_["metrics"] = json::object();
  }

  void input(const std::string& role, const fs::path& p) { j_["inputs"][role] = file_entry(p); }

  void input_list(const std::string& role, const std::vector<std::string>& paths) {
    json arr = json::array();
    for (const auto& p : paths) arr.push_back(file_entry(p));
    j_["inputs"][role] = std::move(arr);
  }

  void output(const std::string& role, const fs::path& p) { j_["outputs"][role] = file_entry(p); }

  void metrics(json m) { j_["metrics"] = std::move(m); }

  void write(const fs::path& out_dir, double seconds) {
    j_["timings"] = json{{"seconds", seconds}};
    write_atomic(out_dir / "manifest.json", j_.dump(2) + "\n");
  }

 private:
  static json file_entry(const fs::path& p) {
    return json{{"path", p.string()}, {"fnv64", hex64(file_fnv64(p))}};
  }

  json j_;
};

fs::path prepare_out(const std::string& out) {
  fs::path dir = out.empty() ? fs::path("ltrlab_out") : fs::path(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CliError{LTR_IO_ERROR, "cannot create " + dir.string() + ": " + ec.message()};
  return dir;
}

DatasetHandle load_dataset(const fs::path& data, const fs::path& schema) {
  DatasetHandle d;
  check(ltr_dataset_load(data.string().c_str(), schema.string().c_str(), &d.p),
        "load " + data.string());
  return d;
}

ModelHandle load_model(const fs::path& path) {
  ModelHandle m;
  check(ltr_model_load(path.string().c_str(), &m.p), "load " + path.string());
  return m;
}

std::string render(const std::string& report_json, const std::string& format) {
  if (format == "json") return parse_json_text(report_json, "report").dump(2) + "\n";
  CStr text;
  check(ltr_report_render(report_json.c_str(), format.c_str(), &text.p), "render report");
  return text.str();
}

void print_warnings(const json& log) {
  if (!log.contains("warnings")) return;
  for (const auto& w : log["warnings"]) std::fprintf(stderr, "warning: %s\n", w.get<std::string>().c_str());
}

void print_train_log(const json& log) {
  for (const auto& entry : log.value("log", json::array())) {
    std::string line;
    for (const auto& [k, v] : entry.items()) {
      if (!line.empty()) line += "  ";
      if (v.is_number_integer())
        line += k + "=" + std::to_string(v.get<int64_t>());
      else {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%s=%.6g", k.c_str(), v.get<double>());
        line += buf;
      }
    }
    std::printf("%s\n", line.c_str());
  }
}

// ---- command bodies, shared by direct invocation and rerun ----

int run_generate(json cfg, uint64_t seed, const std::string& out) {
  Timer timer;
  double fraction = 0.9;
  if (auto it = cfg.find("train_fraction"); it != cfg.end()) {
    fraction = it->get<double>();
    cfg.erase(it);
  }

  DatasetHandle full;
  check(ltr_dataset_generate(cfg.dump().c_str(), seed, &full.p), "generate");
  DatasetHandle train, test;
  check(ltr_dataset_split(full.p, fraction, &train.p, &test.p), "split");

  fs::path dir = prepare_out(out);
  fs::path train_data = dir / "train.jsonl";
  fs::path train_schema = dir / "train.schema.json";
  fs::path test_data = dir / "test.jsonl";
  fs::path test_schema = dir / "test.schema.json";
  check(ltr_dataset_save(train.p, train_data.string().c_str(), train_schema.string().c_str()),
        "save train split");
  check(ltr_dataset_save(test.p, test_data.string().c_str(), test_schema.string().c_str()),
        "save test split");

  size_t n_full = 0, n_train = 0, n_test = 0;
  check(ltr_dataset_size(full.p, &n_full), "dataset size");
  check(ltr_dataset_size(train.p, &n_train), "dataset size");
  check(ltr_dataset_size(test.p, &n_test), "dataset size");

  json snapshot = cfg;
  snapshot["train_fraction"] = fraction;
  RunManifest man("generate", seed, snapshot);
  man.output("train_data", train_data);
  man.output("train_schema", train_schema);
  man.output("test_data", test_data);
  man.output("test_schema", test_schema);
  man.metrics(json{{"lists", n_full}, {"train_lists", n_train}, {"test_lists", n_test}});
  man.write(dir, timer.seconds());

  std::printf("generated %zu lists (train %zu, test %zu) under %s\n", n_full, n_train, n_test,
              dir.string().c_str());
  return 0;
}

int run_train(const json& cfg, uint64_t seed, const fs::path& data, const fs::path& schema,
              const std::string& out) {
  Timer timer;
  DatasetHandle d = load_dataset(data, schema);

  ModelHandle m;
  CStr log_text;
  check(ltr_train(d.p, cfg.dump().c_str(), &log_text.p, &m.p), "train");
  json log = parse_json_text(log_text.str(), "training log");
  print_warnings(log);
  print_train_log(log);

  fs::path dir = prepare_out(out);
  fs::path model_path = dir / "model.ltr";
  fs::path log_path = dir / "train_log.json";
  check(ltr_model_save(m.p, model_path.string().c_str()), "save model");
  write_atomic(log_path, log.dump(2) + "\n");

  json metrics = json::object();
  for (const char* key : {"final_loss", "final_train_ndcg"})
    if (log.contains(key)) metrics[key] = log[key];

  RunManifest man("train", seed, cfg);
  man.input("data", data);
  man.input("schema", schema);
  man.output("model", model_path);
  man.output("train_log", log_path);
  man.metrics(std::move(metrics));
  man.write(dir, timer.seconds());

  std::printf("trained %s model \"%s\" -> %s\n", ltr_model_kind(m.p), ltr_model_name(m.p),
              model_path.string().c_str());
  return 0;
}

int run_evaluate(const fs::path& model_path, const fs::path& data, const fs::path& schema,
                 int cutoff, const std::string& format, const std::string& out) {
  Timer timer;
  ModelHandle m = load_model(model_path);
  DatasetHandle d = load_dataset(data, schema);

  CStr rep;
  check(ltr_evaluate(m.p, d.p, cutoff, &rep.p), "evaluate");
  std::string rep_text = rep.str();

  fs::path dir = prepare_out(out);
  json parsed = parse_json_text(rep_text, "evaluate report");
  write_atomic(dir / "report.json", parsed.dump(2) + "\n");
  write_atomic(dir / "report.kv", render(rep_text, "kv"));
  write_atomic(dir / "report.txt", render(rep_text, "table"));

  RunManifest man("evaluate", 0, json{{"cutoff", cutoff}});
  man.input("model", model_path);
  man.input("data", data);
  man.input("schema", schema);
  man.output("report_json", dir / "report.json");
  man.output("report_kv", dir / "report.kv");
  man.output("report_table", dir / "report.txt");
  man.metrics(parsed);
  man.write(dir, timer.seconds());

  std::fputs(render(rep_text, format).c_str(), stdout);
  return 0;
}

int run_compare(const std::vector<std::string>& model_paths, const fs::path& data,
                const fs::path& schema, const std::string& baseline, int cutoff,
                const std::string& format, const std::string& out, size_t baseline_index,
                bool index_given) {
  Timer timer;
  if (model_paths.size() < 2)
    throw CliError{LTR_INVALID_ARGUMENT, "compare needs at least two --models"};

  std::vector<ModelHandle> models;
  models.reserve(model_paths.size());
  for (const auto& p : model_paths) models.push_back(load_model(p));

  size_t bidx = 0;
  if (index_given) {
    if (baseline_index >= models.size())
      throw CliError{LTR_INVALID_ARGUMENT, "baseline index out of range"};
    bidx = baseline_index;
  } else if (!baseline.empty()) {
    size_t hits = 0;
    for (size_t i = 0; i < models.size(); ++i) {
      if (baseline == ltr_model_name(models[i].p)) {
        bidx = i;
        ++hits;
      }
    }
    if (hits == 0)
      throw CliError{LTR_NOT_FOUND, "baseline \"" + baseline + "\" is not among the loaded models"};
    if (hits > 1)
      throw CliError{LTR_INVALID_ARGUMENT,
                     "baseline \"" + baseline + "\" names " + std::to_string(hits) +
                         " models; give each artifact a distinct --name at training time"};
  }

  DatasetHandle d = load_dataset(data, schema);
  std::vector<const ltr_model*> ptrs;
  ptrs.reserve(models.size());
  for (const auto& m : models) ptrs.push_back(m.p);

  CStr rep;
  check(ltr_compare(ptrs.data(), ptrs.size(), bidx, d.p, cutoff, &rep.p), "compare");
  std::string rep_text = rep.str();

  fs::path dir = prepare_out(out);
  json parsed = parse_json_text(rep_text, "compare report");
  write_atomic(dir / "compare.json", parsed.dump(2) + "\n");
  write_atomic(dir / "compare.kv", render(rep_text, "kv"));
  write_atomic(dir / "compare.txt", render(rep_text, "table"));
  write_atomic(dir / "compare.csv", render(rep_text, "csv"));

  RunManifest man("compare", 0,
                  json{{"cutoff", cutoff}, {"baseline", baseline}, {"baseline_index", bidx}});
  man.input_list("models", model_paths);
  man.input("data", data);
  man.input("schema", schema);
  man.output("report_json", dir / "compare.json");
  man.output("report_kv", dir / "compare.kv");
  man.output("report_table", dir / "compare.txt");
  man.output("report_csv", dir / "compare.csv");
  man.metrics(parsed);
  man.write(dir, timer.seconds());

  std::fputs(render(rep_text, format).c_str(), stdout);
  return 0;
}

std::vector<double> read_samples(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw CliError{LTR_IO_ERROR, "cannot open " + p.string()};
  std::vector<double> v;
  std::string line;
  size_t ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    size_t a = line.find_first_not_of(" \t\r");
    if (a == std::string::npos) continue;
    size_t b = line.find_last_not_of(" \t\r");
    std::string tok = line.substr(a, b - a + 1);
    if (tok[0] == '#') continue;
    char* end = nullptr;
    double x = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size() || !std::isfinite(x))
      throw CliError{LTR_PARSE_ERROR,
                     p.string() + ":" + std::to_string(ln) + ": expected a number, got \"" + tok + "\""};
    v.push_back(x);
  }
  if (in.bad()) throw CliError{LTR_IO_ERROR, "read failed: " + p.string()};
  return v;
}

int run_abtest(const fs::path& file_a, const fs::path& file_b, const std::string& format,
               const std::string& out) {
  Timer timer;
  std::vector<double> a = read_samples(file_a);
  std::vector<double> b = read_samples(file_b);

  CStr rep;
  check(ltr_welch(a.data(), a.size(), b.data(), b.size(), &rep.p), "abtest");
  std::string rep_text = rep.str();

  fs::path dir = prepare_out(out);
  json parsed = parse_json_text(rep_text, "abtest report");
  write_atomic(dir / "abtest.json", parsed.dump(2) + "\n");
  write_atomic(dir / "abtest.kv", render(rep_text, "kv"));

  RunManifest man("abtest", 0, json::object());
  man.input("samples_a", file_a);
  man.input("samples_b", file_b);
  man.output("report_json", dir / "abtest.json");
  man.output("report_kv", dir / "abtest.kv");
  man.metrics(parsed);
  man.write(dir, timer.seconds());

  std::fputs(render(rep_text, format).c_str(), stdout);
  return 0;
}

int run_gradcheck(const std::string& out) {
  Timer timer;
  CStr rep;
  check(ltr_gradcheck(&rep.p), "gradcheck");
  json parsed = parse_json_text(rep.str(), "gradcheck report");

  std::string text;
  for (const auto& c : parsed["checks"]) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-22s %-4s max_rel_err=%.3e\n",
                  c["name"].get<std::string>().c_str(), c["pass"].get<bool>() ? "ok" : "FAIL",
                  c["max_rel_err"].get<double>());
    text += buf;
  }
  bool pass = parsed["pass"].get<bool>();
  text += std::string("gradcheck: ") + (pass ? "pass" : "FAIL") + "\n";
  std::fputs(text.c_str(), stdout);

  fs::path dir = prepare_out(out);
  write_atomic(dir / "gradcheck.json", parsed.dump(2) + "\n");
  write_atomic(dir / "gradcheck.txt", text);

  RunManifest man("gradcheck", 0, json::object());
  man.output("report_json", dir / "gradcheck.json");
  man.output("report_text", dir / "gradcheck.txt");
  man.metrics(parsed);
  man.write(dir, timer.seconds());
  return pass ? 0 : 1;
}

fs::path manifest_input(const json& man, const char* role) {
  const json& inputs = man.at("inputs");
  if (!inputs.contains(role))
    throw CliError{LTR_PARSE_ERROR, std::string("manifest lacks input \"") + role + "\""};
  return fs::path(inputs.at(role).at("path").get<std::string>());
}

int run_rerun(const fs::path& manifest_path, const std::string& out) {
  json man = parse_json_file(manifest_path, "manifest");
  if (man.value("manifest_version", 0) != 1)
    throw CliError{LTR_FORMAT_ERROR, manifest_path.string() + ": unsupported manifest_version"};
  std::string cmd = man.at("command").get<std::string>();
  uint64_t seed = man.value("seed", uint64_t{0});
  json cfg = man.value("config", json::object());

  if (cmd == "generate") return run_generate(cfg, seed, out);
  if (cmd == "train")
    return run_train(cfg, seed, manifest_input(man, "data"), manifest_input(man, "schema"), out);
  if (cmd == "evaluate")
    return run_evaluate(manifest_input(man, "model"), manifest_input(man, "data"),
                        manifest_input(man, "schema"), cfg.at("cutoff").get<int>(), "table", out);
  if (cmd == "compare") {
    std::vector<std::string> paths;
    for (const auto& e : man.at("inputs").at("models")) paths.push_back(e.at("path").get<std::string>());
    return run_compare(paths, manifest_input(man, "data"), manifest_input(man, "schema"),
                       cfg.value("baseline", ""), cfg.at("cutoff").get<int>(), "table", out,
                       cfg.value("baseline_index", size_t{0}), true);
  }
  if (cmd == "abtest")
    return run_abtest(manifest_input(man, "samples_a"), manifest_input(man, "samples_b"), "kv", out);
  if (cmd == "gradcheck") return run_gradcheck(out);
  throw CliError{LTR_FORMAT_ERROR, manifest_path.string() + ": unknown command \"" + cmd + "\""};
}

const char* kFormats[] = {"table", "kv", "csv", "json"};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ltrlab: learning-to-rank workbench (synthetic data, neural and "
               "boosted rankers, offline evaluation)"};
  app.set_version_flag("--version", std::string(ltr_version()));
  app.require_subcommand(1);

  std::string out;
  auto add_out = [&out](CLI::App* cmd) {
    cmd->add_option("--out", out, "output directory (default ltrlab_out)")->envname("LTRLAB_OUT");
  };

  // generate
  std::string gen_config, gen_preset;
  uint64_t gen_seed = 1;
  double gen_fraction = 0.0;
  auto* gen = app.add_subcommand("generate", "generate a seeded synthetic dataset and split it by time");
  gen->add_option("--config", gen_config, "generator config JSON file")->envname("LTRLAB_CONFIG");
  gen->add_option("--preset", gen_preset, "paper-ratio (62k lists, 61k/1k split) or smoke (2k lists)")
      ->envname("LTRLAB_PRESET");
  gen->add_option("--seed", gen_seed, "generation seed (default 1)")->envname("LTRLAB_SEED");
  auto* gen_frac_opt =
      gen->add_option("--train-fraction", gen_fraction, "fraction of lists in the train split");
  add_out(gen);

  // train
  std::string tr_data, tr_schema, tr_config, tr_kind, tr_loss, tr_preset, tr_name;
  uint64_t tr_seed = 1;
  auto* tr = app.add_subcommand("train", "train a ranking model");
  tr->add_option("data", tr_data, "training dataset (.jsonl)")->required();
  tr->add_option("--schema", tr_schema, "schema file (default: <data>.schema.json)")
      ->envname("LTRLAB_SCHEMA");
  tr->add_option("--config", tr_config, "training config JSON file")->envname("LTRLAB_CONFIG");
  tr->add_option("--kind", tr_kind,
                 "two_tower | cross_encoder | transformer | gbdt | random | oracle")
      ->envname("LTRLAB_KIND");
  tr->add_option("--loss", tr_loss, "softmax_ce | ranknet (neural kinds)")->envname("LTRLAB_LOSS");
  tr->add_option("--preset", tr_preset, "desk | paper")->envname("LTRLAB_PRESET");
  tr->add_option("--name", tr_name, "artifact name used in reports and baseline matching")
      ->envname("LTRLAB_NAME");
  auto* tr_seed_opt = tr->add_option("--seed", tr_seed, "training seed")->envname("LTRLAB_SEED");
  add_out(tr);

  // evaluate
  std::string ev_model, ev_data, ev_schema, ev_format = "table";
  int ev_cutoff = 15;
  auto* ev = app.add_subcommand("evaluate", "score a dataset with a model and report metrics");
  ev->add_option("model", ev_model, "model artifact (.ltr)")->required();
  ev->add_option("data", ev_data, "evaluation dataset (.jsonl)")->required();
  ev->add_option("--schema", ev_schema, "schema file (default: <data>.schema.json)")
      ->envname("LTRLAB_SCHEMA");
  ev->add_option("--cutoff", ev_cutoff, "ranking cutoff k (default 15)")->envname("LTRLAB_CUTOFF");
  ev->add_option("--format", ev_format, "stdout format: table | kv | csv | json")
      ->check(CLI::IsMember(std::vector<std::string>(std::begin(kFormats), std::end(kFormats))))
      ->envname("LTRLAB_FORMAT");
  add_out(ev);

  // compare
  std::vector<std::string> cmp_models;
  std::string cmp_data, cmp_schema, cmp_baseline, cmp_format = "table";
  int cmp_cutoff = 15;
  auto* cmp = app.add_subcommand("compare", "compare model artifacts against a baseline");
  cmp->add_option("--models", cmp_models, "model artifacts (two or more)")
      ->required()
      ->expected(-2);
  cmp->add_option("--data", cmp_data, "evaluation dataset (.jsonl)")->required();
  cmp->add_option("--schema", cmp_schema, "schema file (default: <data>.schema.json)")
      ->envname("LTRLAB_SCHEMA");
  cmp->add_option("--baseline", cmp_baseline, "baseline artifact name (default: first model)")
      ->envname("LTRLAB_BASELINE");
  cmp->add_option("--cutoff", cmp_cutoff, "ranking cutoff k (default 15)")->envname("LTRLAB_CUTOFF");
  cmp->add_option("--format", cmp_format, "stdout format: table | kv | csv | json")
      ->check(CLI::IsMember(std::vector<std::string>(std::begin(kFormats), std::end(kFormats))))
      ->envname("LTRLAB_FORMAT");
  add_out(cmp);

  // abtest
  std::string ab_a, ab_b, ab_format = "kv";
  auto* ab = app.add_subcommand("abtest", "Welch two-sample t-test on metric sample files");
  ab->add_option("samples_a", ab_a, "baseline samples, one number per line")->required();
  ab->add_option("samples_b", ab_b, "treatment samples, one number per line")->required();
  ab->add_option("--format", ab_format, "stdout format: table | kv | csv | json")
      ->check(CLI::IsMember(std::vector<std::string>(std::begin(kFormats), std::end(kFormats))))
      ->envname("LTRLAB_FORMAT");
  add_out(ab);

  // gradcheck
  auto* gc = app.add_subcommand(
      "gradcheck", "finite-difference gradient checks for layers, losses, and models");
  add_out(gc);

  // rerun
  std::string rr_manifest;
  auto* rr = app.add_subcommand("rerun", "re-execute a command from its run manifest");
  rr->add_option("--manifest", rr_manifest, "manifest.json from a previous run")->required();
  add_out(rr);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      json cfg = json::object();
      if (!gen_preset.empty()) {
        if (gen_preset == "paper-ratio") {
          cfg["lists"] = 62000;
          cfg["train_fraction"] = 61.0 / 62.0;
        } else if (gen_preset == "smoke") {
          cfg["lists"] = 2000;
        } else {
          throw CliError{LTR_INVALID_ARGUMENT,
                         "unknown generate preset \"" + gen_preset + "\" (paper-ratio or smoke)"};
        }
      }
      if (!gen_config.empty()) {
        json user = parse_json_file(gen_config, "generator config");
        if (!user.is_object())
          throw CliError{LTR_PARSE_ERROR, gen_config + ": expected a JSON object"};
        for (const auto& [k, v] : user.items()) cfg[k] = v;
      }
      if (gen_frac_opt->count() > 0) cfg["train_fraction"] = gen_fraction;
      return run_generate(std::move(cfg), gen_seed, out);
    }
    if (tr->parsed()) {
      json cfg = json::object();
      if (!tr_config.empty()) {
        cfg = parse_json_file(tr_config, "training config");
        if (!cfg.is_object())
          throw CliError{LTR_PARSE_ERROR, tr_config + ": expected a JSON object"};
      }
      if (!tr_kind.empty()) cfg["kind"] = tr_kind;
      if (!tr_preset.empty()) cfg["preset"] = tr_preset;
      if (!tr_loss.empty()) cfg["loss"] = tr_loss;
      if (!tr_name.empty()) cfg["name"] = tr_name;
      std::string kind = cfg.value("kind", "two_tower");
      if (tr_seed_opt->count() > 0) {
        if (kind == "gbdt" || kind == "oracle")
          std::fprintf(stderr, "note: --seed has no effect for kind %s\n", kind.c_str());
        else
          cfg["seed"] = tr_seed;
      }
      uint64_t seed = cfg.value("seed", uint64_t{0});
      fs::path schema = tr_schema.empty() ? default_schema_path(tr_data) : fs::path(tr_schema);
      return run_train(cfg, seed, tr_data, schema, out);
    }
    if (ev->parsed()) {
      fs::path schema = ev_schema.empty() ? default_schema_path(ev_data) : fs::path(ev_schema);
      return run_evaluate(ev_model, ev_data, schema, ev_cutoff, ev_format, out);
    }
    if (cmp->parsed()) {
      fs::path schema = cmp_schema.empty() ? default_schema_path(cmp_data) : fs::path(cmp_schema);
      return run_compare(cmp_models, cmp_data, schema, cmp_baseline, cmp_cutoff, cmp_format, out,
                         0, false);
    }
    if (ab->parsed()) return run_abtest(ab_a, ab_b, ab_format, out);
    if (gc->parsed()) return run_gradcheck(out);
    if (rr->parsed()) return run_rerun(rr_manifest, out);
  } catch (const CliError& e) {
    std::fprintf(stderr, "error: %s\n", e.message.c_str());
    return e.code == 0 ? 1 : e.code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return LTR_INTERNAL;
  }
  return 0;
}

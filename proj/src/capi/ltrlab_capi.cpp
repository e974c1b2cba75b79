#include "ltrlab/ltrlab.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "core/gradcheck.hpp"
#include "core/report.hpp"
#include "core/train.hpp"

struct ltr_dataset {
  ltr::Dataset d;
};

struct ltr_model {
  ltr::ModelArtifact m;
  std::string kind_name;
};

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <typename Fn>
ltr_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return LTR_OK;
  } catch (const ltr::Error& e) {
    g_last_error = e.what();
    return static_cast<ltr_status>(static_cast<int>(e.status()));
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return LTR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return LTR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown internal error";
    return LTR_INTERNAL;
  }
}

void require_arg(bool ok, const char* what) {
  if (!ok) ltr::throw_invalid(std::string("null ") + what);
}

ltr::json parse_config(const char* config_json, const char* what) {
  require_arg(config_json != nullptr, what);
  try {
    return ltr::json::parse(config_json);
  } catch (const ltr::json::exception& e) {
    ltr::throw_parse(std::string(what) + ": " + e.what());
  }
}

}  // namespace

extern "C" {

const char* ltr_version(void) { return "ltrlab 1.0.0"; }

const char* ltr_last_error(void) { return g_last_error.c_str(); }

void ltr_string_free(char* s) { std::free(s); }

ltr_status ltr_dataset_generate(const char* config_json, uint64_t seed, ltr_dataset** out) {
  return guarded([&] {
    require_arg(out != nullptr, "output handle");
    ltr::json jc = parse_config(config_json, "generator config");
    ltr::GeneratorConfig cfg = ltr::GeneratorConfig::from_json(jc, "generator config");
    auto* ds = new ltr_dataset{ltr::generate_synthetic_dataset(cfg, seed)};
    *out = ds;
  });
}

ltr_status ltr_dataset_load(const char* jsonl_path, const char* schema_path,
                            ltr_dataset** out) {
  return guarded([&] {
    require_arg(jsonl_path != nullptr, "dataset path");
    require_arg(schema_path != nullptr, "schema path");
    require_arg(out != nullptr, "output handle");
    auto* ds = new ltr_dataset{ltr::load_dataset(jsonl_path, schema_path)};
    *out = ds;
  });
}

ltr_status ltr_dataset_save(const ltr_dataset* d, const char* jsonl_path,
                            const char* schema_path) {
  return guarded([&] {
    require_arg(d != nullptr, "dataset");
    require_arg(jsonl_path != nullptr, "dataset path");
    require_arg(schema_path != nullptr, "schema path");
    ltr::save_dataset(d->d, jsonl_path, schema_path);
  });
}

ltr_status ltr_dataset_split(const ltr_dataset* d, double train_fraction,
                             ltr_dataset** train, ltr_dataset** test) {
  return guarded([&] {
    require_arg(d != nullptr, "dataset");
    require_arg(train != nullptr, "train handle");
    require_arg(test != nullptr, "test handle");
    auto parts = ltr::temporal_split(d->d, train_fraction);
    *train = new ltr_dataset{std::move(parts.first)};
    *test = new ltr_dataset{std::move(parts.second)};
  });
}

ltr_status ltr_dataset_size(const ltr_dataset* d, size_t* out_lists) {
  return guarded([&] {
    require_arg(d != nullptr, "dataset");
    require_arg(out_lists != nullptr, "output count");
    *out_lists = d->d.lists.size();
  });
}

void ltr_dataset_free(ltr_dataset* d) { delete d; }

ltr_status ltr_train(const ltr_dataset* train, const char* config_json, char** log_json_out,
                     ltr_model** out) {
  return guarded([&] {
    require_arg(train != nullptr, "training dataset");
    require_arg(out != nullptr, "output handle");
    ltr::json jc = parse_config(config_json, "train config");
    if (!jc.is_object()) ltr::throw_parse("train config: expected a JSON object");
    std::string kind = jc.value("kind", "two_tower");
    std::string name;
    if (auto it = jc.find("name"); it != jc.end()) {
      name = it->get<std::string>();
      jc.erase(it);
    }

    ltr::ojson log = ltr::ojson::array();
    ltr::ojson extra;
    ltr::ModelArtifact artifact;
    std::vector<std::string> warnings;

    if (kind == "gbdt") {
      ltr::json body = jc;
      body.erase("kind");
      ltr::GbdtConfig cfg = ltr::GbdtConfig::from_json(body, "train config");
      ltr::TrainResult r = ltr::train_gbdt_model(train->d, cfg);
      artifact = std::move(r.artifact);
      log = std::move(r.log);
      extra["final_train_ndcg"] = r.final_train_ndcg;
    } else if (kind == "random") {
      ltr::check_keys(jc, {"kind", "seed"}, "train config");
      uint64_t seed = 0;
      if (auto it = jc.find("seed"); it != jc.end()) seed = it->get<uint64_t>();
      artifact = ltr::make_random_model(seed, train->d.schema);
    } else if (kind == "oracle") {
      ltr::check_keys(jc, {"kind"}, "train config");
      artifact = ltr::make_oracle_model(train->d);
    } else {
      ltr::TrainConfig cfg = ltr::TrainConfig::from_json(jc, "train config");
      ltr::TrainResult r = ltr::train_neural(train->d, cfg, &warnings);
      artifact = std::move(r.artifact);
      log = std::move(r.log);
      extra["final_loss"] = r.final_loss;
    }

    if (log_json_out) {
      ltr::ojson lj;
      lj["log"] = std::move(log);
      for (auto& [k, v] : extra.items()) lj[k] = v;
      lj["warnings"] = warnings;
      *log_json_out = dup_string(lj.dump());
    }
    if (!name.empty()) artifact.name = name;
    auto* m = new ltr_model{std::move(artifact), ""};
    m->kind_name = ltr::model_kind_name(m->m.kind);
    *out = m;
  });
}

ltr_status ltr_model_save(const ltr_model* m, const char* path) {
  return guarded([&] {
    require_arg(m != nullptr, "model");
    require_arg(path != nullptr, "path");
    ltr::save_model(m->m, path);
  });
}

ltr_status ltr_model_load(const char* path, ltr_model** out) {
  return guarded([&] {
    require_arg(path != nullptr, "path");
    require_arg(out != nullptr, "output handle");
    auto* m = new ltr_model{ltr::load_model(path), ""};
    m->kind_name = ltr::model_kind_name(m->m.kind);
    *out = m;
  });
}

const char* ltr_model_kind(const ltr_model* m) {
  return m ? m->kind_name.c_str() : "";
}

const char* ltr_model_name(const ltr_model* m) {
  return m ? m->m.name.c_str() : "";
}

void ltr_model_free(ltr_model* m) { delete m; }

ltr_status ltr_score_list(const ltr_model* m, const ltr_dataset* d, size_t list_index,
                          double* out_scores, size_t capacity, size_t* out_count) {
  return guarded([&] {
    require_arg(m != nullptr, "model");
    require_arg(d != nullptr, "dataset");
    require_arg(out_count != nullptr, "output count");
    if (list_index >= d->d.lists.size())
      ltr::throw_invalid("list index out of range");
    size_t n = d->d.lists[list_index].products.size();
    *out_count = n;
    if (!out_scores) return;
    if (capacity < n) ltr::throw_invalid("score buffer too small");
    std::vector<double> s = ltr::score_list(m->m, d->d, list_index);
    std::memcpy(out_scores, s.data(), n * sizeof(double));
  });
}

ltr_status ltr_evaluate(const ltr_model* m, const ltr_dataset* test, int cutoff,
                        char** report_json_out) {
  return guarded([&] {
    require_arg(m != nullptr, "model");
    require_arg(test != nullptr, "dataset");
    require_arg(report_json_out != nullptr, "report output");
    ltr::EvalConfig ec;
    ec.cutoff = cutoff;
    ec.validate();
    ltr::MetricReport r = ltr::evaluate_model(m->m, test->d, ec);
    *report_json_out = dup_string(ltr::evaluate_to_json(r, cutoff).dump());
  });
}

ltr_status ltr_compare(const ltr_model* const* models, size_t count, size_t baseline,
                       const ltr_dataset* test, int cutoff, char** report_json_out) {
  return guarded([&] {
    require_arg(models != nullptr, "model array");
    require_arg(test != nullptr, "dataset");
    require_arg(report_json_out != nullptr, "report output");
    std::vector<const ltr::ModelArtifact*> arts;
    arts.reserve(count);
    for (size_t i = 0; i < count; ++i) {
      require_arg(models[i] != nullptr, "model array entry");
      arts.push_back(&models[i]->m);
    }
    ltr::CompareReport r = ltr::build_compare_report(arts, baseline, test->d, cutoff);
    *report_json_out = dup_string(ltr::compare_to_json(r).dump());
  });
}

ltr_status ltr_report_render(const char* report_json, const char* format, char** text_out) {
  return guarded([&] {
    require_arg(format != nullptr, "format");
    require_arg(text_out != nullptr, "text output");
    ltr::json j = parse_config(report_json, "report JSON");
    *text_out = dup_string(ltr::render_report(j, format));
  });
}

ltr_status ltr_welch(const double* a, size_t n_a, const double* b, size_t n_b,
                     char** result_json_out) {
  return guarded([&] {
    require_arg(a != nullptr, "sample a");
    require_arg(b != nullptr, "sample b");
    require_arg(result_json_out != nullptr, "result output");
    ltr::TTestResult t = ltr::welch_t_test(std::span<const double>(a, n_a),
                                           std::span<const double>(b, n_b));
    *result_json_out = dup_string(ltr::abtest_to_json(t, n_a, n_b).dump());
  });
}

ltr_status ltr_gradcheck(char** report_json_out) {
  return guarded([&] {
    require_arg(report_json_out != nullptr, "report output");
    auto results = ltr::run_gradcheck_suite();
    ltr::ojson j;
    ltr::ojson checks = ltr::ojson::array();
    for (const auto& r : results) {
      ltr::ojson c;
      c["name"] = r.name;
      c["max_rel_err"] = r.max_rel_err;
      c["pass"] = r.pass;
      checks.push_back(std::move(c));
    }
    j["checks"] = std::move(checks);
    j["pass"] = ltr::gradcheck_all_pass(results);
    *report_json_out = dup_string(j.dump());
  });
}

}  // extern "C"

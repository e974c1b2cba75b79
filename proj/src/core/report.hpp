#pragma once

#include <span>
#include <string>
#include <vector>

#include "core/metrics.hpp"
#include "core/model.hpp"

namespace ltr {

struct MetricComparison {
  double mean = 0.0;
  double baseline_mean = 0.0;
  std::string uplift;  // formatted signed percent
  TTestResult test;
};

struct CompareRow {
  std::string name;
  std::string kind;
  std::string loss;  // empty for models without a loss hyperparameter
  MetricComparison ndcg_c, ndcg_o, aiv;
};

struct CompareReport {
  int cutoff = 15;
  std::string baseline;
  size_t lists = 0;
  std::vector<CompareRow> rows;
};

// Per-list metric samples of every model against the baseline's, through the
// same Welch test the A/B analysis uses.
CompareReport build_compare_report(std::span<const ModelArtifact* const> models,
                                   size_t baseline_index, const Dataset& test, int cutoff);

ojson compare_to_json(const CompareReport& r);
CompareReport compare_from_json(const json& j, const std::string& path);

ojson evaluate_to_json(const MetricReport& r, int cutoff);
ojson abtest_to_json(const TTestResult& t, size_t n_a, size_t n_b);

// format: "kv", "table", or "csv"; dispatches on the report's "command".
std::string render_report(const json& report, const std::string& format);

}  // namespace ltr

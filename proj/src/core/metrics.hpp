#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core/losses.hpp"

namespace ltr {

struct Dataset;
struct ModelArtifact;

struct EvalConfig {
  int cutoff = 15;
  void validate() const;
};

// Indices that rank the list: descending score, ties by original position.
std::vector<size_t> ranking_order(std::span<const double> s);

// Binary-gain NDCG with discount 1/log2(rank+1). Lists without positives have
// no defined ratio and return nullopt, which callers exclude from means.
std::optional<double> ndcg_at_k(std::span<const double> s, const LabelVector& y, int k);

// Mean price of the top-min(k, n) ranked items.
double aiv_at_k(std::span<const double> prices, std::span<const double> s, int k);

// "+4.32%" / "-1.48%"; a value that rounds to zero renders unsigned "0.00%".
std::string relative_improvement(double candidate, double baseline);

struct TTestResult {
  double mean_a = 0.0;
  double mean_b = 0.0;
  double diff = 0.0;        // mean_a - mean_b
  double rel_uplift = 0.0;  // percent vs mean_b; 0 when mean_b is 0
  double t = 0.0;
  double dof = 0.0;
  double p = 1.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

// Unequal-variance t-test with Welch-Satterthwaite dof and an exact
// incomplete-beta p-value; the 95% CI uses the t quantile at the same dof.
TTestResult welch_t_test(std::span<const double> a, std::span<const double> b);

// Regularized incomplete beta I_x(a, b), accurate to ~1e-12.
double incomplete_beta(double a, double b, double x);
// Two-sided p-value for |t| with the given degrees of freedom.
double student_t_two_sided_p(double t, double dof);
// Quantile q with P(|T| <= q) = level, via bisection on the p-value.
double student_t_quantile(double dof, double level);

struct MetricReport {
  std::string model;
  double ndcg_c = 0.0;
  double ndcg_o = 0.0;
  double aiv = 0.0;
  size_t lists = 0;
  size_t ndcg_c_lists = 0;  // lists with click positives
  size_t ndcg_o_lists = 0;  // lists with order positives
};

// Per-list metric samples, aligned with dataset list order. Entries without
// positives in a channel are NaN and excluded from aggregates.
struct PerListMetrics {
  std::vector<double> ndcg_c;
  std::vector<double> ndcg_o;
  std::vector<double> aiv;
};

PerListMetrics per_list_metrics(const ModelArtifact& model, const Dataset& data,
                                const EvalConfig& cfg);
MetricReport evaluate_model(const ModelArtifact& model, const Dataset& data,
                            const EvalConfig& cfg);

}  // namespace ltr

#include "core/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "core/data.hpp"
#include "core/model.hpp"

namespace ltr {

void EvalConfig::validate() const {
  if (cutoff < 1) throw_invalid("eval cutoff must be >= 1, got " + std::to_string(cutoff));
}

std::vector<size_t> ranking_order(std::span<const double> s) {
  std::vector<size_t> idx(s.size());
  std::iota(idx.begin(), idx.end(), size_t{0});
  std::sort(idx.begin(), idx.end(), [&s](size_t a, size_t b) {
    if (s[a] != s[b]) return s[a] > s[b];
    return a < b;
  });
  return idx;
}

std::optional<double> ndcg_at_k(std::span<const double> s, const LabelVector& y, int k) {
  if (s.size() != y.size()) throw_invalid("ndcg: score/label length mismatch");
  if (k < 1) throw_invalid("ndcg: cutoff must be >= 1");
  if (y.positives == 0) return std::nullopt;
  std::vector<size_t> order = ranking_order(s);
  size_t depth = std::min<size_t>(static_cast<size_t>(k), s.size());
  double dcg = 0.0;
  for (size_t r = 0; r < depth; ++r)
    if (y.y[order[r]]) dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  size_t ideal = std::min<size_t>(static_cast<size_t>(k), static_cast<size_t>(y.positives));
  double idcg = 0.0;
  for (size_t r = 0; r < ideal; ++r) idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  return dcg / idcg;
}

double aiv_at_k(std::span<const double> prices, std::span<const double> s, int k) {
  if (prices.size() != s.size()) throw_invalid("aiv: price/score length mismatch");
  if (k < 1) throw_invalid("aiv: cutoff must be >= 1");
  if (s.empty()) throw_invalid("aiv: empty list");
  std::vector<size_t> order = ranking_order(s);
  size_t depth = std::min<size_t>(static_cast<size_t>(k), s.size());
  double sum = 0.0;
  for (size_t r = 0; r < depth; ++r) sum += prices[order[r]];
  return sum / static_cast<double>(depth);
}

std::string relative_improvement(double candidate, double baseline) {
  if (!(baseline > 0.0))
    throw_invalid("relative improvement needs a positive baseline, got " +
                  std::to_string(baseline));
  double pct = 100.0 * (candidate - baseline) / baseline;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", pct);
  std::string s(buf);
  if (s == "0.00" || s == "-0.00") return "0.00%";
  if (s[0] != '-') return "+" + s + "%";
  return s + "%";
}

namespace {

double betacf(double a, double b, double x) {
  const double eps = 1e-14, fpmin = 1e-300;
  double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 500; ++m) {
    double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw_invalid("incomplete_beta: a, b must be positive");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                 b * std::log1p(-x);
  double bt = std::exp(ln_bt);
  if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
  return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double dof) {
  if (!(dof > 0.0)) throw_invalid("t-distribution needs dof > 0");
  if (std::isinf(t)) return 0.0;
  return incomplete_beta(dof / 2.0, 0.5, dof / (dof + t * t));
}

double student_t_quantile(double dof, double level) {
  if (!(level > 0.0 && level < 1.0)) throw_invalid("quantile level must be in (0, 1)");
  double alpha = 1.0 - level;
  double lo = 0.0, hi = 1.0;
  while (student_t_two_sided_p(hi, dof) > alpha) {
    hi *= 2.0;
    if (hi > 1e12) break;
  }
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (student_t_two_sided_p(mid, dof) > alpha)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-12 * std::max(1.0, hi)) break;
  }
  return 0.5 * (lo + hi);
}

TTestResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  size_t m = a.size(), n = b.size();
  if (m < 2 || n < 2) throw_invalid("welch_t_test needs at least 2 samples per side");
  TTestResult r;
  for (double v : a) r.mean_a += v;
  r.mean_a /= static_cast<double>(m);
  for (double v : b) r.mean_b += v;
  r.mean_b /= static_cast<double>(n);
  double va = 0.0, vb = 0.0;
  for (double v : a) va += (v - r.mean_a) * (v - r.mean_a);
  va /= static_cast<double>(m - 1);
  for (double v : b) vb += (v - r.mean_b) * (v - r.mean_b);
  vb /= static_cast<double>(n - 1);
  r.diff = r.mean_a - r.mean_b;
  r.rel_uplift = r.mean_b != 0.0 ? 100.0 * r.diff / r.mean_b : 0.0;
  if (va == 0.0 && vb == 0.0) {
    r.dof = static_cast<double>(m + n - 2);
    if (r.diff == 0.0) {
      r.t = 0.0;
      r.p = 1.0;
    } else {
      r.t = std::copysign(std::numeric_limits<double>::infinity(), r.diff);
      r.p = 0.0;
    }
    r.ci_low = r.ci_high = r.diff;
    return r;
  }
  double se2 = va / static_cast<double>(m) + vb / static_cast<double>(n);
  double se = std::sqrt(se2);
  r.t = r.diff / se;
  double da = va / static_cast<double>(m), db = vb / static_cast<double>(n);
  r.dof = se2 * se2 /
          (da * da / static_cast<double>(m - 1) + db * db / static_cast<double>(n - 1));
  r.p = student_t_two_sided_p(r.t, r.dof);
  double tq = student_t_quantile(r.dof, 0.95);
  r.ci_low = r.diff - tq * se;
  r.ci_high = r.diff + tq * se;
  return r;
}

PerListMetrics per_list_metrics(const ModelArtifact& model, const Dataset& data,
                                const EvalConfig& cfg) {
  cfg.validate();
  if (data.lists.empty()) throw_invalid("evaluation needs a non-empty dataset");
  check_schema_compatible(model, data);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  PerListMetrics out;
  out.ndcg_c.reserve(data.lists.size());
  out.ndcg_o.reserve(data.lists.size());
  out.aiv.reserve(data.lists.size());
  for (size_t i = 0; i < data.lists.size(); ++i) {
    const InteractionList& list = data.lists[i];
    std::vector<double> s = score_list(model, data, i);
    auto nc = ndcg_at_k(s, list.y_c, cfg.cutoff);
    auto no = ndcg_at_k(s, list.y_o, cfg.cutoff);
    out.ndcg_c.push_back(nc ? *nc : nan);
    out.ndcg_o.push_back(no ? *no : nan);
    std::vector<double> prices(list.products.size());
    for (size_t j = 0; j < prices.size(); ++j) prices[j] = list.products[j].price;
    out.aiv.push_back(aiv_at_k(prices, s, cfg.cutoff));
  }
  return out;
}

MetricReport evaluate_model(const ModelArtifact& model, const Dataset& data,
                            const EvalConfig& cfg) {
  PerListMetrics per = per_list_metrics(model, data, cfg);
  MetricReport rep;
  rep.model = model.name;
  rep.lists = data.lists.size();
  for (double v : per.ndcg_c)
    if (!std::isnan(v)) {
      rep.ndcg_c += v;
      ++rep.ndcg_c_lists;
    }
  if (rep.ndcg_c_lists) rep.ndcg_c /= static_cast<double>(rep.ndcg_c_lists);
  for (double v : per.ndcg_o)
    if (!std::isnan(v)) {
      rep.ndcg_o += v;
      ++rep.ndcg_o_lists;
    }
  if (rep.ndcg_o_lists) rep.ndcg_o /= static_cast<double>(rep.ndcg_o_lists);
  for (double v : per.aiv) rep.aiv += v;
  rep.aiv /= static_cast<double>(rep.lists);
  return rep;
}

}  // namespace ltr

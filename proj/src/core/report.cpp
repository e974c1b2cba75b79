#include "core/report.hpp"

#include <cmath>
#include <cstdio>

namespace ltr {

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

std::string num6(double v) { return fmt("%.6g", v); }

MetricComparison compare_metric(const std::vector<double>& model_vals,
                                const std::vector<double>& base_vals) {
  std::vector<double> a, b;
  a.reserve(model_vals.size());
  b.reserve(base_vals.size());
  for (double v : model_vals)
    if (!std::isnan(v)) a.push_back(v);
  for (double v : base_vals)
    if (!std::isnan(v)) b.push_back(v);
  MetricComparison c;
  c.test = welch_t_test(a, b);
  c.mean = c.test.mean_a;
  c.baseline_mean = c.test.mean_b;
  c.uplift = relative_improvement(c.mean, c.baseline_mean);
  return c;
}

}  // namespace

CompareReport build_compare_report(std::span<const ModelArtifact* const> models,
                                   size_t baseline_index, const Dataset& test, int cutoff) {
  if (models.size() < 2) throw_invalid("compare needs at least two models");
  if (baseline_index >= models.size()) throw_invalid("compare: baseline index out of range");
  EvalConfig ec;
  ec.cutoff = cutoff;
  ec.validate();

  std::vector<PerListMetrics> per(models.size());
  for (size_t i = 0; i < models.size(); ++i) per[i] = per_list_metrics(*models[i], test, ec);
  const PerListMetrics& base = per[baseline_index];

  CompareReport rep;
  rep.cutoff = cutoff;
  rep.baseline = models[baseline_index]->name;
  rep.lists = test.lists.size();
  for (size_t i = 0; i < models.size(); ++i) {
    CompareRow row;
    row.name = models[i]->name;
    row.kind = model_kind_name(models[i]->kind);
    if (models[i]->hyper.is_object() && models[i]->hyper.contains("loss"))
      row.loss = models[i]->hyper["loss"].get<std::string>();
    row.ndcg_c = compare_metric(per[i].ndcg_c, base.ndcg_c);
    row.ndcg_o = compare_metric(per[i].ndcg_o, base.ndcg_o);
    row.aiv = compare_metric(per[i].aiv, base.aiv);
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

namespace {

ojson metric_to_json(const MetricComparison& c) {
  ojson j;
  j["mean"] = c.mean;
  j["baseline_mean"] = c.baseline_mean;
  j["uplift"] = c.uplift;
  j["diff"] = c.test.diff;
  j["rel_uplift"] = c.test.rel_uplift;
  j["t"] = c.test.t;
  j["dof"] = c.test.dof;
  j["p"] = c.test.p;
  j["ci_low"] = c.test.ci_low;
  j["ci_high"] = c.test.ci_high;
  return j;
}

MetricComparison metric_from_json(const json& j, const std::string& path) {
  check_keys(j,
             {"mean", "baseline_mean", "uplift", "diff", "rel_uplift", "t", "dof", "p",
              "ci_low", "ci_high"},
             path);
  MetricComparison c;
  c.mean = get_num(j, "mean", path);
  c.baseline_mean = get_num(j, "baseline_mean", path);
  c.uplift = get_str(j, "uplift", path);
  c.test.mean_a = c.mean;
  c.test.mean_b = c.baseline_mean;
  c.test.diff = get_num(j, "diff", path);
  c.test.rel_uplift = get_num(j, "rel_uplift", path);
  c.test.t = get_num(j, "t", path);
  c.test.dof = get_num(j, "dof", path);
  c.test.p = get_num(j, "p", path);
  c.test.ci_low = get_num(j, "ci_low", path);
  c.test.ci_high = get_num(j, "ci_high", path);
  return c;
}

}  // namespace

ojson compare_to_json(const CompareReport& r) {
  ojson j;
  j["command"] = "compare";
  j["cutoff"] = r.cutoff;
  j["baseline"] = r.baseline;
  j["lists"] = r.lists;
  ojson models = ojson::array();
  for (const auto& row : r.rows) {
    ojson m;
    m["name"] = row.name;
    m["kind"] = row.kind;
    m["loss"] = row.loss;
    ojson metrics;
    metrics["ndcg_c"] = metric_to_json(row.ndcg_c);
    metrics["ndcg_o"] = metric_to_json(row.ndcg_o);
    metrics["aiv"] = metric_to_json(row.aiv);
    m["metrics"] = std::move(metrics);
    models.push_back(std::move(m));
  }
  j["models"] = std::move(models);
  return j;
}

CompareReport compare_from_json(const json& j, const std::string& path) {
  check_keys(j, {"command", "cutoff", "baseline", "lists", "models"}, path);
  if (get_str(j, "command", path) != "compare")
    throw_parse(path + ": not a compare report");
  CompareReport r;
  r.cutoff = static_cast<int>(get_int(j, "cutoff", path));
  r.baseline = get_str(j, "baseline", path);
  r.lists = static_cast<size_t>(get_int_or(j, "lists", 0, path));
  const json& models = get_arr(j, "models", path);
  for (size_t i = 0; i < models.size(); ++i) {
    std::string mp = path + ".models[" + std::to_string(i) + "]";
    check_keys(models[i], {"name", "kind", "loss", "metrics"}, mp);
    CompareRow row;
    row.name = get_str(models[i], "name", mp);
    row.kind = get_str(models[i], "kind", mp);
    row.loss = get_str_or(models[i], "loss", "", mp);
    const json& metrics = require(models[i], "metrics", mp);
    check_keys(metrics, {"ndcg_c", "ndcg_o", "aiv"}, mp + ".metrics");
    row.ndcg_c = metric_from_json(require(metrics, "ndcg_c", mp), mp + ".metrics.ndcg_c");
    row.ndcg_o = metric_from_json(require(metrics, "ndcg_o", mp), mp + ".metrics.ndcg_o");
    row.aiv = metric_from_json(require(metrics, "aiv", mp), mp + ".metrics.aiv");
    r.rows.push_back(std::move(row));
  }
  return r;
}

ojson evaluate_to_json(const MetricReport& r, int cutoff) {
  ojson j;
  j["command"] = "evaluate";
  j["cutoff"] = cutoff;
  j["model"] = r.model;
  ojson m;
  m["ndcg_c"] = r.ndcg_c;
  m["ndcg_o"] = r.ndcg_o;
  m["aiv"] = r.aiv;
  m["lists"] = r.lists;
  m["ndcg_c_lists"] = r.ndcg_c_lists;
  m["ndcg_o_lists"] = r.ndcg_o_lists;
  j["metrics"] = std::move(m);
  return j;
}

ojson abtest_to_json(const TTestResult& t, size_t n_a, size_t n_b) {
  ojson j;
  j["command"] = "abtest";
  j["n_a"] = n_a;
  j["n_b"] = n_b;
  j["mean_a"] = t.mean_a;
  j["mean_b"] = t.mean_b;
  j["diff"] = t.diff;
  j["rel_uplift"] = t.rel_uplift;
  j["t"] = t.t;
  j["dof"] = t.dof;
  j["p"] = t.p;
  j["ci_low"] = t.ci_low;
  j["ci_high"] = t.ci_high;
  return j;
}

namespace {

std::string pad(const std::string& s, size_t width) {
  std::string out = s;
  if (out.size() < width) out.append(width - out.size(), ' ');
  return out;
}

const CompareRow* find_row(const CompareReport& r, const std::string& kind,
                           const std::string& loss) {
  for (const auto& row : r.rows)
    if (row.kind == kind && row.loss == loss) return &row;
  return nullptr;
}

bool has_full_grid(const CompareReport& r) {
  for (const char* loss : {"softmax_ce", "ranknet"})
    for (const char* kind : {"two_tower", "cross_encoder", "transformer"})
      if (!find_row(r, kind, loss)) return false;
  return true;
}

const MetricComparison& metric_of(const CompareRow& row, int which) {
  return which == 0 ? row.ndcg_c : which == 1 ? row.ndcg_o : row.aiv;
}

std::string metric_label(int which, int cutoff) {
  const char* base = which == 0 ? "NDCG_c@" : which == 1 ? "NDCG_o@" : "AIV@";
  return base + std::to_string(cutoff);
}

std::string render_compare_kv(const CompareReport& r) {
  std::string out;
  out += "command = compare\n";
  out += "baseline = " + r.baseline + "\n";
  out += "cutoff = " + std::to_string(r.cutoff) + "\n";
  out += "lists = " + std::to_string(r.lists) + "\n";
  for (const auto& row : r.rows) {
    for (int w = 0; w < 3; ++w) {
      const MetricComparison& m = metric_of(row, w);
      std::string key = row.name + "." + (w == 0 ? "ndcg_c" : w == 1 ? "ndcg_o" : "aiv");
      out += key + ".mean = " + num6(m.mean) + "\n";
      out += key + ".uplift = " + m.uplift + "\n";
      out += key + ".t = " + num6(m.test.t) + "\n";
      out += key + ".dof = " + num6(m.test.dof) + "\n";
      out += key + ".p = " + num6(m.test.p) + "\n";
      out += key + ".ci_low = " + num6(m.test.ci_low) + "\n";
      out += key + ".ci_high = " + num6(m.test.ci_high) + "\n";
    }
  }
  return out;
}

std::string render_compare_table(const CompareReport& r) {
  std::string out;
  out += "relative improvement vs baseline \"" + r.baseline + "\" (cutoff " +
         std::to_string(r.cutoff) + ", " + std::to_string(r.lists) + " lists)\n\n";
  const size_t label_w = 12, cell_w = 15;
  if (has_full_grid(r)) {
    const char* kinds[3] = {"two_tower", "cross_encoder", "transformer"};
    const char* losses[2] = {"softmax_ce", "ranknet"};
    const char* loss_titles[2] = {"CE loss", "RN loss"};

    out += std::string(label_w, ' ');
    for (int li = 0; li < 2; ++li) out += pad(loss_titles[li], cell_w * 3);
    out += "\n";
    out += std::string(label_w, ' ');
    for (int li = 0; li < 2; ++li)
      for (int ki = 0; ki < 3; ++ki) out += pad(kinds[ki], cell_w);
    out += "\n";
    out += std::string(label_w + cell_w * 6, '-') + "\n";
    for (int w = 0; w < 3; ++w) {
      out += pad(metric_label(w, r.cutoff), label_w);
      for (int li = 0; li < 2; ++li)
        for (int ki = 0; ki < 3; ++ki)
          out += pad(metric_of(*find_row(r, kinds[ki], losses[li]), w).uplift, cell_w);
      out += "\n";
    }
    out += "\n";
    for (const auto& row : r.rows) {
      bool in_grid = false;
      for (const char* loss : losses)
        for (const char* kind : kinds)
          if (row.kind == kind && row.loss == loss) in_grid = true;
      if (in_grid) continue;
      out += row.name + ": ndcg_c=" + fmt("%.4f", row.ndcg_c.mean) +
             " ndcg_o=" + fmt("%.4f", row.ndcg_o.mean) + " aiv=" + fmt("%.2f", row.aiv.mean);
      if (row.name != r.baseline)
        out += "  (uplift " + row.ndcg_c.uplift + " / " + row.ndcg_o.uplift + " / " +
               row.aiv.uplift + ")";
      out += "\n";
    }
    return out;
  }

  out += pad("model", 18) + pad("ndcg_c", cell_w) + pad("ndcg_o", cell_w) +
         pad("aiv", cell_w) + "\n";
  out += std::string(18 + cell_w * 3, '-') + "\n";
  for (const auto& row : r.rows)
    out += pad(row.name, 18) + pad(row.ndcg_c.uplift, cell_w) +
           pad(row.ndcg_o.uplift, cell_w) + pad(row.aiv.uplift, cell_w) + "\n";
  return out;
}

std::string render_compare_csv(const CompareReport& r) {
  std::string out = "model,metric,mean,baseline_mean,uplift_pct,ci_low_pct,ci_high_pct,p\n";
  for (const auto& row : r.rows) {
    for (int w = 0; w < 3; ++w) {
      const MetricComparison& m = metric_of(row, w);
      double bm = m.baseline_mean;
      double lo = bm != 0.0 ? 100.0 * m.test.ci_low / bm : std::nan("");
      double hi = bm != 0.0 ? 100.0 * m.test.ci_high / bm : std::nan("");
      out += row.name + "," + (w == 0 ? "ndcg_c" : w == 1 ? "ndcg_o" : "aiv") + "," +
             num6(m.mean) + "," + num6(bm) + "," + num6(m.test.rel_uplift) + "," + num6(lo) +
             "," + num6(hi) + "," + num6(m.test.p) + "\n";
    }
  }
  return out;
}

std::string render_evaluate(const json& j, const std::string& format) {
  const json& m = j.at("metrics");
  std::string model = j.at("model").get<std::string>();
  int cutoff = j.at("cutoff").get<int>();
  double ndcg_c = m.at("ndcg_c").get<double>();
  double ndcg_o = m.at("ndcg_o").get<double>();
  double aiv = m.at("aiv").get<double>();
  auto lists = m.at("lists").get<uint64_t>();
  if (format == "kv") {
    std::string out;
    out += "command = evaluate\n";
    out += "model = " + model + "\n";
    out += "cutoff = " + std::to_string(cutoff) + "\n";
    out += "lists = " + std::to_string(lists) + "\n";
    out += "ndcg_c = " + num6(ndcg_c) + "\n";
    out += "ndcg_o = " + num6(ndcg_o) + "\n";
    out += "aiv = " + num6(aiv) + "\n";
    return out;
  }
  if (format == "csv") {
    std::string out = "metric,value\n";
    out += "ndcg_c," + num6(ndcg_c) + "\n";
    out += "ndcg_o," + num6(ndcg_o) + "\n";
    out += "aiv," + num6(aiv) + "\n";
    return out;
  }
  std::string out = "model \"" + model + "\" on " + std::to_string(lists) + " lists\n";
  out += pad("NDCG_c@" + std::to_string(cutoff), 12) + fmt("%.4f", ndcg_c) + "\n";
  out += pad("NDCG_o@" + std::to_string(cutoff), 12) + fmt("%.4f", ndcg_o) + "\n";
  out += pad("AIV@" + std::to_string(cutoff), 12) + fmt("%.2f", aiv) + "\n";
  return out;
}

std::string render_abtest(const json& j, const std::string& format) {
  static const char* keys[] = {"mean_a", "mean_b", "diff",   "rel_uplift", "t",
                               "dof",    "p",      "ci_low", "ci_high"};
  if (format == "csv") {
    std::string head = "n_a,n_b", row = std::to_string(j.at("n_a").get<uint64_t>()) + "," +
                                        std::to_string(j.at("n_b").get<uint64_t>());
    for (const char* k : keys) {
      head += std::string(",") + k;
      row += "," + num6(j.at(k).get<double>());
    }
    return head + "\n" + row + "\n";
  }
  std::string out;
  if (format == "kv") out += "command = abtest\n";
  out += "n_a = " + std::to_string(j.at("n_a").get<uint64_t>()) + "\n";
  out += "n_b = " + std::to_string(j.at("n_b").get<uint64_t>()) + "\n";
  for (const char* k : keys) out += std::string(k) + " = " + num6(j.at(k).get<double>()) + "\n";
  return out;
}

}  // namespace

std::string render_report(const json& report, const std::string& format) {
  if (format != "kv" && format != "table" && format != "csv")
    throw_invalid("unknown report format \"" + format + "\" (expected kv, table, or csv)");
  if (!report.is_object() || !report.contains("command"))
    throw_invalid("report JSON lacks a command field");
  std::string cmd = report.at("command").get<std::string>();
  try {
    if (cmd == "compare") {
      CompareReport r = compare_from_json(report, "report");
      if (format == "kv") return render_compare_kv(r);
      if (format == "csv") return render_compare_csv(r);
      return render_compare_table(r);
    }
    if (cmd == "evaluate") return render_evaluate(report, format);
    if (cmd == "abtest") return render_abtest(report, format);
  } catch (const json::exception& e) {
    throw_parse(std::string("malformed report JSON: ") + e.what());
  }
  throw_invalid("unknown report command \"" + cmd + "\"");
}

}  // namespace ltr

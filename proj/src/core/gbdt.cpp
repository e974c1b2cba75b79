#include "core/gbdt.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <numeric>
#include <queue>

#include "core/data.hpp"
#include "core/metrics.hpp"

namespace ltr {

namespace {

double discount(size_t rank_1based, int cutoff) {
  if (static_cast<int>(rank_1based) > cutoff) return 0.0;
  return 1.0 / std::log2(static_cast<double>(rank_1based) + 1.0);
}

}  // namespace

LambdaGrad compute_lambda_gradients(std::span<const double> scores,
                                    std::span<const int> labels, int cutoff) {
  if (scores.size() != labels.size())
    throw_invalid("lambda gradients: scores and labels must have equal length");
  if (cutoff < 1) throw_invalid("lambda gradients: cutoff must be >= 1");
  size_t n = scores.size();
  LambdaGrad g;
  g.lambda.assign(n, 0.0);
  g.hessian.assign(n, 0.0);
  if (n == 0) return g;

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return scores[a] > scores[b];
  });
  std::vector<double> disc(n);
  for (size_t pos = 0; pos < n; ++pos) disc[order[pos]] = discount(pos + 1, cutoff);

  std::vector<int> ideal(labels.begin(), labels.end());
  std::sort(ideal.begin(), ideal.end(), std::greater<int>());
  double idcg = 0.0;
  for (size_t pos = 0; pos < n; ++pos)
    idcg += static_cast<double>(ideal[pos]) * discount(pos + 1, cutoff);
  if (idcg <= 0.0) return g;  // all labels zero: no pairs

  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) {
      if (labels[i] <= labels[j]) continue;
      double rho = 1.0 / (1.0 + std::exp(scores[i] - scores[j]));
      double delta = std::fabs(static_cast<double>(labels[i] - labels[j]) *
                               (disc[i] - disc[j])) /
                     idcg;
      g.lambda[i] += rho * delta;
      g.lambda[j] -= rho * delta;
      double h = rho * (1.0 - rho) * delta;
      g.hessian[i] += h;
      g.hessian[j] += h;
    }
  }
  return g;
}

std::vector<std::vector<uint32_t>> presort_features(const FeatureMatrix& m) {
  std::vector<std::vector<uint32_t>> ord(m.cols);
  for (size_t f = 0; f < m.cols; ++f) {
    auto& idx = ord[f];
    idx.resize(m.rows);
    std::iota(idx.begin(), idx.end(), 0u);
    const double* col = m.col(f);
    std::stable_sort(idx.begin(), idx.end(),
                     [col](uint32_t a, uint32_t b) { return col[a] < col[b]; });
  }
  return ord;
}

void TreeConfig::validate() const {
  if (max_depth < 1) throw_invalid("tree: max_depth must be >= 1");
  if (num_leaves < 1) throw_invalid("tree: num_leaves must be >= 1");
  if (min_samples_leaf < 1) throw_invalid("tree: min_samples_leaf must be >= 1");
}

double RegressionTree::predict_row(std::span<const double> x) const {
  int id = 0;
  while (nodes[id].feature >= 0)
    id = x[static_cast<size_t>(nodes[id].feature)] > nodes[id].threshold ? nodes[id].right
                                                                         : nodes[id].left;
  return nodes[id].value;
}

double RegressionTree::predict_row(const FeatureMatrix& m, size_t row) const {
  int id = 0;
  while (nodes[id].feature >= 0)
    id = m.at(row, static_cast<size_t>(nodes[id].feature)) > nodes[id].threshold
             ? nodes[id].right
             : nodes[id].left;
  return nodes[id].value;
}

namespace {

struct SplitCand {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
  size_t left_count = 0;
  bool valid = false;
};

struct BuildNode {
  std::vector<std::vector<uint32_t>> ord;  // per feature, (value, index) ascending
  int depth = 0;
  int tree_node = -1;
  int seq = 0;
  SplitCand split;
};

// Aggregates run in ord[0] order so a reference implementation summing the
// same way reproduces gains and leaf values bit for bit.
double node_lambda_sum(const BuildNode& node, std::span<const double> lambdas) {
  double s = 0.0;
  for (uint32_t r : node.ord[0]) s += lambdas[r];
  return s;
}

double leaf_value(const BuildNode& node, std::span<const double> lambdas,
                  std::span<const double> hessians) {
  double sl = 0.0, sh = 0.0;
  for (uint32_t r : node.ord[0]) {
    sl += lambdas[r];
    sh += hessians[r];
  }
  return sl / (sh + 1.0);
}

SplitCand find_best_split(const FeatureMatrix& m, const BuildNode& node,
                          std::span<const double> lambdas, const TreeConfig& cfg) {
  SplitCand best;
  size_t n = node.ord[0].size();
  if (n < 2 * static_cast<size_t>(cfg.min_samples_leaf)) return best;

  bool constant = true;
  double first = lambdas[node.ord[0][0]];
  for (uint32_t r : node.ord[0])
    if (lambdas[r] != first) {
      constant = false;
      break;
    }
  if (constant) return best;

  double sum_p = node_lambda_sum(node, lambdas);
  double parent_term = sum_p * sum_p / static_cast<double>(n);

  for (size_t f = 0; f < m.cols; ++f) {
    const double* col = m.col(f);
    const auto& idx = node.ord[f];
    double sum_l = 0.0;
    for (size_t i = 0; i + 1 < n; ++i) {
      sum_l += lambdas[idx[i]];
      double va = col[idx[i]];
      double vb = col[idx[i + 1]];
      if (va == vb) continue;
      size_t nl = i + 1;
      size_t nr = n - nl;
      if (nl < static_cast<size_t>(cfg.min_samples_leaf) ||
          nr < static_cast<size_t>(cfg.min_samples_leaf))
        continue;
      double sum_r = sum_p - sum_l;
      double gain = sum_l * sum_l / static_cast<double>(nl) +
                    sum_r * sum_r / static_cast<double>(nr) - parent_term;
      if (gain <= 0.0) continue;
      // Midpoint can round up to vb; fall back to va so `x > t` reproduces
      // exactly the prefix partition the gain was computed for.
      double t = 0.5 * (va + vb);
      if (!(t < vb)) t = va;
      bool better = !best.valid || gain > best.gain ||
                    (gain == best.gain &&
                     (static_cast<int>(f) < best.feature ||
                      (static_cast<int>(f) == best.feature && t < best.threshold)));
      if (better) {
        best.gain = gain;
        best.feature = static_cast<int>(f);
        best.threshold = t;
        best.left_count = nl;
        best.valid = true;
      }
    }
  }
  return best;
}

}  // namespace

RegressionTree fit_regression_tree(const FeatureMatrix& m,
                                   const std::vector<std::vector<uint32_t>>& presort,
                                   std::span<const double> lambdas,
                                   std::span<const double> hessians,
                                   const TreeConfig& cfg) {
  cfg.validate();
  if (m.rows == 0) throw_invalid("tree: cannot fit on zero rows");
  if (lambdas.size() != m.rows || hessians.size() != m.rows)
    throw_invalid("tree: gradient length must match row count");
  if (presort.size() != m.cols) throw_invalid("tree: presort feature count mismatch");

  RegressionTree tree;
  std::deque<BuildNode> pool;

  pool.push_back({});
  BuildNode& root = pool.back();
  root.ord = presort;
  root.depth = 0;
  root.seq = 0;
  tree.nodes.push_back({});
  root.tree_node = 0;
  tree.nodes[0].value = leaf_value(root, lambdas, hessians);
  root.split = find_best_split(m, root, lambdas, cfg);
  tree.leaves = 1;
  tree.depth = 0;

  auto worse = [&pool](size_t a, size_t b) {
    if (pool[a].split.gain != pool[b].split.gain)
      return pool[a].split.gain < pool[b].split.gain;
    return pool[a].seq > pool[b].seq;
  };
  std::priority_queue<size_t, std::vector<size_t>, decltype(worse)> heap(worse);
  if (root.split.valid && cfg.max_depth > 0) heap.push(0);

  int next_seq = 1;
  while (!heap.empty() && tree.leaves < cfg.num_leaves) {
    size_t ni = heap.top();
    heap.pop();
    BuildNode& node = pool[ni];
    const SplitCand& sp = node.split;

    int li = static_cast<int>(tree.nodes.size());
    int ri = li + 1;
    tree.nodes.push_back({});
    tree.nodes.push_back({});
    TreeNode& tn = tree.nodes[static_cast<size_t>(node.tree_node)];
    tn.feature = sp.feature;
    tn.threshold = sp.threshold;
    tn.left = li;
    tn.right = ri;

    pool.push_back({});
    pool.push_back({});
    BuildNode& left = pool[pool.size() - 2];
    BuildNode& right = pool[pool.size() - 1];
    left.depth = right.depth = node.depth + 1;
    left.seq = next_seq++;
    right.seq = next_seq++;
    left.tree_node = li;
    right.tree_node = ri;
    left.ord.resize(m.cols);
    right.ord.resize(m.cols);
    const double* scol = m.col(static_cast<size_t>(sp.feature));
    for (size_t f = 0; f < m.cols; ++f) {
      left.ord[f].reserve(sp.left_count);
      right.ord[f].reserve(node.ord[f].size() - sp.left_count);
      for (uint32_t r : node.ord[f]) {
        if (scol[r] > sp.threshold)
          right.ord[f].push_back(r);
        else
          left.ord[f].push_back(r);
      }
    }
    node.ord.clear();
    node.ord.shrink_to_fit();

    tree.nodes[static_cast<size_t>(li)].value = leaf_value(left, lambdas, hessians);
    tree.nodes[static_cast<size_t>(ri)].value = leaf_value(right, lambdas, hessians);
    tree.leaves += 1;
    tree.depth = std::max(tree.depth, left.depth);

    if (left.depth < cfg.max_depth) {
      left.split = find_best_split(m, left, lambdas, cfg);
      if (left.split.valid) heap.push(pool.size() - 2);
      right.split = find_best_split(m, right, lambdas, cfg);
      if (right.split.valid) heap.push(pool.size() - 1);
    }
  }
  return tree;
}

RegressionTree fit_regression_tree(const FeatureMatrix& m, std::span<const double> lambdas,
                                   std::span<const double> hessians, const TreeConfig& cfg) {
  return fit_regression_tree(m, presort_features(m), lambdas, hessians, cfg);
}

double GbdtEnsemble::predict_row(std::span<const double> x) const {
  if (x.size() != num_features)
    throw_invalid("gbdt predict: expected " + std::to_string(num_features) +
                  " features, got " + std::to_string(x.size()));
  double s = 0.0;
  for (const auto& t : trees) s += t.predict_row(x);
  return learning_rate * s;
}

std::vector<double> GbdtEnsemble::predict(const FeatureMatrix& m) const {
  if (m.cols != num_features)
    throw_invalid("gbdt predict: expected " + std::to_string(num_features) +
                  " features, got " + std::to_string(m.cols));
  std::vector<double> out(m.rows, 0.0);
  for (const auto& t : trees)
    for (size_t r = 0; r < m.rows; ++r) out[r] += t.predict_row(m, r);
  for (double& v : out) v *= learning_rate;
  return out;
}

ojson GbdtEnsemble::to_json() const {
  ojson j;
  j["learning_rate"] = learning_rate;
  j["num_features"] = num_features;
  ojson trees_j = ojson::array();
  for (const auto& t : trees) {
    ojson tj;
    ojson nodes = ojson::array();
    for (const auto& n : t.nodes)
      nodes.push_back({{"f", n.feature},
                       {"t", n.threshold},
                       {"l", n.left},
                       {"r", n.right},
                       {"v", n.value}});
    tj["nodes"] = std::move(nodes);
    tj["leaves"] = t.leaves;
    tj["depth"] = t.depth;
    trees_j.push_back(std::move(tj));
  }
  j["trees"] = std::move(trees_j);
  return j;
}

GbdtEnsemble GbdtEnsemble::from_json(const json& j, const std::string& path) {
  check_keys(j, {"learning_rate", "num_features", "trees"}, path);
  GbdtEnsemble e;
  e.learning_rate = get_num(j, "learning_rate", path);
  e.num_features = static_cast<size_t>(get_int(j, "num_features", path));
  const json& trees = get_arr(j, "trees", path);
  for (size_t i = 0; i < trees.size(); ++i) {
    std::string tp = path + ".trees[" + std::to_string(i) + "]";
    check_keys(trees[i], {"nodes", "leaves", "depth"}, tp);
    RegressionTree t;
    const json& nodes = get_arr(trees[i], "nodes", tp);
    for (size_t k = 0; k < nodes.size(); ++k) {
      std::string np = tp + ".nodes[" + std::to_string(k) + "]";
      check_keys(nodes[k], {"f", "t", "l", "r", "v"}, np);
      TreeNode n;
      n.feature = static_cast<int>(get_int(nodes[k], "f", np));
      n.threshold = get_num(nodes[k], "t", np);
      n.left = static_cast<int>(get_int(nodes[k], "l", np));
      n.right = static_cast<int>(get_int(nodes[k], "r", np));
      n.value = get_num(nodes[k], "v", np);
      if (n.feature >= 0 &&
          (n.left < 0 || n.right < 0 || static_cast<size_t>(n.left) >= nodes.size() ||
           static_cast<size_t>(n.right) >= nodes.size()))
        throw_parse(np + ": internal node with invalid children");
      t.nodes.push_back(n);
    }
    if (t.nodes.empty()) throw_parse(tp + ": tree has no nodes");
    t.leaves = static_cast<int>(get_int(trees[i], "leaves", tp));
    t.depth = static_cast<int>(get_int(trees[i], "depth", tp));
    e.trees.push_back(std::move(t));
  }
  return e;
}

std::string gbdt_label_mode_name(GbdtLabelMode m) {
  return m == GbdtLabelMode::kClicks ? "clicks" : "graded";
}

GbdtLabelMode gbdt_label_mode_from(const std::string& s) {
  if (s == "clicks") return GbdtLabelMode::kClicks;
  if (s == "graded") return GbdtLabelMode::kGraded;
  throw_invalid("unknown gbdt label mode \"" + s + "\" (expected clicks or graded)");
}

void GbdtConfig::validate() const {
  if (trees < 0) throw_invalid("gbdt: trees must be >= 0");
  if (!(learning_rate >= 0.0)) throw_invalid("gbdt: learning_rate must be >= 0");
  if (cutoff < 1) throw_invalid("gbdt: cutoff must be >= 1");
  tree.validate();
}

ojson GbdtConfig::to_json() const {
  ojson j;
  j["trees"] = trees;
  j["learning_rate"] = learning_rate;
  j["max_depth"] = tree.max_depth;
  j["num_leaves"] = tree.num_leaves;
  j["min_samples_leaf"] = tree.min_samples_leaf;
  j["cutoff"] = cutoff;
  j["labels"] = gbdt_label_mode_name(labels);
  return j;
}

GbdtConfig GbdtConfig::from_json(const json& j, const std::string& path) {
  check_keys(j,
             {"trees", "learning_rate", "max_depth", "num_leaves", "min_samples_leaf",
              "cutoff", "labels", "preset"},
             path);
  GbdtConfig c;
  if (auto it = j.find("preset"); it != j.end()) c = preset(it->get<std::string>());
  c.trees = static_cast<int>(get_int_or(j, "trees", c.trees, path));
  c.learning_rate = get_num_or(j, "learning_rate", c.learning_rate, path);
  c.tree.max_depth = static_cast<int>(get_int_or(j, "max_depth", c.tree.max_depth, path));
  c.tree.num_leaves = static_cast<int>(get_int_or(j, "num_leaves", c.tree.num_leaves, path));
  c.tree.min_samples_leaf =
      static_cast<int>(get_int_or(j, "min_samples_leaf", c.tree.min_samples_leaf, path));
  c.cutoff = static_cast<int>(get_int_or(j, "cutoff", c.cutoff, path));
  c.labels = gbdt_label_mode_from(get_str_or(j, "labels", gbdt_label_mode_name(c.labels), path));
  c.validate();
  return c;
}

GbdtConfig GbdtConfig::preset(const std::string& name) {
  GbdtConfig c;
  if (name == "desk") {
    // defaults
  } else if (name == "paper") {
    c.trees = 400;
    c.tree.max_depth = 12;
  } else {
    throw_invalid("unknown gbdt preset \"" + name + "\" (expected desk or paper)");
  }
  return c;
}

size_t gbdt_feature_count(const FeatureSchema& schema) {
  return schema.numeric.size() + schema.product_cat.size() + schema.product_text.size() +
         schema.context_cat.size() + schema.context_text.size();
}

void gbdt_fill_row(const FeatureSchema& schema, const ContextFeatures& c,
                   const ProductFeatures& p, double* out) {
  size_t k = 0;
  for (size_t j = 0; j < schema.numeric.size(); ++j) out[k++] = p.numeric[j];
  for (size_t j = 0; j < schema.product_cat.size(); ++j)
    out[k++] = static_cast<double>(p.categorical[j]);
  for (size_t j = 0; j < schema.product_text.size(); ++j)
    out[k++] = static_cast<double>(p.textual[j].size());
  for (size_t j = 0; j < schema.context_cat.size(); ++j)
    out[k++] = static_cast<double>(c.categorical[j]);
  for (size_t j = 0; j < schema.context_text.size(); ++j)
    out[k++] = static_cast<double>(c.textual[j].size());
}

PooledRows pool_dataset_rows(const Dataset& d, GbdtLabelMode mode) {
  PooledRows out;
  size_t total = 0;
  for (const auto& l : d.lists) total += l.products.size();
  size_t cols = gbdt_feature_count(d.schema);
  out.features = FeatureMatrix(total, cols);
  out.list_offsets.reserve(d.lists.size() + 1);
  out.labels.resize(total);

  std::vector<double> row(cols);
  size_t r = 0;
  out.list_offsets.push_back(0);
  for (const auto& l : d.lists) {
    for (size_t i = 0; i < l.products.size(); ++i, ++r) {
      gbdt_fill_row(d.schema, l.context, l.products[i], row.data());
      for (size_t f = 0; f < cols; ++f) out.features.at(r, f) = row[f];
      out.labels[r] = mode == GbdtLabelMode::kClicks
                          ? l.y_c.y[i]
                          : 2 * l.y_o.y[i] + l.y_c.y[i];
    }
    out.list_offsets.push_back(r);
  }
  return out;
}

GbdtTrainResult train_lambdamart(const Dataset& train, const GbdtConfig& cfg) {
  cfg.validate();
  if (train.lists.empty()) throw_invalid("gbdt train: empty training set");

  PooledRows pooled = pool_dataset_rows(train, cfg.labels);
  auto presort = presort_features(pooled.features);

  GbdtTrainResult res;
  res.ensemble.learning_rate = cfg.learning_rate;
  res.ensemble.num_features = pooled.features.cols;

  size_t total = pooled.features.rows;
  size_t lists = train.lists.size();
  std::vector<double> scores(total, 0.0);
  std::vector<double> lambdas(total), hessians(total);

  auto mean_train_ndcg = [&]() {
    double sum = 0.0;
    size_t counted = 0;
    for (size_t li = 0; li < lists; ++li) {
      size_t lo = pooled.list_offsets[li], hi = pooled.list_offsets[li + 1];
      auto nd = ndcg_at_k(std::span<const double>(scores.data() + lo, hi - lo),
                          train.lists[li].y_c, cfg.cutoff);
      if (nd) {
        sum += *nd;
        ++counted;
      }
    }
    return counted ? sum / static_cast<double>(counted) : 0.0;
  };

  for (int round = 0; round < cfg.trees; ++round) {
    auto start = std::chrono::steady_clock::now();
    for (size_t li = 0; li < lists; ++li) {
      size_t lo = pooled.list_offsets[li], hi = pooled.list_offsets[li + 1];
      LambdaGrad g = compute_lambda_gradients(
          std::span<const double>(scores.data() + lo, hi - lo),
          std::span<const int>(pooled.labels.data() + lo, hi - lo), cfg.cutoff);
      std::copy(g.lambda.begin(), g.lambda.end(), lambdas.begin() + static_cast<long>(lo));
      std::copy(g.hessian.begin(), g.hessian.end(), hessians.begin() + static_cast<long>(lo));
    }
    RegressionTree tree =
        fit_regression_tree(pooled.features, presort, lambdas, hessians, cfg.tree);
    for (size_t r = 0; r < total; ++r)
      scores[r] += cfg.learning_rate * tree.predict_row(pooled.features, r);
    res.ensemble.trees.push_back(std::move(tree));

    GbdtRoundLog log;
    log.round = round + 1;
    log.train_ndcg_c = mean_train_ndcg();
    log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    res.log.push_back(log);
  }
  return res;
}

}  // namespace ltr

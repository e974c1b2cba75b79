#include "core/gradcheck.hpp"

#include <cmath>
#include <cstdio>

#include "core/losses.hpp"
#include "core/rankers.hpp"

namespace ltr {

namespace {

Tensor rand_tensor(std::vector<size_t> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data) v = rng.uniform(-1.0, 1.0) * scale;
  return t;
}

// Fixed-weight reduction to a scalar so every output coordinate carries
// gradient, built from graph ops only.
ValueId to_scalar(Graph& g, ValueId a) {
  size_t n = g.rows(a), m = g.cols(a);
  std::vector<double> w(m);
  for (size_t j = 0; j < m; ++j) w[j] = 0.25 + 0.37 * static_cast<double>(j % 5);
  ValueId rd = g.row_dot(a, g.constant(std::move(w), 1, m));
  std::vector<double> ones(n);
  for (size_t i = 0; i < n; ++i) ones[i] = 0.5 + 0.21 * static_cast<double>(i % 3);
  return g.matmul(g.constant(std::move(ones), 1, n), rd);
}

using CheckFn = std::function<double(bool)>;

struct Fixture {
  FeatureSchema schema;
  EmbeddingTables tables;
  std::vector<ProductFeatures> products;
  ContextFeatures context;
  LabelVector y_c, y_o;
};

Fixture make_fixture(Rng& rng) {
  Fixture fix;
  FeatureSchema& s = fix.schema;
  s.numeric = {{NumericKind::kZScore, 0.4, 1.3, false}, {NumericKind::kPowerLaw, 0.9, 0.7, false}};
  s.product_cat = {{7, 3}};
  s.product_text = {{11, 4}};
  s.context_cat = {{5, 3}};
  s.context_text = {{9, 4}};
  s.fitted = true;
  fix.tables = EmbeddingTables::create(s, rng);
  // Spread table entries wider than the 0.01-scale init so gradients are not
  // drowned by the finite-difference noise floor.
  auto widen = [&rng](std::vector<EmbeddingTable>& group) {
    for (auto& t : group)
      for (double& v : t.rows.data) v = rng.uniform(-0.8, 0.8);
  };
  widen(fix.tables.product_cat);
  widen(fix.tables.product_text);
  widen(fix.tables.context_cat);
  widen(fix.tables.context_text);

  for (int i = 0; i < 5; ++i) {
    ProductFeatures p;
    p.numeric = {rng.uniform(-2.0, 2.0), std::fabs(rng.uniform(0.0, 4.0))};
    p.categorical = {i == 3 ? 99 : static_cast<int>(rng.uniform_int(0, 6))};
    std::vector<int> bag;
    if (i != 2)
      for (int wds = 0; wds < i % 3 + 1; ++wds)
        bag.push_back(static_cast<int>(rng.uniform_int(1, 10)));
    p.textual = {bag};
    p.price = rng.uniform(1.0, 50.0);
    fix.products.push_back(std::move(p));
  }
  fix.context.categorical = {2};
  fix.context.textual = {{1, 4, 4}};
  fix.y_c = LabelVector::from({1, 0, 1, 0, 0});
  fix.y_o = LabelVector::from({0, 0, 1, 0, 0});
  return fix;
}

GradCheckResult run_check(const std::string& name, std::vector<Tensor*> params,
                          const CheckFn& f, double tolerance) {
  GradCheckResult r;
  r.name = name;
  r.max_rel_err = grad_check(params, f);
  r.pass = r.max_rel_err < tolerance;
  return r;
}

}  // namespace

std::vector<GradCheckResult> run_gradcheck_suite(double tolerance) {
  std::vector<GradCheckResult> results;
  Rng rng(20250817);

  {
    Tensor x = rand_tensor({5, 7}, rng);
    Tensor w = rand_tensor({4, 7}, rng);
    Tensor b = rand_tensor({4}, rng);
    results.push_back(run_check("linear", {&x, &w, &b}, [&](bool wg) {
      Graph g;
      ValueId out = g.linear_rows(g.param(x), g.param(w), g.param(b));
      ValueId loss = to_scalar(g, out);
      if (wg) g.backward(loss);
      return g.scalar(loss);
    }, tolerance));
  }
  {
    // Inputs kept away from the kink at zero where the derivative jumps.
    Tensor x = rand_tensor({4, 6}, rng);
    for (double& v : x.data) v += v >= 0.0 ? 0.2 : -0.2;
    results.push_back(run_check("relu", {&x}, [&](bool wg) {
      Graph g;
      ValueId loss = to_scalar(g, g.relu(g.param(x)));
      if (wg) g.backward(loss);
      return g.scalar(loss);
    }, tolerance));
  }
  {
    Tensor x = rand_tensor({5, 8}, rng);
    Tensor gain = rand_tensor({8}, rng);
    Tensor shift = rand_tensor({8}, rng);
    for (double& v : gain.data) v += 1.5;
    results.push_back(run_check("layer_norm", {&x, &gain, &shift}, [&](bool wg) {
      Graph g;
      ValueId out = g.layer_norm_rows(g.param(x), g.param(gain), g.param(shift), 1e-5);
      ValueId loss = to_scalar(g, out);
      if (wg) g.backward(loss);
      return g.scalar(loss);
    }, tolerance));
  }
  {
    Tensor x = rand_tensor({5, 6}, rng);
    results.push_back(run_check("softmax", {&x}, [&](bool wg) {
      Graph g;
      ValueId loss = to_scalar(g, g.softmax_rows(g.param(x)));
      if (wg) g.backward(loss);
      return g.scalar(loss);
    }, tolerance));
  }
  {
    Tensor x = rand_tensor({4, 5}, rng);
    Rng mask_rng(7);
    std::vector<double> mask = dropout_mask(20, 0.3, mask_rng);
    results.push_back(run_check("dropout_mask", {&x}, [&, mask](bool wg) {
      Graph g;
      ValueId loss = to_scalar(g, g.mul_mask(g.param(x), mask));
      if (wg) g.backward(loss);
      return g.scalar(loss);
    }, tolerance));
  }
  {
    Tensor table = rand_tensor({10, 4}, rng);
    std::vector<std::vector<int>> bags = {{1, 3, 3}, {0}, {}, {9, 2}, {5}};
    results.push_back(run_check("embedding_bag", {&table}, [&](bool wg) {
      Graph g;
      ValueId loss = to_scalar(g, g.embed_rows(g.param(table), bags));
      if (wg) g.backward(loss);
      return g.scalar(loss);
    }, tolerance));
  }
  {
    Tensor a = rand_tensor({3, 4}, rng);
    Tensor b = rand_tensor({4, 5}, rng);
    results.push_back(run_check("matmul", {&a, &b}, [&](bool wg) {
      Graph g;
      ValueId loss = to_scalar(g, g.matmul(g.param(a), g.param(b)));
      if (wg) g.backward(loss);
      return g.scalar(loss);
    }, tolerance));
  }
  {
    Tensor a = rand_tensor({3, 4}, rng);
    Tensor b = rand_tensor({5, 4}, rng);
    results.push_back(run_check("matmul_nt", {&a, &b}, [&](bool wg) {
      Graph g;
      ValueId loss = to_scalar(g, g.matmul_nt(g.param(a), g.param(b)));
      if (wg) g.backward(loss);
      return g.scalar(loss);
    }, tolerance));
  }
  {
    Tensor a = rand_tensor({4, 3}, rng);
    Tensor b = rand_tensor({4, 3}, rng);
    results.push_back(run_check("scale_axpby_add", {&a, &b}, [&](bool wg) {
      Graph g;
      ValueId pa = g.param(a), pb = g.param(b);
      ValueId out = g.add(g.axpby(pa, 0.7, pb, -1.3), g.scale(pa, 0.5));
      ValueId loss = to_scalar(g, out);
      if (wg) g.backward(loss);
      return g.scalar(loss);
    }, tolerance));
  }
  {
    Tensor a = rand_tensor({5, 3}, rng);
    Tensor b = rand_tensor({5, 4}, rng);
    Tensor c = rand_tensor({1, 2}, rng);  // broadcast across rows
    results.push_back(run_check("concat_broadcast", {&a, &b, &c}, [&](bool wg) {
      Graph g;
      ValueId out = g.concat_cols({g.param(a), g.param(b), g.param(c)}, 5);
      ValueId loss = to_scalar(g, out);
      if (wg) g.backward(loss);
      return g.scalar(loss);
    }, tolerance));
  }
  {
    Tensor a = rand_tensor({5, 8}, rng);
    Tensor b = rand_tensor({1, 8}, rng);
    results.push_back(run_check("row_dot", {&a, &b}, [&](bool wg) {
      Graph g;
      ValueId out = g.row_dot(g.param(a), g.param(b));
      ValueId loss = g.matmul(g.constant(std::vector<double>(5, 0.4), 1, 5), out);
      if (wg) g.backward(loss);
      return g.scalar(loss);
    }, tolerance));
  }
  {
    Tensor a = rand_tensor({4, 6}, rng);
    Tensor b = rand_tensor({4, 6}, rng);
    results.push_back(run_check("latent_cross", {&a, &b}, [&](bool wg) {
      Graph g;
      ValueId loss = to_scalar(g, g.one_plus_mul(g.param(a), g.param(b)));
      if (wg) g.backward(loss);
      return g.scalar(loss);
    }, tolerance));
  }

  LabelVector yc = LabelVector::from({1, 0, 1, 0, 0});
  LabelVector yo = LabelVector::from({0, 0, 1, 0, 0});
  {
    Tensor s = rand_tensor({5, 1}, rng);
    results.push_back(run_check("ranknet_loss", {&s}, [&](bool wg) {
      Graph g;
      ValueId loss = ranknet_loss_node(g, g.param(s), yc);
      if (wg) g.backward(loss);
      return g.scalar(loss);
    }, tolerance));
  }
  {
    Tensor s = rand_tensor({5, 1}, rng);
    results.push_back(run_check("softmax_ce_loss", {&s}, [&](bool wg) {
      Graph g;
      ValueId loss = softmax_ce_loss_node(g, g.param(s), yc);
      if (wg) g.backward(loss);
      return g.scalar(loss);
    }, tolerance));
  }
  {
    Tensor s = rand_tensor({5, 1}, rng);
    LossConfig lc;
    lc.kind = LossKind::kRankNet;
    results.push_back(run_check("combined_loss", {&s}, [&](bool wg) {
      Graph g;
      ValueId loss = combined_loss_node(g, g.param(s), yc, yo, lc);
      if (wg) g.backward(loss);
      return g.scalar(loss);
    }, tolerance));
  }

  // End-to-end: each architecture with each loss on one seeded list, training
  // mode with a deterministic dropout stream per evaluation.
  Fixture fix = make_fixture(rng);
  const size_t h = 8, k = 2;
  const double drop = 0.25;
  for (LossKind lk : {LossKind::kSoftmaxCE, LossKind::kRankNet}) {
    LossConfig lc;
    lc.kind = lk;
    std::string suffix = lk == LossKind::kSoftmaxCE ? "_ce" : "_rn";
    size_t dp = fix.schema.d_product(), dc = fix.schema.d_context();

    {
      TwoTowerModel m;
      Rng ir(11);
      m.init(dp, dc, h, k, drop, ir);
      std::vector<Tensor*> params = fix.tables.trainable_params();
      auto mp = m.params();
      params.insert(params.end(), mp.begin(), mp.end());
      results.push_back(run_check("two_tower" + suffix, params, [&](bool wg) {
        Graph g;
        Rng drng(99);
        TableNodes tn = table_nodes(g, fix.tables);
        TwoTowerNodes nodes = two_tower_nodes(g, m);
        ValueId xp = product_matrix_node(g, fix.schema, tn, fix.products);
        ValueId xc = context_row_node(g, fix.schema, tn, fix.context);
        ValueId s = two_tower_apply(g, nodes, m, xp, xc, Mode::kTrain, drng);
        ValueId loss = combined_loss_node(g, s, fix.y_c, fix.y_o, lc);
        if (wg) g.backward(loss);
        return g.scalar(loss);
      }, tolerance));
    }
    {
      CrossEncoderModel m;
      Rng ir(12);
      m.init(dp, dc, h, k, drop, ir);
      std::vector<Tensor*> params = fix.tables.trainable_params();
      auto mp = m.params();
      params.insert(params.end(), mp.begin(), mp.end());
      results.push_back(run_check("cross_encoder" + suffix, params, [&](bool wg) {
        Graph g;
        Rng drng(99);
        TableNodes tn = table_nodes(g, fix.tables);
        CrossEncoderNodes nodes = cross_encoder_nodes(g, m);
        ValueId xp = product_matrix_node(g, fix.schema, tn, fix.products);
        ValueId xc = context_row_node(g, fix.schema, tn, fix.context);
        ValueId s = cross_encoder_apply(g, nodes, m, xp, xc, Mode::kTrain, drng);
        ValueId loss = combined_loss_node(g, s, fix.y_c, fix.y_o, lc);
        if (wg) g.backward(loss);
        return g.scalar(loss);
      }, tolerance));
    }
    {
      TransformerModel m;
      Rng ir(13);
      m.init(dp, dc, h, k, drop, ir);
      std::vector<Tensor*> params = fix.tables.trainable_params();
      auto mp = m.params();
      params.insert(params.end(), mp.begin(), mp.end());
      results.push_back(run_check("transformer" + suffix, params, [&](bool wg) {
        Graph g;
        Rng drng(99);
        TableNodes tn = table_nodes(g, fix.tables);
        TransformerNodes nodes = transformer_nodes(g, m);
        ValueId xp = product_matrix_node(g, fix.schema, tn, fix.products);
        ValueId xc = context_row_node(g, fix.schema, tn, fix.context);
        ValueId s = transformer_apply(g, nodes, m, xp, xc, Mode::kTrain, drng);
        ValueId loss = combined_loss_node(g, s, fix.y_c, fix.y_o, lc);
        if (wg) g.backward(loss);
        return g.scalar(loss);
      }, tolerance));
    }
  }
  return results;
}

bool gradcheck_all_pass(const std::vector<GradCheckResult>& results) {
  for (const auto& r : results)
    if (!r.pass) return false;
  return !results.empty();
}

std::string render_gradcheck(const std::vector<GradCheckResult>& results) {
  std::string out;
  for (const auto& r : results) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%-20s %-4s max_rel_err=%.3e\n", r.name.c_str(),
                  r.pass ? "ok" : "FAIL", r.max_rel_err);
    out += buf;
  }
  return out;
}

}  // namespace ltr

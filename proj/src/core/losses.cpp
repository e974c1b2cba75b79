#include "core/losses.hpp"

#include <cmath>

namespace ltr {

LabelVector LabelVector::from(std::vector<int> labels) {
  LabelVector v;
  v.y = std::move(labels);
  for (int e : v.y) {
    if (e != 0 && e != 1) throw_invalid("labels must be 0 or 1, got " + std::to_string(e));
    v.positives += e;
  }
  return v;
}

const char* loss_kind_name(LossKind k) {
  return k == LossKind::kRankNet ? "ranknet" : "softmax_ce";
}

LossKind loss_kind_from(const std::string& name) {
  if (name == "ranknet" || name == "rn") return LossKind::kRankNet;
  if (name == "softmax_ce" || name == "ce") return LossKind::kSoftmaxCE;
  throw_parse("unknown loss kind \"" + name + "\" (expected ranknet or softmax_ce)");
}

void LossConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw_invalid("loss alpha must be in (0, 1), got " + std::to_string(alpha));
}

namespace {

void check_lengths(std::span<const double> s, const LabelVector& y) {
  if (s.size() != y.size())
    throw_invalid("score/label length mismatch: " + std::to_string(s.size()) + " vs " +
                  std::to_string(y.size()));
}

}  // namespace

double ranknet_loss(std::span<const double> s, const LabelVector& y) {
  check_lengths(s, y);
  int negatives = static_cast<int>(y.size()) - y.positives;
  if (y.positives == 0 || negatives == 0) return 0.0;
  double sum = 0.0;
  for (size_t i = 0; i < s.size(); ++i) {
    if (!y.y[i]) continue;
    for (size_t j = 0; j < s.size(); ++j) {
      if (y.y[j]) continue;
      sum += softplus(s[j] - s[i]);
    }
  }
  return sum / static_cast<double>(y.positives);
}

std::vector<double> ranknet_loss_grad(std::span<const double> s, const LabelVector& y) {
  check_lengths(s, y);
  std::vector<double> g(s.size(), 0.0);
  int negatives = static_cast<int>(y.size()) - y.positives;
  if (y.positives == 0 || negatives == 0) return g;
  double inv_p = 1.0 / static_cast<double>(y.positives);
  for (size_t i = 0; i < s.size(); ++i) {
    if (!y.y[i]) continue;
    for (size_t j = 0; j < s.size(); ++j) {
      if (y.y[j]) continue;
      double p = sigmoid(s[j] - s[i]);  // d softplus(s_j - s_i) / d s_j
      g[i] -= p * inv_p;
      g[j] += p * inv_p;
    }
  }
  return g;
}

double softmax_ce_loss(std::span<const double> s, const LabelVector& y) {
  check_lengths(s, y);
  if (y.positives == 0) throw_invalid("softmax_ce_loss requires at least one positive");
  double mx = s[0];
  for (double v : s) mx = std::max(mx, v);
  double sum = 0.0;
  for (double v : s) sum += std::exp(v - mx);
  double lse = mx + std::log(sum);
  double dot = 0.0;
  for (size_t i = 0; i < s.size(); ++i)
    if (y.y[i]) dot += s[i];
  dot /= static_cast<double>(y.positives);
  return lse - dot;
}

std::vector<double> softmax_ce_loss_grad(std::span<const double> s, const LabelVector& y) {
  check_lengths(s, y);
  if (y.positives == 0) throw_invalid("softmax_ce_loss requires at least one positive");
  std::vector<double> g = softmax(s);
  double inv_p = 1.0 / static_cast<double>(y.positives);
  for (size_t i = 0; i < s.size(); ++i)
    if (y.y[i]) g[i] -= inv_p;
  return g;
}

double combined_loss(std::span<const double> s, const LabelVector& y_c,
                     const LabelVector& y_o, const LossConfig& cfg) {
  cfg.validate();
  check_lengths(s, y_c);
  check_lengths(s, y_o);
  auto term = [&](const LabelVector& y) {
    if (y.positives == 0) return 0.0;
    return cfg.kind == LossKind::kRankNet ? ranknet_loss(s, y) : softmax_ce_loss(s, y);
  };
  return cfg.alpha * term(y_c) + (1.0 - cfg.alpha) * term(y_o);
}

namespace {

std::span<const double> scores_of(Graph& g, ValueId scores, const LabelVector& y) {
  auto s = g.value(scores);
  if (s.size() != y.size()) throw_invalid("loss node: score/label length mismatch");
  return s;
}

}  // namespace

ValueId ranknet_loss_node(Graph& g, ValueId scores, const LabelVector& y) {
  auto s = scores_of(g, scores, y);
  double val = ranknet_loss(s, y);
  LabelVector labels = y;
  return g.custom({scores}, {val}, 1, 1, [labels](CustomCtx& ctx) {
    auto s = ctx.operand_val(0);
    auto gs = ctx.operand_grad(0);
    double seed = ctx.out_grad[0];
    auto grad = ranknet_loss_grad(s, labels);
    for (size_t i = 0; i < grad.size(); ++i) gs[i] += seed * grad[i];
  });
}

ValueId softmax_ce_loss_node(Graph& g, ValueId scores, const LabelVector& y) {
  auto s = scores_of(g, scores, y);
  double val = softmax_ce_loss(s, y);
  LabelVector labels = y;
  return g.custom({scores}, {val}, 1, 1, [labels](CustomCtx& ctx) {
    auto s = ctx.operand_val(0);
    auto gs = ctx.operand_grad(0);
    double seed = ctx.out_grad[0];
    auto grad = softmax_ce_loss_grad(s, labels);
    for (size_t i = 0; i < grad.size(); ++i) gs[i] += seed * grad[i];
  });
}

ValueId combined_loss_node(Graph& g, ValueId scores, const LabelVector& y_c,
                           const LabelVector& y_o, const LossConfig& cfg) {
  cfg.validate();
  auto make = [&](const LabelVector& y) {
    return cfg.kind == LossKind::kRankNet ? ranknet_loss_node(g, scores, y)
                                          : softmax_ce_loss_node(g, scores, y);
  };
  bool has_c = y_c.positives > 0;
  bool has_o = y_o.positives > 0;
  if (has_c && has_o)
    return g.axpby(make(y_c), cfg.alpha, make(y_o), 1.0 - cfg.alpha);
  if (has_c) return g.scale(make(y_c), cfg.alpha);
  if (has_o) return g.scale(make(y_o), 1.0 - cfg.alpha);
  return g.constant(std::vector<double>{0.0}, 1, 1);
}

}  // namespace ltr

#pragma once

#include <span>
#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace ltr {

struct LabelVector {
  std::vector<int> y;
  int positives = 0;

  LabelVector() = default;
  static LabelVector from(std::vector<int> labels);
  size_t size() const { return y.size(); }
};

enum class LossKind { kRankNet, kSoftmaxCE };

const char* loss_kind_name(LossKind k);
LossKind loss_kind_from(const std::string& name);

struct LossConfig {
  LossKind kind = LossKind::kSoftmaxCE;
  double alpha = 0.5;
  void validate() const;
};

// Pairwise loss over (positive, negative) pairs, normalized by the positive
// count. Returns 0 when the list has no positives or no negatives.
double ranknet_loss(std::span<const double> s, const LabelVector& y);
std::vector<double> ranknet_loss_grad(std::span<const double> s, const LabelVector& y);

// Cross-entropy against labels normalized to a distribution. Requires at
// least one positive; callers skip the term instead.
double softmax_ce_loss(std::span<const double> s, const LabelVector& y);
std::vector<double> softmax_ce_loss_grad(std::span<const double> s, const LabelVector& y);

double combined_loss(std::span<const double> s, const LabelVector& y_c,
                     const LabelVector& y_o, const LossConfig& cfg);

// Graph nodes: scores [n x 1] -> scalar loss.
ValueId ranknet_loss_node(Graph& g, ValueId scores, const LabelVector& y);
ValueId softmax_ce_loss_node(Graph& g, ValueId scores, const LabelVector& y);
ValueId combined_loss_node(Graph& g, ValueId scores, const LabelVector& y_c,
                           const LabelVector& y_o, const LossConfig& cfg);

}  // namespace ltr

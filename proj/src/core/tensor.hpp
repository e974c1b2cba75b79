#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "core/common.hpp"

namespace ltr {

// Dense row-major tensor of 64-bit floats with an optional gradient buffer.
struct Tensor {
  std::vector<size_t> shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until ensure_grad()

  Tensor() = default;
  Tensor(std::vector<size_t> s, double fill = 0.0)
      : shape(std::move(s)), data(count(shape), fill) {}

  static size_t count(const std::vector<size_t>& shape) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    return n;
  }

  size_t size() const { return data.size(); }
  // 1-D tensors are treated as a single row.
  size_t rows() const { return shape.size() >= 2 ? shape[0] : 1; }
  size_t cols() const { return shape.size() >= 2 ? shape[1] : (shape.empty() ? 0 : shape[0]); }

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
  void zero_grad() {
    if (!grad.empty()) std::fill(grad.begin(), grad.end(), 0.0);
  }
};

enum class Mode { kTrain, kEval };

// ------------------------------------------------------------------ kernels

void matvec_kernel(const double* w, const double* x, const double* b, double* y,
                   size_t out, size_t in);
void layer_norm_kernel(const double* z, const double* gain, const double* shift,
                       double eps, double* out, size_t n);
void softmax_kernel(const double* s, double* out, size_t n);

// ------------------------------------------------- functional layer surface

struct LinearLayer {
  Tensor weights;  // [out x in]
  Tensor bias;     // [out]

  LinearLayer() = default;
  LinearLayer(size_t out, size_t in)
      : weights({out, in}), bias({out}) {}
  size_t out_dim() const { return weights.rows(); }
  size_t in_dim() const { return weights.cols(); }
};

std::vector<double> linear_forward(std::span<const double> x, const LinearLayer& layer);
std::vector<double> layer_norm(std::span<const double> z, std::span<const double> gain,
                               std::span<const double> shift, double eps);
std::vector<double> softmax(std::span<const double> s);

// Inverted dropout: train mode zeroes entries with probability `rate` and
// scales survivors by 1/(1-rate); eval mode is the identity.
std::vector<double> dropout(std::span<const double> z, double rate, Mode mode, Rng& rng);
// Multiplicative mask (entries 0 or 1/(1-rate)) for in-graph dropout.
std::vector<double> dropout_mask(size_t n, double rate, Rng& rng);

// ---------------------------------------------------------------------- Adam

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class AdamState {
 public:
  AdamState(std::vector<Tensor*> params, AdamConfig cfg);

  // One bias-corrected update from the parameters' accumulated gradients.
  void step();
  int64_t step_count() const { return step_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  std::vector<Tensor*> params_;
  std::vector<std::vector<double>> m_, v_;
  AdamConfig cfg_;
  int64_t step_ = 0;
};

// ------------------------------------------------------------ reverse mode

using ValueId = int;

class Graph;

// Operand access for custom nodes during the backward sweep.
struct CustomCtx {
  Graph* graph;
  int node_id;
  std::span<const double> out_grad;
  std::span<const double> operand_val(int i) const;
  std::span<double> operand_grad(int i) const;  // allocates on first touch
};

// Immediate-mode tape: each builder evaluates its node eagerly; backward()
// sweeps the tape in reverse and accumulates into parameter grad buffers.
class Graph {
 public:
  ValueId param(Tensor& t);
  ValueId constant(std::span<const double> data, size_t rows, size_t cols);
  ValueId constant(std::vector<double> data, size_t rows, size_t cols);

  // Row-wise affine map: X [n x in], W [out x in], b [out] -> [n x out].
  ValueId linear_rows(ValueId x, ValueId w, ValueId b);
  ValueId relu(ValueId a);
  ValueId mul_mask(ValueId a, std::vector<double> mask);
  ValueId layer_norm_rows(ValueId z, ValueId gain, ValueId shift, double eps);
  ValueId add(ValueId a, ValueId b);
  // Column-concatenates operands; operands with a single row broadcast.
  ValueId concat_cols(const std::vector<ValueId>& parts, size_t rows);
  // Row r of the result is the sum of table rows listed in bags[r].
  ValueId embed_rows(ValueId table, const std::vector<std::vector<int>>& bags);
  ValueId matmul(ValueId a, ValueId b);     // [n x m][m x k] -> [n x k]
  ValueId matmul_nt(ValueId a, ValueId b);  // [n x k][m x k] -> [n x m]
  ValueId scale(ValueId a, double s);
  ValueId softmax_rows(ValueId a);
  ValueId row_dot(ValueId a, ValueId b);    // [n x h],[1 x h] -> [n x 1]
  ValueId one_plus_mul(ValueId a, ValueId b);
  ValueId axpby(ValueId a, double alpha, ValueId b, double beta);
  ValueId custom(std::vector<ValueId> operands, std::vector<double> value,
                 size_t rows, size_t cols, std::function<void(CustomCtx&)> backward);

  std::span<const double> value(ValueId id) const;
  double scalar(ValueId id) const;
  size_t rows(ValueId id) const;
  size_t cols(ValueId id) const;

  // Reverse sweep from a scalar node; `seed` is the upstream gradient.
  void backward(ValueId loss, double seed = 1.0);

  void reset();

 private:
  friend struct CustomCtx;

  struct Node {
    int op;
    int a = -1, b = -1, c = -1;
    size_t rows = 0, cols = 0;
    Tensor* param = nullptr;
    std::vector<double> val;
    std::vector<double> grad;
    std::vector<double> aux;
    std::vector<int> ids;
    std::vector<int> offsets;
    std::vector<int> operands;
    double s0 = 0.0;
    std::function<void(CustomCtx&)> backward;
  };

  const double* data_of(int id) const;
  double* grad_of(int id);  // lazily zero-allocated
  size_t size_of(int id) const;
  ValueId push(Node&& n);
  void backward_node(int id);

  std::vector<Node> nodes_;
};

// ------------------------------------------------------------ grad checking

// Compares the reverse-mode gradient of a scalar function against central
// finite differences. `f(true)` must run forward and backward (accumulating
// into the params' grad buffers); `f(false)` runs forward only. The function
// must be deterministic across calls. Returns the max over coordinates of
// |g_ad - g_fd| / max(1, |g_ad|, |g_fd|); non-finite values yield +inf.
double grad_check(std::span<Tensor* const> params,
                  const std::function<double(bool)>& f, double eps = 1e-5);

// Seeded uniform(-a, a) init with a = sqrt(6 / (fan_in + fan_out)).
void init_linear(Tensor& weights, Tensor& bias, Rng& rng);
// Seeded normal(0, 0.01) init for embedding tables.
void init_embedding(Tensor& table, Rng& rng);

}  // namespace ltr

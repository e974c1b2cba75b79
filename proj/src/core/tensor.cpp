#include "core/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace ltr {

namespace {

enum Op : int {
  kParam = 0,
  kConst,
  kLinearRows,
  kRelu,
  kMulMask,
  kLayerNormRows,
  kAdd,
  kConcatCols,
  kEmbedRows,
  kMatmul,
  kMatmulNT,
  kScale,
  kSoftmaxRows,
  kRowDot,
  kOnePlusMul,
  kAxpby,
  kCustom,
};

}  // namespace

// ------------------------------------------------------------------ kernels

void matvec_kernel(const double* w, const double* x, const double* b, double* y,
                   size_t out, size_t in) {
  for (size_t o = 0; o < out; ++o) {
    double acc = b ? b[o] : 0.0;
    const double* row = w + o * in;
    for (size_t i = 0; i < in; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
}

void layer_norm_kernel(const double* z, const double* gain, const double* shift,
                       double eps, double* out, size_t n) {
  double mu = 0.0;
  for (size_t i = 0; i < n; ++i) mu += z[i];
  mu /= static_cast<double>(n);
  double var = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double d = z[i] - mu;
    var += d * d;
  }
  var /= static_cast<double>(n);
  double istd = 1.0 / std::sqrt(var + eps);
  for (size_t i = 0; i < n; ++i) out[i] = gain[i] * (z[i] - mu) * istd + shift[i];
}

void softmax_kernel(const double* s, double* out, size_t n) {
  double mx = s[0];
  for (size_t i = 1; i < n; ++i) mx = std::max(mx, s[i]);
  double sum = 0.0;
  for (size_t i = 0; i < n; ++i) {
    out[i] = std::exp(s[i] - mx);
    sum += out[i];
  }
  for (size_t i = 0; i < n; ++i) out[i] /= sum;
}

// ------------------------------------------------- functional layer surface

std::vector<double> linear_forward(std::span<const double> x, const LinearLayer& layer) {
  if (x.size() != layer.in_dim())
    throw_invalid("linear_forward: input size " + std::to_string(x.size()) +
                  " does not match layer input dim " + std::to_string(layer.in_dim()));
  std::vector<double> y(layer.out_dim());
  matvec_kernel(layer.weights.data.data(), x.data(), layer.bias.data.data(), y.data(),
                layer.out_dim(), layer.in_dim());
  return y;
}

std::vector<double> layer_norm(std::span<const double> z, std::span<const double> gain,
                               std::span<const double> shift, double eps) {
  if (z.empty()) throw_invalid("layer_norm: empty input");
  if (gain.size() != z.size() || shift.size() != z.size())
    throw_invalid("layer_norm: gain/shift size mismatch");
  if (!(eps > 0.0)) throw_invalid("layer_norm: eps must be positive");
  std::vector<double> out(z.size());
  layer_norm_kernel(z.data(), gain.data(), shift.data(), eps, out.data(), z.size());
  return out;
}

std::vector<double> softmax(std::span<const double> s) {
  if (s.empty()) throw_invalid("softmax: empty input");
  std::vector<double> out(s.size());
  softmax_kernel(s.data(), out.data(), s.size());
  return out;
}

std::vector<double> dropout(std::span<const double> z, double rate, Mode mode, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw_invalid("dropout: rate must be in [0, 1), got " + std::to_string(rate));
  std::vector<double> out(z.begin(), z.end());
  if (mode == Mode::kEval || rate == 0.0) return out;
  double keep = 1.0 - rate;
  for (double& v : out) {
    v = (rng.uniform() < rate) ? 0.0 : v / keep;
  }
  return out;
}

std::vector<double> dropout_mask(size_t n, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0))
    throw_invalid("dropout: rate must be in [0, 1), got " + std::to_string(rate));
  std::vector<double> mask(n, 1.0);
  if (rate == 0.0) return mask;
  double keep = 1.0 - rate;
  for (double& v : mask) v = (rng.uniform() < rate) ? 0.0 : 1.0 / keep;
  return mask;
}

// ---------------------------------------------------------------------- Adam

AdamState::AdamState(std::vector<Tensor*> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (Tensor* p : params_) {
    if (!p) throw_invalid("AdamState: null parameter");
    m_.emplace_back(p->size(), 0.0);
    v_.emplace_back(p->size(), 0.0);
  }
}

void AdamState::step() {
  ++step_;
  double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (size_t k = 0; k < params_.size(); ++k) {
    Tensor& p = *params_[k];
    p.ensure_grad();
    for (size_t i = 0; i < p.size(); ++i) {
      double g = p.grad[i];
      m_[k][i] = cfg_.beta1 * m_[k][i] + (1.0 - cfg_.beta1) * g;
      v_[k][i] = cfg_.beta2 * v_[k][i] + (1.0 - cfg_.beta2) * g * g;
      double mhat = m_[k][i] / bc1;
      double vhat = v_[k][i] / bc2;
      p.data[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

// ------------------------------------------------------------ reverse mode

std::span<const double> CustomCtx::operand_val(int i) const {
  int id = graph->nodes_[node_id].operands[static_cast<size_t>(i)];
  return {graph->data_of(id), graph->size_of(id)};
}

std::span<double> CustomCtx::operand_grad(int i) const {
  int id = graph->nodes_[node_id].operands[static_cast<size_t>(i)];
  return {graph->grad_of(id), graph->size_of(id)};
}

const double* Graph::data_of(int id) const { return nodes_[static_cast<size_t>(id)].val.data(); }

size_t Graph::size_of(int id) const {
  const Node& n = nodes_[static_cast<size_t>(id)];
  return n.rows * n.cols;
}

double* Graph::grad_of(int id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (n.grad.size() != n.val.size()) n.grad.assign(n.val.size(), 0.0);
  return n.grad.data();
}

ValueId Graph::push(Node&& n) {
  nodes_.push_back(std::move(n));
  return static_cast<ValueId>(nodes_.size() - 1);
}

ValueId Graph::param(Tensor& t) {
  Node n;
  n.op = kParam;
  n.rows = t.rows();
  n.cols = t.cols();
  n.param = &t;
  n.val = t.data;
  return push(std::move(n));
}

ValueId Graph::constant(std::span<const double> data, size_t rows, size_t cols) {
  return constant(std::vector<double>(data.begin(), data.end()), rows, cols);
}

ValueId Graph::constant(std::vector<double> data, size_t rows, size_t cols) {
  if (data.size() != rows * cols) throw_invalid("Graph::constant: data size mismatch");
  Node n;
  n.op = kConst;
  n.rows = rows;
  n.cols = cols;
  n.val = std::move(data);
  return push(std::move(n));
}

ValueId Graph::linear_rows(ValueId x, ValueId w, ValueId b) {
  const Node& nx = nodes_[static_cast<size_t>(x)];
  const Node& nw = nodes_[static_cast<size_t>(w)];
  const Node& nb = nodes_[static_cast<size_t>(b)];
  if (nx.cols != nw.cols) throw_invalid("linear_rows: input/weight dim mismatch");
  if (nb.rows * nb.cols != nw.rows) throw_invalid("linear_rows: bias dim mismatch");
  Node n;
  n.op = kLinearRows;
  n.a = x;
  n.b = w;
  n.c = b;
  n.rows = nx.rows;
  n.cols = nw.rows;
  n.val.resize(n.rows * n.cols);
  for (size_t r = 0; r < n.rows; ++r)
    matvec_kernel(nw.val.data(), nx.val.data() + r * nx.cols, nb.val.data(),
                  n.val.data() + r * n.cols, n.cols, nx.cols);
  return push(std::move(n));
}

ValueId Graph::relu(ValueId a) {
  const Node& na = nodes_[static_cast<size_t>(a)];
  Node n;
  n.op = kRelu;
  n.a = a;
  n.rows = na.rows;
  n.cols = na.cols;
  n.val.resize(na.val.size());
  for (size_t i = 0; i < na.val.size(); ++i) n.val[i] = na.val[i] > 0.0 ? na.val[i] : 0.0;
  return push(std::move(n));
}

ValueId Graph::mul_mask(ValueId a, std::vector<double> mask) {
  const Node& na = nodes_[static_cast<size_t>(a)];
  if (mask.size() != na.val.size()) throw_invalid("mul_mask: mask size mismatch");
  Node n;
  n.op = kMulMask;
  n.a = a;
  n.rows = na.rows;
  n.cols = na.cols;
  n.aux = std::move(mask);
  n.val.resize(na.val.size());
  for (size_t i = 0; i < na.val.size(); ++i) n.val[i] = na.val[i] * n.aux[i];
  return push(std::move(n));
}

ValueId Graph::layer_norm_rows(ValueId z, ValueId gain, ValueId shift, double eps) {
  const Node& nz = nodes_[static_cast<size_t>(z)];
  const Node& ng = nodes_[static_cast<size_t>(gain)];
  const Node& ns = nodes_[static_cast<size_t>(shift)];
  if (ng.val.size() != nz.cols || ns.val.size() != nz.cols)
    throw_invalid("layer_norm_rows: gain/shift dim mismatch");
  if (!(eps > 0.0)) throw_invalid("layer_norm_rows: eps must be positive");
  Node n;
  n.op = kLayerNormRows;
  n.a = z;
  n.b = gain;
  n.c = shift;
  n.s0 = eps;
  n.rows = nz.rows;
  n.cols = nz.cols;
  n.val.resize(nz.val.size());
  n.aux.resize(2 * nz.rows);  // per row: mean, 1/std
  for (size_t r = 0; r < nz.rows; ++r) {
    const double* zr = nz.val.data() + r * nz.cols;
    double mu = 0.0;
    for (size_t i = 0; i < nz.cols; ++i) mu += zr[i];
    mu /= static_cast<double>(nz.cols);
    double var = 0.0;
    for (size_t i = 0; i < nz.cols; ++i) {
      double d = zr[i] - mu;
      var += d * d;
    }
    var /= static_cast<double>(nz.cols);
    double istd = 1.0 / std::sqrt(var + eps);
    n.aux[2 * r] = mu;
    n.aux[2 * r + 1] = istd;
    double* outr = n.val.data() + r * nz.cols;
    for (size_t i = 0; i < nz.cols; ++i)
      outr[i] = ng.val[i] * (zr[i] - mu) * istd + ns.val[i];
  }
  return push(std::move(n));
}

ValueId Graph::add(ValueId a, ValueId b) {
  const Node& na = nodes_[static_cast<size_t>(a)];
  const Node& nb = nodes_[static_cast<size_t>(b)];
  if (na.val.size() != nb.val.size()) throw_invalid("add: shape mismatch");
  Node n;
  n.op = kAdd;
  n.a = a;
  n.b = b;
  n.rows = na.rows;
  n.cols = na.cols;
  n.val.resize(na.val.size());
  for (size_t i = 0; i < na.val.size(); ++i) n.val[i] = na.val[i] + nb.val[i];
  return push(std::move(n));
}

ValueId Graph::concat_cols(const std::vector<ValueId>& parts, size_t rows) {
  if (parts.empty()) throw_invalid("concat_cols: no operands");
  size_t total = 0;
  for (ValueId p : parts) {
    const Node& np = nodes_[static_cast<size_t>(p)];
    if (np.rows != rows && np.rows != 1)
      throw_invalid("concat_cols: operand row count must be 1 or match");
    total += np.cols;
  }
  Node n;
  n.op = kConcatCols;
  n.rows = rows;
  n.cols = total;
  n.operands.assign(parts.begin(), parts.end());
  n.offsets.resize(parts.size());
  n.val.resize(rows * total);
  size_t off = 0;
  for (size_t p = 0; p < parts.size(); ++p) {
    const Node& np = nodes_[static_cast<size_t>(parts[p])];
    n.offsets[p] = static_cast<int>(off);
    for (size_t r = 0; r < rows; ++r) {
      const double* src = np.val.data() + (np.rows == 1 ? 0 : r * np.cols);
      std::memcpy(n.val.data() + r * total + off, src, np.cols * sizeof(double));
    }
    off += np.cols;
  }
  return push(std::move(n));
}

ValueId Graph::embed_rows(ValueId table, const std::vector<std::vector<int>>& bags) {
  const Node& nt = nodes_[static_cast<size_t>(table)];
  Node n;
  n.op = kEmbedRows;
  n.a = table;
  n.rows = bags.size();
  n.cols = nt.cols;
  n.val.assign(n.rows * n.cols, 0.0);
  n.offsets.resize(bags.size() + 1);
  n.offsets[0] = 0;
  for (size_t r = 0; r < bags.size(); ++r) {
    for (int idx : bags[r]) {
      if (idx < 0 || static_cast<size_t>(idx) >= nt.rows)
        throw_invalid("embed_rows: index out of range");
      const double* src = nt.val.data() + static_cast<size_t>(idx) * nt.cols;
      double* dst = n.val.data() + r * n.cols;
      for (size_t i = 0; i < n.cols; ++i) dst[i] += src[i];
      n.ids.push_back(idx);
    }
    n.offsets[r + 1] = static_cast<int>(n.ids.size());
  }
  return push(std::move(n));
}

ValueId Graph::matmul(ValueId a, ValueId b) {
  const Node& na = nodes_[static_cast<size_t>(a)];
  const Node& nb = nodes_[static_cast<size_t>(b)];
  if (na.cols != nb.rows) throw_invalid("matmul: inner dim mismatch");
  Node n;
  n.op = kMatmul;
  n.a = a;
  n.b = b;
  n.rows = na.rows;
  n.cols = nb.cols;
  n.val.assign(n.rows * n.cols, 0.0);
  for (size_t r = 0; r < na.rows; ++r)
    for (size_t m = 0; m < na.cols; ++m) {
      double av = na.val[r * na.cols + m];
      if (av == 0.0) continue;
      const double* brow = nb.val.data() + m * nb.cols;
      double* orow = n.val.data() + r * n.cols;
      for (size_t c = 0; c < nb.cols; ++c) orow[c] += av * brow[c];
    }
  return push(std::move(n));
}

ValueId Graph::matmul_nt(ValueId a, ValueId b) {
  const Node& na = nodes_[static_cast<size_t>(a)];
  const Node& nb = nodes_[static_cast<size_t>(b)];
  if (na.cols != nb.cols) throw_invalid("matmul_nt: column dim mismatch");
  Node n;
  n.op = kMatmulNT;
  n.a = a;
  n.b = b;
  n.rows = na.rows;
  n.cols = nb.rows;
  n.val.resize(n.rows * n.cols);
  for (size_t r = 0; r < na.rows; ++r)
    for (size_t c = 0; c < nb.rows; ++c) {
      double acc = 0.0;
      const double* ar = na.val.data() + r * na.cols;
      const double* br = nb.val.data() + c * nb.cols;
      for (size_t i = 0; i < na.cols; ++i) acc += ar[i] * br[i];
      n.val[r * n.cols + c] = acc;
    }
  return push(std::move(n));
}

ValueId Graph::scale(ValueId a, double s) {
  const Node& na = nodes_[static_cast<size_t>(a)];
  Node n;
  n.op = kScale;
  n.a = a;
  n.s0 = s;
  n.rows = na.rows;
  n.cols = na.cols;
  n.val.resize(na.val.size());
  for (size_t i = 0; i < na.val.size(); ++i) n.val[i] = s * na.val[i];
  return push(std::move(n));
}

ValueId Graph::softmax_rows(ValueId a) {
  const Node& na = nodes_[static_cast<size_t>(a)];
  Node n;
  n.op = kSoftmaxRows;
  n.a = a;
  n.rows = na.rows;
  n.cols = na.cols;
  n.val.resize(na.val.size());
  for (size_t r = 0; r < na.rows; ++r)
    softmax_kernel(na.val.data() + r * na.cols, n.val.data() + r * na.cols, na.cols);
  return push(std::move(n));
}

ValueId Graph::row_dot(ValueId a, ValueId b) {
  const Node& na = nodes_[static_cast<size_t>(a)];
  const Node& nb = nodes_[static_cast<size_t>(b)];
  if (na.cols != nb.cols) throw_invalid("row_dot: column dim mismatch");
  if (nb.rows != 1 && nb.rows != na.rows) throw_invalid("row_dot: row count mismatch");
  Node n;
  n.op = kRowDot;
  n.a = a;
  n.b = b;
  n.rows = na.rows;
  n.cols = 1;
  n.val.resize(na.rows);
  for (size_t r = 0; r < na.rows; ++r) {
    const double* ar = na.val.data() + r * na.cols;
    const double* br = nb.val.data() + (nb.rows == 1 ? 0 : r * nb.cols);
    double acc = 0.0;
    for (size_t i = 0; i < na.cols; ++i) acc += ar[i] * br[i];
    n.val[r] = acc;
  }
  return push(std::move(n));
}

ValueId Graph::one_plus_mul(ValueId a, ValueId b) {
  const Node& na = nodes_[static_cast<size_t>(a)];
  const Node& nb = nodes_[static_cast<size_t>(b)];
  if (na.val.size() != nb.val.size()) throw_invalid("one_plus_mul: shape mismatch");
  Node n;
  n.op = kOnePlusMul;
  n.a = a;
  n.b = b;
  n.rows = na.rows;
  n.cols = na.cols;
  n.val.resize(na.val.size());
  for (size_t i = 0; i < na.val.size(); ++i) n.val[i] = (1.0 + na.val[i]) * nb.val[i];
  return push(std::move(n));
}

ValueId Graph::axpby(ValueId a, double alpha, ValueId b, double beta) {
  const Node& na = nodes_[static_cast<size_t>(a)];
  const Node& nb = nodes_[static_cast<size_t>(b)];
  if (na.val.size() != nb.val.size()) throw_invalid("axpby: shape mismatch");
  Node n;
  n.op = kAxpby;
  n.a = a;
  n.b = b;
  n.aux = {alpha, beta};
  n.rows = na.rows;
  n.cols = na.cols;
  n.val.resize(na.val.size());
  for (size_t i = 0; i < na.val.size(); ++i)
    n.val[i] = alpha * na.val[i] + beta * nb.val[i];
  return push(std::move(n));
}

ValueId Graph::custom(std::vector<ValueId> operands, std::vector<double> value,
                      size_t rows, size_t cols, std::function<void(CustomCtx&)> backward) {
  if (value.size() != rows * cols) throw_invalid("custom: value size mismatch");
  Node n;
  n.op = kCustom;
  n.rows = rows;
  n.cols = cols;
  n.operands = std::move(operands);
  n.val = std::move(value);
  n.backward = std::move(backward);
  return push(std::move(n));
}

std::span<const double> Graph::value(ValueId id) const {
  const Node& n = nodes_[static_cast<size_t>(id)];
  return {n.val.data(), n.val.size()};
}

double Graph::scalar(ValueId id) const {
  const Node& n = nodes_[static_cast<size_t>(id)];
  if (n.val.size() != 1) throw_invalid("scalar: node is not a scalar");
  return n.val[0];
}

size_t Graph::rows(ValueId id) const { return nodes_[static_cast<size_t>(id)].rows; }
size_t Graph::cols(ValueId id) const { return nodes_[static_cast<size_t>(id)].cols; }

void Graph::backward(ValueId loss, double seed) {
  Node& ln = nodes_[static_cast<size_t>(loss)];
  if (ln.val.size() != 1) throw_invalid("backward: loss must be a scalar");
  grad_of(loss)[0] += seed;
  for (int id = loss; id >= 0; --id) {
    if (nodes_[static_cast<size_t>(id)].grad.empty()) continue;
    backward_node(id);
  }
}

void Graph::backward_node(int id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  const double* g = n.grad.data();
  switch (n.op) {
    case kParam: {
      n.param->ensure_grad();
      for (size_t i = 0; i < n.val.size(); ++i) n.param->grad[i] += g[i];
      break;
    }
    case kConst:
      break;
    case kLinearRows: {
      const Node& nx = nodes_[static_cast<size_t>(n.a)];
      const Node& nw = nodes_[static_cast<size_t>(n.b)];
      double* gx = grad_of(n.a);
      double* gw = grad_of(n.b);
      double* gb = grad_of(n.c);
      size_t in = nx.cols, out = n.cols;
      for (size_t r = 0; r < n.rows; ++r) {
        const double* gr = g + r * out;
        const double* xr = nx.val.data() + r * in;
        double* gxr = gx + r * in;
        for (size_t o = 0; o < out; ++o) {
          double go = gr[o];
          if (go == 0.0) continue;
          gb[o] += go;
          const double* wrow = nw.val.data() + o * in;
          double* gwrow = gw + o * in;
          for (size_t i = 0; i < in; ++i) {
            gxr[i] += go * wrow[i];
            gwrow[i] += go * xr[i];
          }
        }
      }
      break;
    }
    case kRelu: {
      const Node& na = nodes_[static_cast<size_t>(n.a)];
      double* ga = grad_of(n.a);
      for (size_t i = 0; i < n.val.size(); ++i)
        if (na.val[i] > 0.0) ga[i] += g[i];
      break;
    }
    case kMulMask: {
      double* ga = grad_of(n.a);
      for (size_t i = 0; i < n.val.size(); ++i) ga[i] += g[i] * n.aux[i];
      break;
    }
    case kLayerNormRows: {
      const Node& nz = nodes_[static_cast<size_t>(n.a)];
      const Node& ng = nodes_[static_cast<size_t>(n.b)];
      double* gz = grad_of(n.a);
      double* ggain = grad_of(n.b);
      double* gshift = grad_of(n.c);
      size_t m = n.cols;
      std::vector<double> dxhat(m);
      for (size_t r = 0; r < n.rows; ++r) {
        const double* zr = nz.val.data() + r * m;
        const double* gr = g + r * m;
        double mu = n.aux[2 * r];
        double istd = n.aux[2 * r + 1];
        double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
        for (size_t i = 0; i < m; ++i) {
          double xhat = (zr[i] - mu) * istd;
          dxhat[i] = gr[i] * ng.val[i];
          ggain[i] += gr[i] * xhat;
          gshift[i] += gr[i];
          mean_dxhat += dxhat[i];
          mean_dxhat_xhat += dxhat[i] * xhat;
        }
        mean_dxhat /= static_cast<double>(m);
        mean_dxhat_xhat /= static_cast<double>(m);
        double* gzr = gz + r * m;
        for (size_t i = 0; i < m; ++i) {
          double xhat = (zr[i] - mu) * istd;
          gzr[i] += istd * (dxhat[i] - mean_dxhat - xhat * mean_dxhat_xhat);
        }
      }
      break;
    }
    case kAdd: {
      double* ga = grad_of(n.a);
      double* gb = grad_of(n.b);
      for (size_t i = 0; i < n.val.size(); ++i) {
        ga[i] += g[i];
        gb[i] += g[i];
      }
      break;
    }
    case kConcatCols: {
      for (size_t p = 0; p < n.operands.size(); ++p) {
        const Node& np = nodes_[static_cast<size_t>(n.operands[p])];
        double* gp = grad_of(n.operands[p]);
        size_t off = static_cast<size_t>(n.offsets[p]);
        for (size_t r = 0; r < n.rows; ++r) {
          double* dst = gp + (np.rows == 1 ? 0 : r * np.cols);
          const double* src = g + r * n.cols + off;
          for (size_t i = 0; i < np.cols; ++i) dst[i] += src[i];
        }
      }
      break;
    }
    case kEmbedRows: {
      double* gt = grad_of(n.a);
      for (size_t r = 0; r < n.rows; ++r) {
        const double* gr = g + r * n.cols;
        for (int k = n.offsets[r]; k < n.offsets[r + 1]; ++k) {
          double* dst = gt + static_cast<size_t>(n.ids[static_cast<size_t>(k)]) * n.cols;
          for (size_t i = 0; i < n.cols; ++i) dst[i] += gr[i];
        }
      }
      break;
    }
    case kMatmul: {
      const Node& na = nodes_[static_cast<size_t>(n.a)];
      const Node& nb = nodes_[static_cast<size_t>(n.b)];
      double* ga = grad_of(n.a);
      double* gb = grad_of(n.b);
      for (size_t r = 0; r < n.rows; ++r)
        for (size_t m = 0; m < na.cols; ++m) {
          const double* brow = nb.val.data() + m * nb.cols;
          const double* gr = g + r * n.cols;
          double acc = 0.0;
          for (size_t c = 0; c < n.cols; ++c) acc += gr[c] * brow[c];
          ga[r * na.cols + m] += acc;
          double av = na.val[r * na.cols + m];
          if (av != 0.0) {
            double* gbrow = gb + m * nb.cols;
            for (size_t c = 0; c < n.cols; ++c) gbrow[c] += av * gr[c];
          }
        }
      break;
    }
    case kMatmulNT: {
      const Node& na = nodes_[static_cast<size_t>(n.a)];
      const Node& nb = nodes_[static_cast<size_t>(n.b)];
      double* ga = grad_of(n.a);
      double* gb = grad_of(n.b);
      size_t h = na.cols;
      for (size_t r = 0; r < n.rows; ++r)
        for (size_t c = 0; c < n.cols; ++c) {
          double gv = g[r * n.cols + c];
          if (gv == 0.0) continue;
          const double* ar = na.val.data() + r * h;
          const double* br = nb.val.data() + c * h;
          double* gar = ga + r * h;
          double* gbr = gb + c * h;
          for (size_t i = 0; i < h; ++i) {
            gar[i] += gv * br[i];
            gbr[i] += gv * ar[i];
          }
        }
      break;
    }
    case kScale: {
      double* ga = grad_of(n.a);
      for (size_t i = 0; i < n.val.size(); ++i) ga[i] += n.s0 * g[i];
      break;
    }
    case kSoftmaxRows: {
      double* ga = grad_of(n.a);
      for (size_t r = 0; r < n.rows; ++r) {
        const double* yr = n.val.data() + r * n.cols;
        const double* gr = g + r * n.cols;
        double dot = 0.0;
        for (size_t i = 0; i < n.cols; ++i) dot += gr[i] * yr[i];
        double* gar = ga + r * n.cols;
        for (size_t i = 0; i < n.cols; ++i) gar[i] += yr[i] * (gr[i] - dot);
      }
      break;
    }
    case kRowDot: {
      const Node& na = nodes_[static_cast<size_t>(n.a)];
      const Node& nb = nodes_[static_cast<size_t>(n.b)];
      double* ga = grad_of(n.a);
      double* gb = grad_of(n.b);
      size_t h = na.cols;
      for (size_t r = 0; r < n.rows; ++r) {
        double gv = g[r];
        if (gv == 0.0) continue;
        const double* ar = na.val.data() + r * h;
        const double* br = nb.val.data() + (nb.rows == 1 ? 0 : r * h);
        double* gar = ga + r * h;
        double* gbr = gb + (nb.rows == 1 ? 0 : r * h);
        for (size_t i = 0; i < h; ++i) {
          gar[i] += gv * br[i];
          gbr[i] += gv * ar[i];
        }
      }
      break;
    }
    case kOnePlusMul: {
      const Node& na = nodes_[static_cast<size_t>(n.a)];
      const Node& nb = nodes_[static_cast<size_t>(n.b)];
      double* ga = grad_of(n.a);
      double* gb = grad_of(n.b);
      for (size_t i = 0; i < n.val.size(); ++i) {
        ga[i] += g[i] * nb.val[i];
        gb[i] += g[i] * (1.0 + na.val[i]);
      }
      break;
    }
    case kAxpby: {
      double* ga = grad_of(n.a);
      double* gb = grad_of(n.b);
      for (size_t i = 0; i < n.val.size(); ++i) {
        ga[i] += n.aux[0] * g[i];
        gb[i] += n.aux[1] * g[i];
      }
      break;
    }
    case kCustom: {
      if (n.backward) {
        CustomCtx ctx{this, id, {n.grad.data(), n.grad.size()}};
        n.backward(ctx);
      }
      break;
    }
    default:
      throw Error(Status::kInternal, "backward: unknown op");
  }
}

void Graph::reset() { nodes_.clear(); }

// ------------------------------------------------------------ grad checking

double grad_check(std::span<Tensor* const> params,
                  const std::function<double(bool)>& f, double eps) {
  for (Tensor* p : params) {
    p->ensure_grad();
    p->zero_grad();
  }
  f(true);
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (Tensor* p : params) analytic.push_back(p->grad);

  double worst = 0.0;
  for (size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    for (size_t i = 0; i < p.size(); ++i) {
      double saved = p.data[i];
      p.data[i] = saved + eps;
      double lp = f(false);
      p.data[i] = saved - eps;
      double lm = f(false);
      p.data[i] = saved;
      double g_fd = (lp - lm) / (2.0 * eps);
      double g_ad = analytic[k][i];
      if (!std::isfinite(g_fd) || !std::isfinite(g_ad))
        return std::numeric_limits<double>::infinity();
      double denom = std::max({1.0, std::fabs(g_ad), std::fabs(g_fd)});
      worst = std::max(worst, std::fabs(g_ad - g_fd) / denom);
    }
  }
  return worst;
}

void init_linear(Tensor& weights, Tensor& bias, Rng& rng) {
  size_t fan_out = weights.rows(), fan_in = weights.cols();
  double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& w : weights.data) w = rng.uniform(-a, a);
  std::fill(bias.data.begin(), bias.data.end(), 0.0);
}

void init_embedding(Tensor& table, Rng& rng) {
  for (double& v : table.data) v = rng.normal() * 0.01;
}

}  // namespace ltr

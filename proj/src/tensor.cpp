#include "ndgan/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace ndgan {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::shape: return "shape";
    case ErrorCode::domain: return "domain";
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::non_finite: return "non_finite";
    case ErrorCode::format: return "format";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)) {
  if (shape_.empty()) throw Error(ErrorCode::shape, "Tensor", "shape must have at least one axis");
  if (shape_size(shape_) != values.size()) {
    throw Error(ErrorCode::shape, "Tensor",
                "shape " + shape_to_string(shape_) + " does not hold " + std::to_string(values.size()) +
                    " values");
  }
  data_ = std::make_shared<const std::vector<double>>(std::move(values));
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  const std::size_t n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

std::size_t Tensor::cols() const noexcept {
  if (shape_.size() < 2) return shape_.empty() ? 0 : 1;
  return std::accumulate(shape_.begin() + 1, shape_.end(), std::size_t{1}, std::multiplies<>());
}

double Tensor::item() const {
  if (size() != 1) throw Error(ErrorCode::shape, "Tensor::item", "tensor " + shape_to_string(shape_) + " is not scalar");
  return (*data_)[0];
}

Tensor Tensor::detach() const {
  Tensor t = *this;
  t.tape_ = nullptr;
  t.node_ = kNoNode;
  return t;
}

// --- Tape -------------------------------------------------------------------

Tensor Tape::variable(const Tensor& value) {
  if (value.tape_ != nullptr) throw Error(ErrorCode::invalid_argument, "Tape::variable", "tensor already attached to a tape");
  Node n;
  n.size = value.size();
  n.shape = value.shape();
  n.leaf = true;
  nodes_.push_back(std::move(n));
  Tensor t = value;
  t.tape_ = this;
  t.node_ = nodes_.size() - 1;
  return t;
}

Tensor Tape::record(Shape shape, std::vector<double> values, std::span<const Tensor* const> inputs,
                    BackwardFn backward) {
  Node n;
  n.size = values.size();
  n.shape = shape;
  n.backward = std::move(backward);
  for (const Tensor* in : inputs) n.inputs.push_back(in->tape_ == this ? in->node_ : kNoNode);
  nodes_.push_back(std::move(n));
  Tensor t(std::move(shape), std::move(values));
  t.tape_ = this;
  t.node_ = nodes_.size() - 1;
  return t;
}

Gradients Tape::backward(const Tensor& output) const {
  if (output.tape_ != this || output.node_ >= nodes_.size()) {
    throw Error(ErrorCode::invalid_argument, "Tape::backward", "output is detached from this tape");
  }
  if (output.size() != 1) {
    throw Error(ErrorCode::shape, "Tape::backward",
                "output must be scalar, got " + shape_to_string(output.shape()));
  }
  std::vector<std::vector<double>> grads(output.node_ + 1);
  grads[output.node_] = {1.0};
  std::vector<std::vector<double>*> slots;
  for (std::size_t i = output.node_ + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    if (n.leaf || grads[i].empty()) continue;
    slots.assign(n.inputs.size(), nullptr);
    for (std::size_t k = 0; k < n.inputs.size(); ++k) {
      const NodeId id = n.inputs[k];
      if (id == kNoNode) continue;
      if (grads[id].empty()) grads[id].assign(nodes_[id].size, 0.0);
      slots[k] = &grads[id];
    }
    n.backward(grads[i], slots);
    if (i != output.node_) std::vector<double>().swap(grads[i]);
  }
  Gradients out;
  out.tape_ = this;
  for (std::size_t i = 0; i <= output.node_; ++i) {
    if (!nodes_[i].leaf) continue;
    std::vector<double> g = grads[i].empty() ? std::vector<double>(nodes_[i].size, 0.0) : std::move(grads[i]);
    out.grads_.emplace(i, Tensor(nodes_[i].shape, std::move(g)));
  }
  return out;
}

const Tensor& Gradients::of(const Tensor& leaf) const {
  if (leaf.tape() != tape_) throw Error(ErrorCode::invalid_argument, "Gradients::of", "tensor belongs to a different tape");
  auto it = grads_.find(leaf.node());
  if (it == grads_.end()) {
    throw Error(ErrorCode::invalid_argument, "Gradients::of", "tensor is not a leaf reached by this backward pass");
  }
  return it->second;
}

// --- operations ---------------------------------------------------------------

namespace {

using Values = std::vector<double>;
using Shared = std::shared_ptr<const Values>;

Tape* common_tape(const char* op, std::initializer_list<const Tensor*> inputs) {
  Tape* tape = nullptr;
  for (const Tensor* t : inputs) {
    if (!t->on_tape()) continue;
    if (tape != nullptr && tape != t->tape()) throw Error(ErrorCode::invalid_argument, op, "inputs attached to different tapes");
    tape = t->tape();
  }
  return tape;
}

Tensor emit(const char* op, Shape shape, Values values, std::initializer_list<const Tensor*> inputs,
            BackwardFn backward) {
  Tape* tape = common_tape(op, inputs);
  if (tape == nullptr) return Tensor(std::move(shape), std::move(values));
  std::vector<const Tensor*> in(inputs);
  return tape->record(std::move(shape), std::move(values), in, std::move(backward));
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw Error(ErrorCode::shape, op, "incompatible shapes " + shape_to_string(a.shape()) + " and " + shape_to_string(b.shape()));
}

void require_2d(const char* op, const Tensor& x) {
  if (x.rank() != 2) throw Error(ErrorCode::shape, op, "expected a 2D tensor, got " + shape_to_string(x.shape()));
}

// True when b is broadcast over a's leading axis; throws when neither rule applies.
bool broadcast_rule(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return false;
  if (a.rank() >= 2) {
    Shape tail(a.shape().begin() + 1, a.shape().end());
    Shape tail1 = tail;
    tail1.insert(tail1.begin(), 1);
    if (b.shape() == tail || b.shape() == tail1) return true;
  }
  shape_error(op, a, b);
}

template <class F, class DF>
Tensor unary(const char* op, const Tensor& x, F f, DF df) {
  Values out(x.size());
  auto xs = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xs[i]);
  if (!x.on_tape()) return Tensor(x.shape(), std::move(out));
  Shared xin = x.shared_storage();
  auto y = std::make_shared<const Values>(out);
  return emit(op, x.shape(), std::move(out), {&x}, [xin, y, df](std::span<const double> g, std::span<Values* const> gi) {
    if (!gi[0]) return;
    Values& dx = *gi[0];
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g[i] * df((*xin)[i], (*y)[i]);
  });
}

enum class Bin { add, sub, mul };

Tensor binary(const char* op, Bin kind, const Tensor& a, const Tensor& b) {
  const bool bc = broadcast_rule(op, a, b);
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  Values out(n);
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < n; ++i) {
    const double bi = bv[bc ? i % m : i];
    switch (kind) {
      case Bin::add: out[i] = av[i] + bi; break;
      case Bin::sub: out[i] = av[i] - bi; break;
      case Bin::mul: out[i] = av[i] * bi; break;
    }
  }
  Shared as = a.shared_storage();
  Shared bs = b.shared_storage();
  return emit(op, a.shape(), std::move(out), {&a, &b},
              [as, bs, bc, kind, n, m](std::span<const double> g, std::span<Values* const> gi) {
                for (std::size_t i = 0; i < n; ++i) {
                  const std::size_t j = bc ? i % m : i;
                  double da = g[i];
                  double db = g[i];
                  if (kind == Bin::sub) db = -g[i];
                  if (kind == Bin::mul) {
                    da = g[i] * (*bs)[j];
                    db = g[i] * (*as)[i];
                  }
                  if (gi[0]) (*gi[0])[i] += da;
                  if (gi[1]) (*gi[1])[j] += db;
                }
              });
}

// Row view of the last axis: (outer rows) x (last extent).
std::pair<std::size_t, std::size_t> last_axis_rows(const Tensor& x) {
  const std::size_t inner = x.shape().back();
  return {inner == 0 ? 0 : x.size() / inner, inner};
}

}  // namespace

const char* to_string(OpKind kind) {
  switch (kind) {
    case OpKind::matmul: return "matmul";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul: return "mul";
    case OpKind::relu: return "relu";
    case OpKind::leaky_relu: return "leaky_relu";
    case OpKind::tanh: return "tanh";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::exp: return "exp";
    case OpKind::log: return "log";
    case OpKind::softmax: return "softmax";
    case OpKind::log_softmax: return "log_softmax";
    case OpKind::reduce_mean: return "reduce_mean";
    case OpKind::reduce_sum: return "reduce_sum";
    case OpKind::l2_norm_squared: return "l2_norm_squared";
    case OpKind::concat: return "concat";
    case OpKind::gaussian_noise: return "gaussian_noise";
    case OpKind::transpose: return "transpose";
    case OpKind::scale: return "scale";
    case OpKind::clamp: return "clamp";
    case OpKind::slice_cols: return "slice_cols";
    case OpKind::gather: return "gather";
    case OpKind::weight_norm: return "weight_norm";
  }
  return "unknown";
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_2d("matmul", a);
  require_2d("matmul", b);
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) shape_error("matmul", a, b);
  Values out(m * n, 0.0);
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      const double* brow = bv.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  Shared as = a.shared_storage();
  Shared bs = b.shared_storage();
  return emit("matmul", {m, n}, std::move(out), {&a, &b},
              [as, bs, m, k, n](std::span<const double> g, std::span<Values* const> gi) {
                if (gi[0]) {
                  // dA = G B^T
                  Values& da = *gi[0];
                  for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                      double s = 0.0;
                      const double* brow = bs->data() + p * n;
                      const double* grow = g.data() + i * n;
                      for (std::size_t j = 0; j < n; ++j) s += grow[j] * brow[j];
                      da[i * k + p] += s;
                    }
                }
                if (gi[1]) {
                  // dB = A^T G
                  Values& db = *gi[1];
                  for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                      const double aip = (*as)[i * k + p];
                      double* drow = db.data() + p * n;
                      const double* grow = g.data() + i * n;
                      for (std::size_t j = 0; j < n; ++j) drow[j] += aip * grow[j];
                    }
                }
              });
}

Tensor add(const Tensor& a, const Tensor& b) { return binary("add", Bin::add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary("sub", Bin::sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary("mul", Bin::mul, a, b); }

Tensor relu(const Tensor& x) {
  return unary("relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
               [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& x, double slope) {
  return unary("leaky_relu", x, [slope](double v) { return v > 0.0 ? v : slope * v; },
               [slope](double v, double) { return v > 0.0 ? 1.0 : slope; });
}

Tensor tanh(const Tensor& x) {
  return unary("tanh", x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary("sigmoid", x,
               [](double v) {
                 if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
                 const double e = std::exp(v);
                 return e / (1.0 + e);
               },
               [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& x) {
  return unary("exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  auto xs = x.values();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0.0)) {
      throw Error(ErrorCode::domain, "log", "non-positive argument " + std::to_string(xs[i]) + " at index " + std::to_string(i));
    }
  }
  return unary("log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor softmax(const Tensor& x) {
  const auto [rows, width] = last_axis_rows(x);
  Values out(x.size());
  auto xs = x.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xs.data() + r * width;
    double* o = out.data() + r * width;
    const double mx = *std::max_element(in, in + width);
    double sum = 0.0;
    for (std::size_t j = 0; j < width; ++j) sum += (o[j] = std::exp(in[j] - mx));
    for (std::size_t j = 0; j < width; ++j) o[j] /= sum;
  }
  auto y = std::make_shared<const Values>(out);
  return emit("softmax", x.shape(), std::move(out), {&x},
              [y, rows, width](std::span<const double> g, std::span<Values* const> gi) {
                if (!gi[0]) return;
                for (std::size_t r = 0; r < rows; ++r) {
                  const double* yr = y->data() + r * width;
                  const double* gr = g.data() + r * width;
                  double dot = 0.0;
                  for (std::size_t j = 0; j < width; ++j) dot += gr[j] * yr[j];
                  for (std::size_t j = 0; j < width; ++j) (*gi[0])[r * width + j] += yr[j] * (gr[j] - dot);
                }
              });
}

Tensor log_softmax(const Tensor& x) {
  const auto [rows, width] = last_axis_rows(x);
  Values out(x.size());
  auto xs = x.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xs.data() + r * width;
    double* o = out.data() + r * width;
    const double mx = *std::max_element(in, in + width);
    double sum = 0.0;
    for (std::size_t j = 0; j < width; ++j) sum += std::exp(in[j] - mx);
    const double lse = mx + std::log(sum);
    for (std::size_t j = 0; j < width; ++j) o[j] = in[j] - lse;
  }
  auto y = std::make_shared<const Values>(out);
  return emit("log_softmax", x.shape(), std::move(out), {&x},
              [y, rows, width](std::span<const double> g, std::span<Values* const> gi) {
                if (!gi[0]) return;
                for (std::size_t r = 0; r < rows; ++r) {
                  const double* gr = g.data() + r * width;
                  double gsum = 0.0;
                  for (std::size_t j = 0; j < width; ++j) gsum += gr[j];
                  for (std::size_t j = 0; j < width; ++j)
                    (*gi[0])[r * width + j] += gr[j] - std::exp((*y)[r * width + j]) * gsum;
                }
              });
}

namespace {

Tensor reduce(const char* op, const Tensor& x, Axis axis, bool mean) {
  const std::size_t rows = x.rows();
  const std::size_t cols = x.cols();
  Shape shape;
  Values out;
  double div = 1.0;
  switch (axis) {
    case Axis::all: {
      shape = {1};
      div = mean ? static_cast<double>(x.size()) : 1.0;
      double s = 0.0;
      for (double v : x.values()) s += v;
      out = {s / div};
      break;
    }
    case Axis::batch: {
      shape = {1, cols};
      div = mean ? static_cast<double>(rows) : 1.0;
      out.assign(cols, 0.0);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out[c] += x[r * cols + c];
      for (double& v : out) v /= div;
      break;
    }
    case Axis::last: {
      const auto [outer, width] = last_axis_rows(x);
      shape = {outer, 1};
      div = mean ? static_cast<double>(width) : 1.0;
      out.assign(outer, 0.0);
      for (std::size_t r = 0; r < outer; ++r) {
        for (std::size_t c = 0; c < width; ++c) out[r] += x[r * width + c];
        out[r] /= div;
      }
      break;
    }
  }
  if (mean && div == 0.0) throw Error(ErrorCode::shape, op, "mean over an empty axis");
  const std::size_t n = x.size();
  const std::size_t width = x.shape().back();
  return emit(op, std::move(shape), std::move(out), {&x},
              [axis, div, n, cols, width](std::span<const double> g, std::span<Values* const> gi) {
                if (!gi[0]) return;
                Values& dx = *gi[0];
                for (std::size_t i = 0; i < n; ++i) {
                  const double gv = axis == Axis::all ? g[0] : axis == Axis::batch ? g[i % cols] : g[i / width];
                  dx[i] += gv / div;
                }
              });
}

}  // namespace

Tensor reduce_sum(const Tensor& x, Axis axis) { return reduce("reduce_sum", x, axis, false); }
Tensor reduce_mean(const Tensor& x, Axis axis) { return reduce("reduce_mean", x, axis, true); }

Tensor l2_norm_squared(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v * v;
  Shared xs = x.shared_storage();
  return emit("l2_norm_squared", {1}, {s}, {&x}, [xs](std::span<const double> g, std::span<Values* const> gi) {
    if (!gi[0]) return;
    for (std::size_t i = 0; i < xs->size(); ++i) (*gi[0])[i] += 2.0 * (*xs)[i] * g[0];
  });
}

Tensor concat(const Tensor& a, const Tensor& b) {
  require_2d("concat", a);
  require_2d("concat", b);
  if (a.rows() != b.rows()) shape_error("concat", a, b);
  const std::size_t rows = a.rows(), p = a.cols(), q = b.cols();
  Values out(rows * (p + q));
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.values().data() + r * p, p, out.data() + r * (p + q));
    std::copy_n(b.values().data() + r * q, q, out.data() + r * (p + q) + p);
  }
  return emit("concat", {rows, p + q}, std::move(out), {&a, &b},
              [rows, p, q](std::span<const double> g, std::span<Values* const> gi) {
                for (std::size_t r = 0; r < rows; ++r) {
                  for (std::size_t j = 0; j < p; ++j)
                    if (gi[0]) (*gi[0])[r * p + j] += g[r * (p + q) + j];
                  for (std::size_t j = 0; j < q; ++j)
                    if (gi[1]) (*gi[1])[r * q + j] += g[r * (p + q) + p + j];
                }
              });
}

Tensor gaussian_noise(const Tensor& x, double std, Rng& rng) {
  if (!(std >= 0.0) || !std::isfinite(std)) throw Error(ErrorCode::invalid_argument, "gaussian_noise", "std must be finite and >= 0");
  Values out(x.values().begin(), x.values().end());
  if (std > 0.0) {
    std::normal_distribution<double> normal(0.0, std);
    for (double& v : out) v += normal(rng);
  }
  return emit("gaussian_noise", x.shape(), std::move(out), {&x}, [](std::span<const double> g, std::span<Values* const> gi) {
    if (!gi[0]) return;
    for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i];
  });
}

Tensor transpose(const Tensor& x) {
  require_2d("transpose", x);
  const std::size_t m = x.shape()[0], n = x.shape()[1];
  Values out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = x[i * n + j];
  return emit("transpose", {n, m}, std::move(out), {&x}, [m, n](std::span<const double> g, std::span<Values* const> gi) {
    if (!gi[0]) return;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) (*gi[0])[i * n + j] += g[j * m + i];
  });
}

Tensor scale(const Tensor& x, double factor) {
  return unary("scale", x, [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (!(lo <= hi)) throw Error(ErrorCode::invalid_argument, "clamp", "lo must not exceed hi");
  return unary("clamp", x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
               [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  require_2d("slice_cols", x);
  const std::size_t rows = x.rows(), cols = x.cols();
  if (begin >= end || end > cols) {
    throw Error(ErrorCode::shape, "slice_cols",
                "column range [" + std::to_string(begin) + ", " + std::to_string(end) + ") outside " + shape_to_string(x.shape()));
  }
  const std::size_t w = end - begin;
  Values out(rows * w);
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(x.values().data() + r * cols + begin, w, out.data() + r * w);
  return emit("slice_cols", {rows, w}, std::move(out), {&x},
              [rows, cols, begin, w](std::span<const double> g, std::span<Values* const> gi) {
                if (!gi[0]) return;
                for (std::size_t r = 0; r < rows; ++r)
                  for (std::size_t j = 0; j < w; ++j) (*gi[0])[r * cols + begin + j] += g[r * w + j];
              });
}

Tensor gather(const Tensor& x, std::span<const std::size_t> indices) {
  require_2d("gather", x);
  const std::size_t rows = x.rows(), cols = x.cols();
  if (indices.size() != rows) {
    throw Error(ErrorCode::shape, "gather",
                std::to_string(indices.size()) + " indices for " + shape_to_string(x.shape()));
  }
  Values out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    if (indices[r] >= cols) throw Error(ErrorCode::invalid_argument, "gather", "index " + std::to_string(indices[r]) + " out of range");
    out[r] = x[r * cols + indices[r]];
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return emit("gather", {rows, 1}, std::move(out), {&x},
              [idx = std::move(idx), cols](std::span<const double> g, std::span<Values* const> gi) {
                if (!gi[0]) return;
                for (std::size_t r = 0; r < idx.size(); ++r) (*gi[0])[r * cols + idx[r]] += g[r];
              });
}

Tensor weight_norm(const Tensor& direction, const Tensor& gain) {
  require_2d("weight_norm", direction);
  const std::size_t out_dim = direction.shape()[0], in_dim = direction.shape()[1];
  if (gain.size() != out_dim) shape_error("weight_norm", direction, gain);
  auto v = direction.values();
  auto norms = std::make_shared<Values>(out_dim);
  Values out(out_dim * in_dim);
  for (std::size_t i = 0; i < out_dim; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < in_dim; ++j) s += v[i * in_dim + j] * v[i * in_dim + j];
    const double nrm = std::sqrt(s);
    if (!(nrm > 0.0)) throw Error(ErrorCode::domain, "weight_norm", "direction row " + std::to_string(i) + " has zero norm");
    (*norms)[i] = nrm;
    for (std::size_t j = 0; j < in_dim; ++j) out[i * in_dim + j] = gain[i] * (v[i * in_dim + j] / nrm);
  }
  Shared vs = direction.shared_storage();
  Shared gs = gain.shared_storage();
  return emit("weight_norm", direction.shape(), std::move(out), {&direction, &gain},
              [vs, gs, norms, out_dim, in_dim](std::span<const double> g, std::span<Values* const> gi) {
                for (std::size_t i = 0; i < out_dim; ++i) {
                  const double nrm = (*norms)[i];
                  const double* vr = vs->data() + i * in_dim;
                  const double* gr = g.data() + i * in_dim;
                  double dot = 0.0;
                  for (std::size_t j = 0; j < in_dim; ++j) dot += gr[j] * vr[j];
                  if (gi[1]) (*gi[1])[i] += dot / nrm;
                  if (gi[0]) {
                    const double gain_i = (*gs)[i];
                    for (std::size_t j = 0; j < in_dim; ++j)
                      (*gi[0])[i * in_dim + j] += gain_i / nrm * (gr[j] - dot * vr[j] / (nrm * nrm));
                  }
                }
              });
}

Tensor forward_op(OpKind kind, std::span<const Tensor> in, const OpAttrs& attrs) {
  const auto arity = [&](std::size_t n) {
    if (in.size() != n) {
      throw Error(ErrorCode::invalid_argument, to_string(kind),
                  "expects " + std::to_string(n) + " inputs, got " + std::to_string(in.size()));
    }
  };
  switch (kind) {
    case OpKind::matmul: arity(2); return matmul(in[0], in[1]);
    case OpKind::add: arity(2); return add(in[0], in[1]);
    case OpKind::sub: arity(2); return sub(in[0], in[1]);
    case OpKind::mul: arity(2); return mul(in[0], in[1]);
    case OpKind::relu: arity(1); return relu(in[0]);
    case OpKind::leaky_relu: arity(1); return leaky_relu(in[0], attrs.slope);
    case OpKind::tanh: arity(1); return tanh(in[0]);
    case OpKind::sigmoid: arity(1); return sigmoid(in[0]);
    case OpKind::exp: arity(1); return exp(in[0]);
    case OpKind::log: arity(1); return log(in[0]);
    case OpKind::softmax: arity(1); return softmax(in[0]);
    case OpKind::log_softmax: arity(1); return log_softmax(in[0]);
    case OpKind::reduce_mean: arity(1); return reduce_mean(in[0], attrs.axis);
    case OpKind::reduce_sum: arity(1); return reduce_sum(in[0], attrs.axis);
    case OpKind::l2_norm_squared: arity(1); return l2_norm_squared(in[0]);
    case OpKind::concat: arity(2); return concat(in[0], in[1]);
    case OpKind::gaussian_noise:
      arity(1);
      if (attrs.rng == nullptr) throw Error(ErrorCode::invalid_argument, "gaussian_noise", "no RNG supplied");
      return gaussian_noise(in[0], attrs.noise_std, *attrs.rng);
    case OpKind::transpose: arity(1); return transpose(in[0]);
    case OpKind::scale: arity(1); return scale(in[0], attrs.factor);
    case OpKind::clamp: arity(1); return clamp(in[0], attrs.lo, attrs.hi);
    case OpKind::slice_cols: arity(1); return slice_cols(in[0], attrs.begin, attrs.end);
    case OpKind::gather: arity(1); return gather(in[0], attrs.indices);
    case OpKind::weight_norm: arity(2); return weight_norm(in[0], in[1]);
  }
  throw Error(ErrorCode::invalid_argument, "forward_op", "unknown op kind");
}

}  // namespace ndgan

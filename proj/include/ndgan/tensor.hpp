#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ndgan/error.hpp"
#include "ndgan/rng.hpp"

namespace ndgan {

using Shape = std::vector<std::size_t>;
using NodeId = std::size_t;

inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

std::string shape_to_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

class Tape;

/// Dense row-major array of doubles. Values are immutable and shared between
/// copies; a tensor produced while one of its inputs was attached to a Tape
/// carries a handle to the node that recorded it.
class Tensor {
 public:
  Tensor() : Tensor(Shape{0}, {}) {}
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value) { return Tensor({1}, {value}); }
  static Tensor vector(std::vector<double> values);
  /// rows x cols matrix from row-major values.
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_->size(); }
  /// Leading extent; the batch axis for 2D data.
  std::size_t rows() const noexcept { return shape_.empty() ? 0 : shape_.front(); }
  /// Product of all trailing extents (feature width of a batch).
  std::size_t cols() const noexcept;

  std::span<const double> values() const noexcept { return {data_->data(), data_->size()}; }
  const std::vector<double>& storage() const noexcept { return *data_; }
  double operator[](std::size_t i) const { return (*data_)[i]; }
  double at(std::size_t r, std::size_t c) const { return (*data_)[r * cols() + c]; }
  std::span<const double> row(std::size_t r) const { return values().subspan(r * cols(), cols()); }
  double item() const;

  Tape* tape() const noexcept { return tape_; }
  NodeId node() const noexcept { return node_; }
  bool on_tape() const noexcept { return tape_ != nullptr; }
  /// Same values with the tape handle dropped.
  Tensor detach() const;

  std::shared_ptr<const std::vector<double>> shared_storage() const noexcept { return data_; }

 private:
  friend class Tape;
  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
  Tape* tape_ = nullptr;
  NodeId node_ = kNoNode;
};

/// Receives the gradient of the node output and accumulates into the input
/// gradient buffers. Entries of `grad_in` are null for constant inputs.
using BackwardFn =
    std::function<void(std::span<const double> grad_out, std::span<std::vector<double>* const> grad_in)>;

class Gradients {
 public:
  /// Gradient with respect to a leaf created by Tape::variable.
  const Tensor& of(const Tensor& leaf) const;
  bool contains(const Tensor& leaf) const { return grads_.count(leaf.node()) != 0; }
  std::size_t size() const noexcept { return grads_.size(); }

 private:
  friend class Tape;
  const Tape* tape_ = nullptr;
  std::unordered_map<NodeId, Tensor> grads_;
};

/// Records operations in execution order, which is a topological order of the
/// computation graph. Not copyable or movable: tensors refer to it by address.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers a leaf whose gradient backward() reports.
  Tensor variable(const Tensor& value);
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Reverse sweep from a scalar output. Fan-out gradients accumulate.
  Gradients backward(const Tensor& output) const;

  /// Appends a node. Inputs not attached to this tape are constants.
  Tensor record(Shape shape, std::vector<double> values, std::span<const Tensor* const> inputs,
                BackwardFn backward);

 private:
  struct Node {
    std::vector<NodeId> inputs;
    std::size_t size = 0;
    Shape shape;
    BackwardFn backward;  // empty for leaves
    bool leaf = false;
  };
  std::vector<Node> nodes_;
};

enum class Axis { all, batch, last };

enum class OpKind {
  matmul,
  add,
  sub,
  mul,
  relu,
  leaky_relu,
  tanh,
  sigmoid,
  exp,
  log,
  softmax,
  log_softmax,
  reduce_mean,
  reduce_sum,
  l2_norm_squared,
  concat,
  gaussian_noise,
  transpose,
  scale,
  clamp,
  slice_cols,
  gather,
  weight_norm,
};

const char* to_string(OpKind kind);

struct OpAttrs {
  double slope = 0.2;        // leaky_relu
  double noise_std = 0.0;    // gaussian_noise
  double factor = 1.0;       // scale
  double lo = 0.0;           // clamp
  double hi = 1.0;           // clamp
  Axis axis = Axis::all;     // reduce_mean / reduce_sum
  std::size_t begin = 0;     // slice_cols
  std::size_t end = 0;       // slice_cols
  std::vector<std::size_t> indices;  // gather: one column per row
  Rng* rng = nullptr;        // gaussian_noise
};

/// Generic entry point dispatching to the named operations below.
Tensor forward_op(OpKind kind, std::span<const Tensor> inputs, const OpAttrs& attrs = {});

/// 2D product (m x k)(k x n).
Tensor matmul(const Tensor& a, const Tensor& b);
/// `b` either matches `a` or matches `a` without its leading batch axis
/// (optionally with a leading extent of 1) and is broadcast over it.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope = 0.2);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
/// Raises ErrorCode::domain on any non-positive entry.
Tensor log(const Tensor& x);
Tensor softmax(const Tensor& x);
Tensor log_softmax(const Tensor& x);
/// Axis::all gives shape {1}; Axis::batch keeps {1, cols}; Axis::last gives {rows, 1}.
Tensor reduce_sum(const Tensor& x, Axis axis = Axis::all);
Tensor reduce_mean(const Tensor& x, Axis axis = Axis::all);
Tensor l2_norm_squared(const Tensor& x);
Tensor concat(const Tensor& a, const Tensor& b);
/// Adds i.i.d. N(0, std^2) draws; the draws are constants for differentiation.
Tensor gaussian_noise(const Tensor& x, double std, Rng& rng);
Tensor transpose(const Tensor& x);
Tensor scale(const Tensor& x, double factor);
/// Gradient passes only where lo <= x <= hi.
Tensor clamp(const Tensor& x, double lo, double hi);
/// Columns [begin, end) of a 2D tensor.
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
/// Picks x[r, indices[r]] for every row; result is rows x 1.
Tensor gather(const Tensor& x, std::span<const std::size_t> indices);
/// Row-wise weight normalization: W[i] = gain[i] * V[i] / ||V[i]||.
Tensor weight_norm(const Tensor& direction, const Tensor& gain);

}  // namespace ndgan

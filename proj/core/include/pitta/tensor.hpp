#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "pitta/errors.hpp"

namespace pitta {

#ifdef PITTA_REAL_DOUBLE
using Real = double;
#else
using Real = float;
#endif

struct Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

int numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

/// Dense row-major tensor. Images are H x W x C with the channel fastest,
/// depth maps and masks are H x W, conv kernels are k x k x Cin x Cout.
struct Tensor {
  std::vector<int> shape;
  std::vector<Real> data;
  std::vector<Real> grad;  ///< empty until a backward pass materializes it
  bool requires_grad = false;
  int producer = -1;  ///< index of the tape node that produced this tensor, -1 for leaves
  std::string name;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    data.assign(static_cast<size_t>(pitta::numel(shape)), Real(0));
  }

  int numel() const { return static_cast<int>(data.size()); }
  int ndim() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }

  Real& at(int i) { return data[static_cast<size_t>(i)]; }
  const Real& at(int i) const { return data[static_cast<size_t>(i)]; }
  Real& at(int r, int c) { return data[static_cast<size_t>(r * shape[1] + c)]; }
  const Real& at(int r, int c) const { return data[static_cast<size_t>(r * shape[1] + c)]; }
  Real& at(int r, int c, int ch) {
    return data[static_cast<size_t>((r * shape[1] + c) * shape[2] + ch)];
  }
  const Real& at(int r, int c, int ch) const {
    return data[static_cast<size_t>((r * shape[1] + c) * shape[2] + ch)];
  }

  /// Allocates (and zeroes) the gradient buffer if absent.
  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), Real(0));
  }
  bool has_grad() const { return !grad.empty(); }
  void reset_grad() { grad.clear(); }

  bool all_finite() const;

  static TensorPtr zeros(std::vector<int> s) { return std::make_shared<Tensor>(std::move(s)); }
  static TensorPtr full(std::vector<int> s, Real v);
  static TensorPtr scalar(Real v) { return full({1}, v); }
  static TensorPtr from_values(std::vector<int> s, std::vector<Real> v);
};

/// True when a backward pass has a gradient to deliver to t: either t is an
/// adaptable leaf or it was produced by a recorded op.
inline bool wants_grad(const Tensor& t) { return t.requires_grad || t.producer >= 0; }
inline bool wants_grad(const TensorPtr& t) { return t && wants_grad(*t); }

enum class OpId {
  add,
  sub,
  mul,
  scale,
  abs,
  relu,
  sigmoid,
  sum,
  conv2d,
  add_channel_bias,
  batch_norm,
  upsample_bilinear,
  shift_clamp,
  concat_channels,
  channel_mean,
  disparity_to_depth,
};

struct TapeNode {
  OpId op;
  std::vector<TensorPtr> inputs;
  TensorPtr output;
  std::function<void()> backward;  ///< reads output->grad, accumulates into inputs' grad
};

/// Append-only record of differentiable ops. Nodes are appended in forward
/// order, so iterating in reverse index order is a reverse topological
/// traversal of the computation DAG. Rebuilt per adaptation step.
class Tape {
 public:
  Tape() = default;
  explicit Tape(bool recording) : recording_(recording) {}

  bool recording() const { return recording_; }

  /// Appends a node and returns its index. No-op (returns -1) when recording
  /// is disabled.
  int record(OpId op, std::vector<TensorPtr> inputs, const TensorPtr& output,
             std::function<void()> backward);

  /// Reverse-mode sweep from a scalar root. Seeds d(root)/d(root) = 1 and
  /// visits nodes in strict reverse order; leaves with requires_grad end up
  /// holding d(root)/d(leaf). Throws InputError if root is not scalar.
  void backward(const TensorPtr& root);

  size_t size() const { return nodes_.size(); }
  const TapeNode& node(size_t i) const { return nodes_[i]; }
  void clear() { nodes_.clear(); }

 private:
  std::vector<TapeNode> nodes_;
  bool recording_ = true;
};

}  // namespace pitta

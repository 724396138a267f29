#include "pitta/tensor.hpp"

#include <cmath>
#include <sstream>

namespace pitta {

int numel(const std::vector<int>& shape) {
  int n = 1;
  for (int d : shape) {
    if (d < 0) throw InputError("negative dimension in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::ostringstream oss;
  oss << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) oss << "x";
    oss << shape[i];
  }
  oss << "]";
  return oss.str();
}

bool Tensor::all_finite() const {
  for (Real v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

TensorPtr Tensor::full(std::vector<int> s, Real v) {
  auto t = std::make_shared<Tensor>(std::move(s));
  std::fill(t->data.begin(), t->data.end(), v);
  return t;
}

TensorPtr Tensor::from_values(std::vector<int> s, std::vector<Real> v) {
  if (numel(s) != static_cast<int>(v.size())) {
    throw InputError("from_values: shape " + shape_str(s) + " does not match " +
                     std::to_string(v.size()) + " values");
  }
  auto t = std::make_shared<Tensor>();
  t->shape = std::move(s);
  t->data = std::move(v);
  return t;
}

int Tape::record(OpId op, std::vector<TensorPtr> inputs, const TensorPtr& output,
                 std::function<void()> backward) {
  if (!recording_) return -1;
  int idx = static_cast<int>(nodes_.size());
  output->producer = idx;
  nodes_.push_back(TapeNode{op, std::move(inputs), output, std::move(backward)});
  return idx;
}

void Tape::backward(const TensorPtr& root) {
  if (!root) throw InputError("backward: null root");
  if (root->numel() != 1) {
    throw InputError("backward requires a scalar root, got shape " + shape_str(root->shape));
  }
  if (!recording_) throw InputError("backward on a non-recording tape");
  root->ensure_grad();
  root->grad[0] = Real(1);
  for (size_t i = nodes_.size(); i-- > 0;) {
    const TapeNode& n = nodes_[i];
    if (n.output->has_grad()) n.backward();
  }
}

}  // namespace pitta

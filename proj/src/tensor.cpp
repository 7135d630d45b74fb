#include "hanet/tensor.hpp"

#include <sstream>
#include <unordered_set>

#include "hanet/error.hpp"

namespace hanet {

const char* to_string(DataError::Code code) {
  switch (code) {
    case DataError::Code::kBadMagic: return "bad magic";
    case DataError::Code::kBadVersion: return "bad version";
    case DataError::Code::kTruncated: return "truncated payload";
    case DataError::Code::kTrailingData: return "trailing data";
    case DataError::Code::kDuplicateId: return "duplicate id";
    case DataError::Code::kInvalidHeader: return "invalid header";
    case DataError::Code::kIo: return "io error";
    case DataError::Code::kInvalidRecord: return "invalid record";
    case DataError::Code::kMissing: return "missing entry";
  }
  return "unknown";
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t extent : shape) n *= extent;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << ", ";
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace {
thread_local bool grad_enabled = true;

void check_shape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor: rank must be at least 1");
  for (std::size_t extent : shape) {
    if (extent == 0) {
      throw ShapeError("tensor: extents must be positive, got " +
                       shape_str(shape));
    }
  }
}
}  // namespace

bool GradMode::enabled() { return grad_enabled; }
void GradMode::set_enabled(bool enabled) { grad_enabled = enabled; }

template <typename Dtype>
Tensor<Dtype>::Tensor(Shape shape, bool requires_grad)
    : node_(std::make_shared<NodeType>()) {
  check_shape(shape);
  node_->data.assign(shape_numel(shape), Dtype(0));
  node_->shape = std::move(shape);
  node_->requires_grad = requires_grad;
}

template <typename Dtype>
Tensor<Dtype>::Tensor(Shape shape, std::vector<Dtype> values,
                      bool requires_grad)
    : node_(std::make_shared<NodeType>()) {
  check_shape(shape);
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("tensor: shape " + shape_str(shape) + " needs " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  node_->shape = std::move(shape);
  node_->data = std::move(values);
  node_->requires_grad = requires_grad;
}

template <typename Dtype>
Tensor<Dtype> Tensor<Dtype>::scalar(Dtype value) {
  return Tensor(Shape{1}, std::vector<Dtype>{value});
}

template <typename Dtype>
Tensor<Dtype> Tensor<Dtype>::full(Shape shape, Dtype value) {
  Tensor t(std::move(shape));
  std::fill(t.node_->data.begin(), t.node_->data.end(), value);
  return t;
}

template <typename Dtype>
Tensor<Dtype> Tensor<Dtype>::make_result(Shape shape, std::vector<Dtype> values,
                                         const std::vector<Tensor>& parents,
                                         BackwardFn backward, const char* op) {
  Tensor out(std::move(shape), std::move(values));
  out.node_->op = op;
  if (!GradMode::enabled()) return out;
  bool tracked = false;
  for (const Tensor& p : parents) tracked = tracked || p.requires_grad();
  if (!tracked) return out;
  out.node_->requires_grad = true;
  out.node_->parents.reserve(parents.size());
  for (const Tensor& p : parents) out.node_->parents.push_back(p.node_);
  out.node_->backward_fn = std::move(backward);
  return out;
}

template <typename Dtype>
typename Tensor<Dtype>::NodeType& Tensor<Dtype>::node() const {
  if (!node_) throw ShapeError("tensor: use of an undefined tensor");
  return *node_;
}

template <typename Dtype>
const Shape& Tensor<Dtype>::shape() const {
  return node().shape;
}

template <typename Dtype>
std::size_t Tensor<Dtype>::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) {
    throw ShapeError("tensor: axis " + std::to_string(axis) +
                     " out of range for shape " + shape_str(s));
  }
  return s[axis];
}

template <typename Dtype>
Dtype Tensor<Dtype>::item() const {
  if (numel() != 1) {
    throw ShapeError("item: tensor of shape " + shape_str(shape()) +
                     " is not a scalar");
  }
  return node().data[0];
}

template <typename Dtype>
Dtype Tensor<Dtype>::at(std::size_t row, std::size_t col) const {
  if (rank() != 2) throw ShapeError("at(row, col): tensor is not 2-D");
  return node().data.at(row * shape()[1] + col);
}

template <typename Dtype>
void Tensor<Dtype>::set_requires_grad(bool flag) {
  if (!node().is_leaf()) {
    throw ShapeError("set_requires_grad: only leaf tensors can be toggled");
  }
  node().requires_grad = flag;
}

template <typename Dtype>
std::span<Dtype> Tensor<Dtype>::mutable_grad() {
  node().ensure_grad();
  return node().grad;
}

template <typename Dtype>
void Tensor<Dtype>::zero_grad() {
  node().grad.assign(node().data.size(), Dtype(0));
}

template <typename Dtype>
void Tensor<Dtype>::backward() const {
  NodeType& root = node();
  if (root.data.size() != 1) {
    throw ShapeError("backward: loss must be a scalar, got shape " +
                     shape_str(root.shape));
  }
  if (!root.requires_grad) {
    throw ShapeError("backward: loss does not depend on any tracked tensor");
  }

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<NodeType*> order;
  std::unordered_set<NodeType*> visited;
  std::vector<std::pair<NodeType*, std::size_t>> stack;
  stack.emplace_back(&root, 0);
  visited.insert(&root);
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      NodeType* p = n->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  for (NodeType* n : order) {
    if (n->is_leaf()) {
      n->ensure_grad();
    } else {
      n->grad.assign(n->data.size(), Dtype(0));
    }
  }
  root.grad[0] += Dtype(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    NodeType* n = *it;
    if (!n->is_leaf()) n->backward_fn(*n);
  }
}

template <typename Dtype>
Tensor<Dtype> Tensor<Dtype>::detach() const {
  return Tensor(shape(), node().data);
}

template <typename Dtype>
Tensor<Dtype> Tensor<Dtype>::clone() const {
  Tensor t(shape(), node().data, node().is_leaf() && node().requires_grad);
  return t;
}

HANET_INSTANTIATE_CLASS(Tensor);

}  // namespace hanet

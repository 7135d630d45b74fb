#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace hanet {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

#define HANET_FOR_EACH_DTYPE(X) X(float) X(double)

#define HANET_INSTANTIATE_CLASS(classname) \
  template class classname<float>;         \
  template class classname<double>

namespace detail {

// One vertex of the autograd graph. Parents are owned so the graph stays
// alive as long as its output does; backward_fn only reads them through
// raw pointers.
template <typename Dtype>
struct Node {
  Shape shape;
  std::vector<Dtype> data;
  std::vector<Dtype> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;
  const char* op = "leaf";

  bool is_leaf() const { return !backward_fn; }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), Dtype(0));
  }
};

}  // namespace detail

// Gradient recording is on by default and is tracked per thread.
class GradMode {
 public:
  static bool enabled();
  static void set_enabled(bool enabled);
};

class NoGradGuard {
 public:
  NoGradGuard() : previous_(GradMode::enabled()) { GradMode::set_enabled(false); }
  ~NoGradGuard() { GradMode::set_enabled(previous_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Dense row-major tensor with an optional reverse-mode gradient slot.
// Copies share storage; use clone() for an independent copy.
template <typename Dtype>
class Tensor {
 public:
  using value_type = Dtype;
  using NodeType = detail::Node<Dtype>;
  using BackwardFn = std::function<void(NodeType&)>;

  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<Dtype> values, bool requires_grad = false);

  static Tensor scalar(Dtype value);
  static Tensor full(Shape shape, Dtype value);

  // Builds the output of a differentiable op. The backward function is kept
  // only when gradient recording is on and some parent requires a gradient.
  static Tensor make_result(Shape shape, std::vector<Dtype> values,
                            const std::vector<Tensor>& parents,
                            BackwardFn backward, const char* op);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return node().data.size(); }
  const char* op_name() const { return node().op; }

  std::span<const Dtype> values() const { return node().data; }
  std::span<Dtype> mutable_values() { return node().data; }
  Dtype item() const;
  Dtype at(std::size_t i) const { return node().data.at(i); }
  Dtype at(std::size_t row, std::size_t col) const;

  bool requires_grad() const { return node().requires_grad; }
  void set_requires_grad(bool flag);
  bool has_grad() const { return node().grad.size() == node().data.size(); }
  std::span<const Dtype> grad() const { return node().grad; }
  std::span<Dtype> mutable_grad();
  void zero_grad();

  // Accumulates d(this)/d(leaf) into every reachable leaf that requires a
  // gradient. Intermediate gradients are recomputed on every call.
  void backward() const;

  Tensor detach() const;
  Tensor clone() const;

  NodeType* raw() const { return node_.get(); }
  const std::shared_ptr<NodeType>& handle() const { return node_; }

 private:
  NodeType& node() const;

  std::shared_ptr<NodeType> node_;
};

}  // namespace hanet

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace flowvc::num {

using Shape = std::vector<std::size_t>;

/// Raised when a tensor contract is violated: shape mismatch, bad axis,
/// non-finite values, non-scalar loss.
class TensorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into parents' grads.
  std::function<void(Node&)> backward;

  bool is_leaf() const { return !backward; }
  std::vector<double>& grad_buffer();
};

}  // namespace detail

/// Dense double-precision tensor with reverse-mode gradient tracking.
///
/// A Tensor is a shared handle: copies alias the same storage and graph
/// node. Values are row-major. Operations build the graph as they run
/// (define-by-run), so a fresh graph exists per forward pass. Values are
/// immutable after construction except through `mutable_data()`, which is
/// reserved for initializers and optimizers acting on leaf parameters.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  /// 2-D tensor from nested rows; rows must be equally long.
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows,
                       bool requires_grad = false);
  static Tensor vector(std::initializer_list<double> values, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t ndim() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;
  /// Rows/cols of a 2-D tensor.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  std::vector<double> to_vector() const;
  double item() const;
  double at(std::size_t i) const;
  double at(std::size_t r, std::size_t c) const;

  bool requires_grad() const;
  /// Marks a leaf as trainable (or frozen). Throws on non-leaf tensors.
  void set_requires_grad(bool on);
  /// Accumulated gradient; all zeros when nothing reached this tensor.
  std::vector<double> grad() const;
  bool has_grad() const;
  void zero_grad();

  /// Same values, cut from the graph.
  Tensor detach() const;
  /// Deep copy of values into a fresh leaf.
  Tensor clone(bool requires_grad = false) const;

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  // Graph plumbing used by op implementations.
  using NodePtr = std::shared_ptr<detail::Node>;
  const NodePtr& node() const { return node_; }
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

 private:
  NodePtr node_;
  detail::Node& checked() const;
};

/// Runs reverse-mode accumulation from a scalar loss. Leaf tensors that
/// require grad accumulate into their grad buffers; intermediate buffers are
/// released once consumed.
void backward(const Tensor& loss);

void zero_grad(std::span<Tensor> params);

/// Disables graph recording on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

namespace detail {

/// Builds an op output. When any parent requires grad (and recording is on)
/// the node is wired into the graph with `backward`; otherwise it is a
/// detached constant. Throws TensorError if `value` holds NaN/Inf.
Tensor make_result(Shape shape, std::vector<double> value,
                   std::initializer_list<Tensor> parents,
                   std::function<void(Node&)> backward);
Tensor make_result(Shape shape, std::vector<double> value,
                   const std::vector<Tensor>& parents,
                   std::function<void(Node&)> backward);

void check_finite(std::span<const double> values, const char* where);

}  // namespace detail

}  // namespace flowvc::num

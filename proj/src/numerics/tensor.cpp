#include "flowvc/numerics/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace flowvc::num {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::vector<double>& detail::Node::grad_buffer() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad;
}

void detail::check_finite(std::span<const double> values, const char* where) {
  for (double v : values) {
    if (!std::isfinite(v)) throw TensorError(std::string("non-finite value produced by ") + where);
  }
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape.empty()) shape = {1};
  for (auto d : shape) {
    if (d == 0) throw TensorError("tensor extents must be positive, got " + shape_str(shape));
  }
  if (shape_numel(shape) != data.size()) {
    throw TensorError("data length " + std::to_string(data.size()) + " does not match shape " + shape_str(shape));
  }
  detail::check_finite(data, "Tensor::from");
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows, bool requires_grad) {
  if (rows.size() == 0) throw TensorError("matrix needs at least one row");
  const std::size_t cols = rows.begin()->size();
  std::vector<double> data;
  data.reserve(rows.size() * cols);
  for (const auto& row : rows) {
    if (row.size() != cols) throw TensorError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return from({rows.size(), cols}, std::move(data), requires_grad);
}

Tensor Tensor::vector(std::initializer_list<double> values, bool requires_grad) {
  return from({values.size()}, std::vector<double>(values), requires_grad);
}

detail::Node& Tensor::checked() const {
  if (!node_) throw TensorError("use of undefined tensor");
  return *node_;
}

const Shape& Tensor::shape() const { return checked().shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) throw TensorError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  return s[axis];
}

std::size_t Tensor::numel() const { return checked().value.size(); }

std::size_t Tensor::rows() const {
  if (ndim() != 2) throw TensorError("rows() on non-matrix " + shape_str(shape()));
  return shape()[0];
}

std::size_t Tensor::cols() const {
  if (ndim() != 2) throw TensorError("cols() on non-matrix " + shape_str(shape()));
  return shape()[1];
}

std::span<const double> Tensor::data() const { return checked().value; }
std::span<double> Tensor::mutable_data() { return checked().value; }
std::vector<double> Tensor::to_vector() const { return checked().value; }

double Tensor::item() const {
  if (numel() != 1) throw TensorError("item() on tensor of shape " + shape_str(shape()));
  return checked().value[0];
}

double Tensor::at(std::size_t i) const {
  const auto& v = checked().value;
  if (i >= v.size()) throw TensorError("flat index out of range");
  return v[i];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  if (r >= rows() || c >= cols()) throw TensorError("index out of range");
  return checked().value[r * cols() + c];
}

bool Tensor::requires_grad() const { return checked().requires_grad; }

void Tensor::set_requires_grad(bool on) {
  auto& n = checked();
  if (!n.is_leaf()) throw TensorError("requires_grad can only be toggled on leaf tensors");
  n.requires_grad = on;
  if (!on) n.grad.clear();
}

std::vector<double> Tensor::grad() const {
  const auto& n = checked();
  if (n.grad.empty()) return std::vector<double>(n.value.size(), 0.0);
  return n.grad;
}

bool Tensor::has_grad() const { return !checked().grad.empty(); }

void Tensor::zero_grad() { checked().grad.clear(); }

Tensor Tensor::detach() const {
  auto node = std::make_shared<detail::Node>();
  node->shape = shape();
  node->value = checked().value;
  return Tensor(std::move(node));
}

Tensor Tensor::clone(bool requires_grad) const {
  auto t = detach();
  t.node_->requires_grad = requires_grad;
  return t;
}

void zero_grad(std::span<Tensor> params) {
  for (auto& p : params) p.zero_grad();
}

void backward(const Tensor& loss) {
  if (!loss.defined()) throw TensorError("backward on undefined tensor");
  if (loss.numel() != 1) throw TensorError("backward requires a scalar loss, got " + shape_str(loss.shape()));
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order with each node once.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent->requires_grad && !visited.count(parent)) {
        visited.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->is_leaf()) continue;
    if (!node->grad.empty()) node->backward(*node);
    node->grad.clear();
    node->grad.shrink_to_fit();
  }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

namespace detail {

Tensor make_result(Shape shape, std::vector<double> value, const std::vector<Tensor>& parents,
                   std::function<void(Node&)> backward) {
  check_finite(value, "tensor op");
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  const bool track = g_grad_enabled && std::any_of(parents.begin(), parents.end(),
                                                   [](const Tensor& p) { return p.requires_grad(); });
  if (track) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (const auto& p : parents) node->parents.push_back(p.node());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

Tensor make_result(Shape shape, std::vector<double> value, std::initializer_list<Tensor> parents,
                   std::function<void(Node&)> backward) {
  return make_result(std::move(shape), std::move(value), std::vector<Tensor>(parents), std::move(backward));
}

}  // namespace detail

}  // namespace flowvc::num

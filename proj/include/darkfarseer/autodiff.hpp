#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace darkfarseer::ad {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TapeError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class OpKind {
  matmul,
  add,
  subtract,
  elementwise_multiply,
  sigmoid,
  relu,
  mean_over_axis,
  sum_over_axis,
  concat,
  slice,
  transpose,
  scalar_multiply,
  divide,
  exp,
  log,
  l2_norm,
  cosine_similarity,
  // Layout helpers used by the model code.
  reshape,
  gather_rows,
  scatter_rows,
};

std::string_view op_name(OpKind kind);

/// Static arguments for ops that need them. Fields not used by an op are ignored.
struct OpAttrs {
  std::size_t axis = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
  double scalar = 1.0;
  Shape shape;
  std::vector<std::size_t> indices;
  std::size_t rows = 0;
};

namespace detail {
struct Node;
}

/// Dense row-major tensor of doubles. Copies share storage; data of a tensor
/// attached to the tape is never modified after creation.
class Tensor {
 public:
  Tensor();

  static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor ones(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value, bool requires_grad = false);

  const Shape& shape() const;
  std::size_t size() const;
  std::size_t rank() const { return shape().size(); }
  std::span<const double> data() const;
  double item() const;
  double operator[](std::size_t flat) const { return data()[flat]; }

  bool requires_grad() const;
  bool is_leaf() const;

  /// Gradient written by the last backward() that reached this leaf.
  const std::vector<double>* grad() const;

  /// Writable storage; only permitted on leaves (parameters and constants).
  std::span<double> mutable_data();

  /// Same values, no tape history, no gradient requirement.
  Tensor detach() const;

  bool same_node(const Tensor& other) const { return node_ == other.node_; }
  const detail::Node* id() const { return node_.get(); }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node);
  std::shared_ptr<detail::Node> node_;

  friend Tensor apply(OpKind, std::span<const Tensor>, const OpAttrs&);
  friend class ComputationTape;
  friend class Gradients;
};

/// Evaluate a primitive. Records history when any input requires a gradient.
Tensor apply(OpKind kind, std::span<const Tensor> inputs, const OpAttrs& attrs = {});

/// Leaf gradients produced by backward(). Leaves the loss does not depend on
/// report zeros.
class Gradients {
 public:
  std::vector<double> of(const Tensor& leaf) const;
  bool contains(const Tensor& leaf) const;
  std::size_t size() const { return grads_.size(); }

 private:
  std::unordered_map<const detail::Node*, std::vector<double>> grads_;
  friend class ComputationTape;
};

/// Topologically ordered record of the primitive applications that produced
/// a loss. Built from the history attached to the loss tensor.
class ComputationTape {
 public:
  explicit ComputationTape(const Tensor& loss);

  std::size_t size() const { return entries_.size(); }

  /// True when every operand of entry k is a leaf or the output of an entry < k.
  bool is_topologically_ordered() const;

  /// Reverse sweep. Consumes the history: a second sweep over the same nodes
  /// raises TapeError.
  Gradients run();

 private:
  Tensor loss_;
  std::vector<std::shared_ptr<detail::Node>> entries_;
  std::vector<std::shared_ptr<detail::Node>> leaves_;
};

Gradients backward(const Tensor& loss);

using ScalarFunction = std::function<Tensor(std::span<const Tensor>)>;

/// Max over all input entries of |autodiff - central difference| /
/// max(1e-8, |central difference|).
double grad_check(const ScalarFunction& function, std::span<const Tensor> inputs, double step);

// Convenience wrappers over apply().
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor subtract(const Tensor& a, const Tensor& b);
Tensor multiply(const Tensor& a, const Tensor& b);
Tensor divide(const Tensor& a, const Tensor& b);
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor mean_over_axis(const Tensor& x, std::size_t axis);
Tensor sum_over_axis(const Tensor& x, std::size_t axis);
Tensor sum_all(const Tensor& x);
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);
Tensor transpose(const Tensor& x);
Tensor scale(const Tensor& x, double factor);
Tensor l2_norm(const Tensor& x);
Tensor cosine_similarity(const Tensor& a, const Tensor& b);
Tensor reshape(const Tensor& x, Shape shape);
Tensor gather_rows(const Tensor& x, std::vector<std::size_t> rows);
Tensor scatter_rows(const Tensor& x, std::vector<std::size_t> rows, std::size_t n_rows);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return subtract(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return multiply(a, b); }
inline Tensor operator*(double c, const Tensor& x) { return scale(x, c); }

inline constexpr double kCosineEps = 1e-12;

}  // namespace darkfarseer::ad

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "skillab/numkit/tensor.hpp"

namespace skillab::numkit {

/// Trainable tensor with its accumulated gradient. Copies receive a fresh id.
struct Parameter {
  Parameter();
  explicit Parameter(Tensor v);
  Parameter(const Parameter& other);
  Parameter& operator=(const Parameter& other);
  Parameter(Parameter&&) noexcept = default;
  Parameter& operator=(Parameter&&) noexcept = default;

  void zero_grad() { grad.fill(0.0); }

  Tensor value;
  Tensor grad;
  std::uint64_t id;
  bool trainable = true;
};

struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Pushes this node's grad into its parents' grads.
  std::function<void(Node&)> backward;
  Parameter* param = nullptr;

  Tensor& ensure_grad();
};

/**
 * Handle to a node of the reverse-mode graph. The graph is built afresh by
 * every forward pass and released when the last Var referencing it dies.
 * Parameters referenced by a live graph must outlive it.
 */
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Tensor& value() const { return node_->value; }
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }
  double item() const { return node_->value.item(); }
  bool requires_grad() const { return node_->requires_grad; }
  /// Gradient of the last backward pass; zeros if none reached this node.
  Tensor grad() const;
  const std::shared_ptr<Node>& node() const { return node_; }
  bool valid() const { return static_cast<bool>(node_); }

 private:
  std::shared_ptr<Node> node_;
};

Var constant(Tensor value);
Var constant(double value);
/// Leaf bound to a Parameter; non-trainable parameters yield constants.
Var leaf(Parameter& p);
/// Free leaf that records its own gradient (used for input sensitivities).
Var variable(Tensor value);

/// Reverse sweep from a 1x1 loss; accumulates into Parameter::grad.
void backward(const Var& loss);

// Elementwise binary ops with rank-2 broadcasting (each extent equal or 1).
Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);
Var operator+(const Var& a, double b);
Var operator+(double a, const Var& b);
Var operator-(const Var& a, double b);
Var operator-(double a, const Var& b);
Var operator*(const Var& a, double b);
Var operator*(double a, const Var& b);
Var operator/(const Var& a, double b);
Var operator/(double a, const Var& b);

Var exp(const Var& a);
Var log(const Var& a);
Var sqrt(const Var& a);
Var tanh(const Var& a);
Var sin(const Var& a);
Var cos(const Var& a);
Var abs(const Var& a);
Var square(const Var& a);
Var relu(const Var& a);
Var softplus(const Var& a);
Var sigmoid(const Var& a);
/// Saturating clamp; gradient passes only strictly inside (lo, hi).
Var clamp(const Var& a, double lo, double hi);

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var hcat(const Var& a, const Var& b);
Var hcat(const std::vector<Var>& parts);
Var slice_cols(const Var& a, std::size_t start, std::size_t count);
Var sum(const Var& a);
Var mean(const Var& a);
/// n x m -> n x 1
Var row_sums(const Var& a);
/// n x m -> 1 x m
Var col_sums(const Var& a);
/// Row-wise choice: mask entries (n x 1 or same shape) nonzero pick a, else b.
Var select(const Tensor& mask, const Var& a, const Var& b);
/// Elementwise 0/1 mask of a < b (values only, no gradient).
Tensor less(const Var& a, const Var& b);

// Scalar counterparts so templated numeric code can run on plain doubles.
inline double relu(double x) { return x > 0.0 ? x : 0.0; }
double softplus(double x);
double sigmoid(double x);
inline double square(double x) { return x * x; }
inline double clamp(double x, double lo, double hi) { return x < lo ? lo : (x > hi ? hi : x); }
inline double select(bool m, double a, double b) { return m ? a : b; }
inline bool less(double a, double b) { return a < b; }
/// Inverse of softplus, for initializing reparameterized positives.
double softplus_inverse(double y);

}  // namespace skillab::numkit

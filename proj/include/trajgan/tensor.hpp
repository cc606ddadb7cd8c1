#pragma once

// Dense 2-D tensors of doubles with a reverse-mode differentiation tape.
//
// Every op returns a fresh Tensor. When gradients are enabled and any input
// requires a gradient, the result records its parents and a backward closure;
// backward() topologically orders the reachable graph and runs the closures
// in reverse. Leaf gradients accumulate across calls until zero_grad().

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace trajgan {

struct Node;

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false);
  static Tensor full(std::size_t rows, std::size_t cols, double value, bool requires_grad = false);
  static Tensor from(std::size_t rows, std::size_t cols, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  std::size_t rows() const;
  std::size_t cols() const;
  std::size_t size() const;
  std::string shape_string() const;

  std::span<const double> values() const;
  // Direct write access, intended for parameters and optimizers.
  std::span<double> mutable_values();
  double at(std::size_t r, std::size_t c) const;
  double item() const;

  bool requires_grad() const;
  void set_requires_grad(bool on);
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  // Allocates (if needed) and zeroes the gradient buffer.
  void zero_grad();

  // Copy of the values with no history.
  Tensor detach() const;

  const std::shared_ptr<Node>& node() const noexcept { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;

  friend Tensor make_result(std::size_t, std::size_t, std::vector<double>,
                            std::vector<Tensor>, std::function<void(Node&)>);
};

struct Node {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this->grad and accumulates into parents' grads.
  std::function<void(Node&)> backward_fn;

  bool is_leaf() const noexcept { return parents.empty(); }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

// Builds an op result. `backward` is dropped when no parent needs a gradient
// or gradients are disabled.
Tensor make_result(std::size_t rows, std::size_t cols, std::vector<double> values,
                   std::vector<Tensor> parents, std::function<void(Node&)> backward);

// Gradient recording switch (thread-local).
bool grad_enabled() noexcept;

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// When enabled, every op result is scanned for NaN/Inf and throws NumericError.
void set_debug_validation(bool on) noexcept;
bool debug_validation() noexcept;

enum class ActivationKind { relu, leaky_relu, tanh, sigmoid, identity };

struct Activation {
  ActivationKind kind = ActivationKind::leaky_relu;
  double slope = 0.2;  // leaky_relu only
  bool operator==(const Activation&) const = default;
};

std::string to_string(ActivationKind kind);
ActivationKind activation_from_string(const std::string& name);

// ---- ops -------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
// `batches` independent products: a is [batches*m x k], b is [batches*k x n]
// (or [batches*n x k] with transpose_b). Result is [batches*m x n].
Tensor batched_matmul(const Tensor& a, const Tensor& b, std::size_t batches, bool transpose_b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);
// a [m x n] plus row vector [1 x n] broadcast down the rows.
Tensor add_row(const Tensor& a, const Tensor& row);
Tensor mul_row(const Tensor& a, const Tensor& row);

Tensor activate(const Tensor& x, Activation act);
Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);

Tensor log(const Tensor& x);
Tensor sqrt(const Tensor& x);
// Values below `lo` are lifted to `lo`; gradient is zero there.
Tensor clamp_min(const Tensor& x, double lo);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count);
// out.row(r) = x.row(index[r]); backward scatter-adds.
Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index);

Tensor softmax_rows(const Tensor& x);
// Per-row standardization (no affine part).
Tensor layer_norm_rows(const Tensor& x, double eps = 1e-5);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor row_sum(const Tensor& x);

// Elementwise max over row groups: output row g is the max of rows
// [offsets[g], offsets[g+1]). Empty groups produce a zero row. Gradient goes
// to the first maximal row.
Tensor group_max(const Tensor& x, std::span<const std::size_t> offsets);
// x is [k*n x 1] laid out sample-major (row s*n + i). Returns [n x 1] with
// the minimum over s for each i; gradient only reaches the argmin row.
Tensor sample_min(const Tensor& x, std::size_t k, std::vector<std::size_t>* argmin = nullptr);

// Populates gradients of every requires_grad tensor reachable from `loss`.
void backward(const Tensor& loss);

}  // namespace trajgan

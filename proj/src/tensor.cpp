#include "trajgan/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "trajgan/error.hpp"

namespace trajgan {

namespace {

thread_local bool g_grad_enabled = true;
bool g_debug_validation = false;

std::string shape_of(std::size_t r, std::size_t c) {
  return "[" + std::to_string(r) + "x" + std::to_string(c) + "]";
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                         b.shape_string());
  }
}

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw ContractError(std::string(op) + ": undefined tensor");
}

// Elementwise unary op with derivative expressed through input x and output y.
template <typename F, typename D>
Tensor unary(const Tensor& x, F f, D dfdx) {
  require_defined(x, "unary");
  const auto in = x.values();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  auto xn = x.node();
  return make_result(x.rows(), x.cols(), std::move(out), {x}, [xn, dfdx](Node& self) {
    if (!xn->requires_grad) return;
    xn->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      xn->grad[i] += self.grad[i] * dfdx(xn->value[i], self.value[i]);
    }
  });
}

}  // namespace

// ---- Tensor ----------------------------------------------------------------

Tensor Tensor::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
  return full(rows, cols, 0.0, requires_grad);
}

Tensor Tensor::full(std::size_t rows, std::size_t cols, double value, bool requires_grad) {
  return from(rows, cols, std::vector<double>(rows * cols, value), requires_grad);
}

Tensor Tensor::from(std::size_t rows, std::size_t cols, std::vector<double> values,
                    bool requires_grad) {
  if (rows == 0 || cols == 0) {
    throw DimensionError("tensor dimensions must be positive, got " + shape_of(rows, cols));
  }
  if (values.size() != rows * cols) {
    throw DimensionError("tensor " + shape_of(rows, cols) + " needs " +
                         std::to_string(rows * cols) + " values, got " +
                         std::to_string(values.size()));
  }
  auto node = std::make_shared<Node>();
  node->rows = rows;
  node->cols = cols;
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from(1, 1, {value}, requires_grad);
}

std::size_t Tensor::rows() const { return node_ ? node_->rows : 0; }
std::size_t Tensor::cols() const { return node_ ? node_->cols : 0; }
std::size_t Tensor::size() const { return node_ ? node_->value.size() : 0; }
std::string Tensor::shape_string() const { return shape_of(rows(), cols()); }

std::span<const double> Tensor::values() const {
  require_defined(*this, "values");
  return node_->value;
}

std::span<double> Tensor::mutable_values() {
  require_defined(*this, "mutable_values");
  return node_->value;
}

double Tensor::at(std::size_t r, std::size_t c) const {
  if (r >= rows() || c >= cols()) {
    throw DimensionError("index (" + std::to_string(r) + "," + std::to_string(c) +
                         ") out of range for " + shape_string());
  }
  return node_->value[r * node_->cols + c];
}

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() on non-scalar " + shape_string());
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool on) {
  require_defined(*this, "set_requires_grad");
  node_->requires_grad = on;
}

bool Tensor::has_grad() const { return node_ && node_->grad.size() == node_->value.size(); }

std::span<const double> Tensor::grad() const {
  require_defined(*this, "grad");
  return node_->grad;
}

std::span<double> Tensor::mutable_grad() {
  require_defined(*this, "grad");
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  require_defined(*this, "zero_grad");
  node_->grad.assign(node_->value.size(), 0.0);
}

Tensor Tensor::detach() const {
  require_defined(*this, "detach");
  return from(rows(), cols(), node_->value, false);
}

// ---- tape plumbing ---------------------------------------------------------

Tensor make_result(std::size_t rows, std::size_t cols, std::vector<double> values,
                   std::vector<Tensor> parents, std::function<void(Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->rows = rows;
  node->cols = cols;
  node->value = std::move(values);
  if (g_debug_validation) {
    for (double v : node->value) {
      if (!std::isfinite(v)) throw NumericError("non-finite value produced in " + shape_of(rows, cols) + " op result");
    }
  }
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& p : parents) needs = needs || p.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (const auto& p : parents) node->parents.push_back(p.node());
    node->backward_fn = std::move(backward);
  }
  return Tensor(std::move(node));
}

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

void set_debug_validation(bool on) noexcept { g_debug_validation = on; }
bool debug_validation() noexcept { return g_debug_validation; }

std::string to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::relu: return "relu";
    case ActivationKind::leaky_relu: return "leaky_relu";
    case ActivationKind::tanh: return "tanh";
    case ActivationKind::sigmoid: return "sigmoid";
    case ActivationKind::identity: return "identity";
  }
  return "unknown";
}

ActivationKind activation_from_string(const std::string& name) {
  if (name == "relu") return ActivationKind::relu;
  if (name == "leaky_relu" || name == "leakyrelu") return ActivationKind::leaky_relu;
  if (name == "tanh") return ActivationKind::tanh;
  if (name == "sigmoid") return ActivationKind::sigmoid;
  if (name == "identity") return ActivationKind::identity;
  throw ConfigError("unknown activation '" + name + "'");
}

// ---- linear algebra --------------------------------------------------------

namespace {

// c[m x n] += a[m x k] * b[k x n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// c[m x n] += a[m x k] * b^T, b stored [n x k]
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
      c[i * n + j] += acc;
    }
  }
}

// c[k x n] += a^T * b, a stored [m x k], b [m x n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    const double* bi = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      double* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += av * bi[j];
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions disagree " + a.shape_string() + " x " +
                         b.shape_string());
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n, 0.0);
  gemm_nn(a.values().data(), b.values().data(), out.data(), m, k, n);
  auto an = a.node(), bn = b.node();
  return make_result(m, n, std::move(out), {a, b}, [an, bn, m, k, n](Node& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      gemm_nt(self.grad.data(), bn->value.data(), an->grad.data(), m, n, k);
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      gemm_tn(an->value.data(), self.grad.data(), bn->grad.data(), m, k, n);
    }
  });
}

Tensor batched_matmul(const Tensor& a, const Tensor& b, std::size_t batches, bool transpose_b) {
  require_defined(a, "batched_matmul");
  require_defined(b, "batched_matmul");
  if (batches == 0 || a.rows() % batches != 0 || b.rows() % batches != 0) {
    throw DimensionError("batched_matmul: " + std::to_string(batches) + " batches do not divide " +
                         a.shape_string() + " and " + b.shape_string());
  }
  const std::size_t m = a.rows() / batches;
  const std::size_t k = a.cols();
  const std::size_t brows = b.rows() / batches;
  std::size_t n = 0;
  if (transpose_b) {
    if (b.cols() != k) {
      throw DimensionError("batched_matmul: inner dimensions disagree " + a.shape_string() +
                           " x " + b.shape_string() + "^T");
    }
    n = brows;
  } else {
    if (brows != k) {
      throw DimensionError("batched_matmul: inner dimensions disagree " + a.shape_string() +
                           " x " + b.shape_string());
    }
    n = b.cols();
  }
  std::vector<double> out(batches * m * n, 0.0);
  const double* av = a.values().data();
  const double* bv = b.values().data();
  const std::size_t bstride = brows * b.cols();
  for (std::size_t s = 0; s < batches; ++s) {
    if (transpose_b) {
      gemm_nt(av + s * m * k, bv + s * bstride, out.data() + s * m * n, m, k, n);
    } else {
      gemm_nn(av + s * m * k, bv + s * bstride, out.data() + s * m * n, m, k, n);
    }
  }
  auto an = a.node(), bn = b.node();
  return make_result(batches * m, n, std::move(out), {a, b},
                     [an, bn, batches, m, k, n, bstride, transpose_b](Node& self) {
                       const double* g = self.grad.data();
                       if (an->requires_grad) {
                         an->ensure_grad();
                         for (std::size_t s = 0; s < batches; ++s) {
                           const double* gs = g + s * m * n;
                           const double* bs = bn->value.data() + s * bstride;
                           double* as = an->grad.data() + s * m * k;
                           if (transpose_b) {
                             gemm_nn(gs, bs, as, m, n, k);  // dA = G * B, B is [n x k]
                           } else {
                             gemm_nt(gs, bs, as, m, n, k);  // dA = G * B^T
                           }
                         }
                       }
                       if (bn->requires_grad) {
                         bn->ensure_grad();
                         for (std::size_t s = 0; s < batches; ++s) {
                           const double* gs = g + s * m * n;
                           const double* as = an->value.data() + s * m * k;
                           double* bs = bn->grad.data() + s * bstride;
                           if (transpose_b) {
                             gemm_tn(gs, as, bs, m, n, k);  // dB = G^T * A
                           } else {
                             gemm_tn(as, gs, bs, m, k, n);  // dB = A^T * G
                           }
                         }
                       }
                     });
}

// ---- elementwise -----------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.values().begin(), a.values().end());
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  auto an = a.node(), bn = b.node();
  return make_result(a.rows(), a.cols(), std::move(out), {a, b}, [an, bn](Node& self) {
    for (auto* p : {an.get(), bn.get()}) {
      if (!p->requires_grad) continue;
      p->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.values().begin(), a.values().end());
  const auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  auto an = a.node(), bn = b.node();
  return make_result(a.rows(), a.cols(), std::move(out), {a, b}, [an, bn](Node& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  const auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  auto an = a.node(), bn = b.node();
  return make_result(a.rows(), a.cols(), std::move(out), {a, b}, [an, bn](Node& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * bn->value[i];
    }
    if (bn->requires_grad) {
      bn->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] += self.grad[i] * an->value[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(a, [factor](double x) { return factor * x; },
               [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double offset) {
  return unary(a, [offset](double x) { return x + offset; }, [](double, double) { return 1.0; });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  require_defined(a, "add_row");
  require_defined(row, "add_row");
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw DimensionError("add_row: " + row.shape_string() + " cannot broadcast onto " +
                         a.shape_string());
  }
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(a.values().begin(), a.values().end());
  const auto rv = row.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += rv[j];
  auto an = a.node(), rn = row.node();
  return make_result(m, n, std::move(out), {a, row}, [an, rn, m, n](Node& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
    }
    if (rn->requires_grad) {
      rn->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) rn->grad[j] += self.grad[i * n + j];
    }
  });
}

Tensor mul_row(const Tensor& a, const Tensor& row) {
  require_defined(a, "mul_row");
  require_defined(row, "mul_row");
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw DimensionError("mul_row: " + row.shape_string() + " cannot broadcast onto " +
                         a.shape_string());
  }
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(a.values().begin(), a.values().end());
  const auto rv = row.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] *= rv[j];
  auto an = a.node(), rn = row.node();
  return make_result(m, n, std::move(out), {a, row}, [an, rn, m, n](Node& self) {
    if (an->requires_grad) {
      an->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) an->grad[i * n + j] += self.grad[i * n + j] * rn->value[j];
    }
    if (rn->requires_grad) {
      rn->ensure_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) rn->grad[j] += self.grad[i * n + j] * an->value[i * n + j];
    }
  });
}

// ---- activations -----------------------------------------------------------

Tensor relu(const Tensor& x) { return leaky_relu(x, 0.0); }

// Subgradient at 0 is taken from the positive branch.
Tensor leaky_relu(const Tensor& x, double slope) {
  return unary(x, [slope](double v) { return v >= 0.0 ? v : slope * v; },
               [slope](double v, double) { return v >= 0.0 ? 1.0 : slope; });
}

Tensor tanh(const Tensor& x) {
  return unary(x, [](double v) { return std::tanh(v); },
               [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(x,
               [](double v) {
                 if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
                 const double e = std::exp(v);
                 return e / (1.0 + e);
               },
               [](double, double y) { return y * (1.0 - y); });
}

Tensor activate(const Tensor& x, Activation act) {
  switch (act.kind) {
    case ActivationKind::relu: return relu(x);
    case ActivationKind::leaky_relu:
      if (!(act.slope >= 0.0 && act.slope <= 1.0)) {
        throw ConfigError("leaky_relu slope must lie in [0, 1], got " + std::to_string(act.slope));
      }
      return leaky_relu(x, act.slope);
    case ActivationKind::tanh: return tanh(x);
    case ActivationKind::sigmoid: return sigmoid(x);
    case ActivationKind::identity: return x;
  }
  throw ConfigError("unknown activation kind");
}

Tensor log(const Tensor& x) {
  return unary(x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

// d/dx sqrt at 0 is taken as 0 so exact matches contribute no gradient.
Tensor sqrt(const Tensor& x) {
  return unary(x, [](double v) { return std::sqrt(v); },
               [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Tensor clamp_min(const Tensor& x, double lo) {
  return unary(x, [lo](double v) { return v < lo ? lo : v; },
               [lo](double v, double) { return v < lo ? 0.0 : 1.0; });
}

// ---- shape ops -------------------------------------------------------------

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat: no tensors");
  if (axis > 1) throw DimensionError("concat: axis must be 0 or 1");
  for (const auto& p : parts) require_defined(p, "concat");
  std::size_t rows = parts[0].rows(), cols = parts[0].cols();
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const bool ok = axis == 0 ? parts[i].cols() == cols : parts[i].rows() == rows;
    if (!ok) {
      throw DimensionError("concat: incompatible shapes " + parts[0].shape_string() + " and " +
                           parts[i].shape_string() + " on axis " + std::to_string(axis));
    }
    if (axis == 0) rows += parts[i].rows();
    else cols += parts[i].cols();
  }
  std::vector<double> out(rows * cols);
  std::vector<std::shared_ptr<Node>> nodes;
  nodes.reserve(parts.size());
  if (axis == 0) {
    std::size_t offset = 0;
    for (const auto& p : parts) {
      std::copy(p.values().begin(), p.values().end(), out.begin() + offset);
      offset += p.size();
      nodes.push_back(p.node());
    }
  } else {
    std::size_t col_offset = 0;
    for (const auto& p : parts) {
      const auto v = p.values();
      const std::size_t pc = p.cols();
      for (std::size_t r = 0; r < rows; ++r)
        std::copy(v.begin() + r * pc, v.begin() + (r + 1) * pc, out.begin() + r * cols + col_offset);
      col_offset += pc;
      nodes.push_back(p.node());
    }
  }
  return make_result(rows, cols, std::move(out), parts, [nodes, axis, cols](Node& self) {
    if (axis == 0) {
      std::size_t offset = 0;
      for (const auto& p : nodes) {
        const std::size_t len = p->value.size();
        if (p->requires_grad) {
          p->ensure_grad();
          for (std::size_t i = 0; i < len; ++i) p->grad[i] += self.grad[offset + i];
        }
        offset += len;
      }
    } else {
      std::size_t col_offset = 0;
      for (const auto& p : nodes) {
        const std::size_t pc = p->cols;
        if (p->requires_grad) {
          p->ensure_grad();
          for (std::size_t r = 0; r < p->rows; ++r)
            for (std::size_t c = 0; c < pc; ++c) p->grad[r * pc + c] += self.grad[r * cols + col_offset + c];
        }
        col_offset += pc;
      }
    }
  });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t count) {
  require_defined(x, "slice_rows");
  if (count == 0 || begin + count > x.rows()) {
    throw DimensionError("slice_rows: [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") out of range for " + x.shape_string());
  }
  const std::size_t n = x.cols();
  const auto v = x.values();
  std::vector<double> out(v.begin() + begin * n, v.begin() + (begin + count) * n);
  auto xn = x.node();
  return make_result(count, n, std::move(out), {x}, [xn, begin, n](Node& self) {
    xn->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) xn->grad[begin * n + i] += self.grad[i];
  });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t count) {
  require_defined(x, "slice_cols");
  if (count == 0 || begin + count > x.cols()) {
    throw DimensionError("slice_cols: [" + std::to_string(begin) + ", " +
                         std::to_string(begin + count) + ") out of range for " + x.shape_string());
  }
  const std::size_t m = x.rows(), n = x.cols();
  const auto v = x.values();
  std::vector<double> out(m * count);
  for (std::size_t r = 0; r < m; ++r)
    std::copy(v.begin() + r * n + begin, v.begin() + r * n + begin + count, out.begin() + r * count);
  auto xn = x.node();
  return make_result(m, count, std::move(out), {x}, [xn, begin, count, m, n](Node& self) {
    xn->ensure_grad();
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t c = 0; c < count; ++c) xn->grad[r * n + begin + c] += self.grad[r * count + c];
  });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> index) {
  require_defined(x, "gather_rows");
  if (index.empty()) throw DimensionError("gather_rows: empty index");
  const std::size_t n = x.cols();
  const auto v = x.values();
  std::vector<double> out(index.size() * n);
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= x.rows()) {
      throw DimensionError("gather_rows: row " + std::to_string(index[r]) + " out of range for " +
                           x.shape_string());
    }
    std::copy(v.begin() + index[r] * n, v.begin() + (index[r] + 1) * n, out.begin() + r * n);
  }
  auto xn = x.node();
  std::vector<std::size_t> idx(index.begin(), index.end());
  return make_result(index.size(), n, std::move(out), {x}, [xn, idx = std::move(idx), n](Node& self) {
    xn->ensure_grad();
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t c = 0; c < n; ++c) xn->grad[idx[r] * n + c] += self.grad[r * n + c];
  });
}

// ---- normalizations --------------------------------------------------------

Tensor softmax_rows(const Tensor& x) {
  require_defined(x, "softmax_rows");
  const std::size_t m = x.rows(), n = x.cols();
  const auto v = x.values();
  std::vector<double> out(m * n);
  for (std::size_t r = 0; r < m; ++r) {
    const double* in = v.data() + r * n;
    double* o = out.data() + r * n;
    const double mx = *std::max_element(in, in + n);
    double total = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      o[c] = std::exp(in[c] - mx);
      total += o[c];
    }
    for (std::size_t c = 0; c < n; ++c) o[c] /= total;
  }
  auto xn = x.node();
  return make_result(m, n, std::move(out), {x}, [xn, m, n](Node& self) {
    xn->ensure_grad();
    for (std::size_t r = 0; r < m; ++r) {
      const double* y = self.value.data() + r * n;
      const double* g = self.grad.data() + r * n;
      double dot = 0.0;
      for (std::size_t c = 0; c < n; ++c) dot += g[c] * y[c];
      for (std::size_t c = 0; c < n; ++c) xn->grad[r * n + c] += y[c] * (g[c] - dot);
    }
  });
}

Tensor layer_norm_rows(const Tensor& x, double eps) {
  require_defined(x, "layer_norm_rows");
  const std::size_t m = x.rows(), n = x.cols();
  const auto v = x.values();
  std::vector<double> out(m * n);
  std::vector<double> inv_std(m);
  for (std::size_t r = 0; r < m; ++r) {
    const double* in = v.data() + r * n;
    double mu = 0.0;
    for (std::size_t c = 0; c < n; ++c) mu += in[c];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t c = 0; c < n; ++c) var += (in[c] - mu) * (in[c] - mu);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] = (in[c] - mu) * inv_std[r];
  }
  auto xn = x.node();
  return make_result(m, n, std::move(out), {x}, [xn, m, n, inv_std = std::move(inv_std)](Node& self) {
    xn->ensure_grad();
    const double dn = static_cast<double>(n);
    for (std::size_t r = 0; r < m; ++r) {
      const double* y = self.value.data() + r * n;
      const double* g = self.grad.data() + r * n;
      double gsum = 0.0, gy = 0.0;
      for (std::size_t c = 0; c < n; ++c) {
        gsum += g[c];
        gy += g[c] * y[c];
      }
      for (std::size_t c = 0; c < n; ++c) {
        xn->grad[r * n + c] += inv_std[r] * (g[c] - gsum / dn - y[c] * gy / dn);
      }
    }
  });
}

// ---- reductions ------------------------------------------------------------

Tensor sum(const Tensor& x) {
  require_defined(x, "sum");
  double total = 0.0;
  for (double v : x.values()) total += v;
  auto xn = x.node();
  return make_result(1, 1, {total}, {x}, [xn](Node& self) {
    xn->ensure_grad();
    for (double& g : xn->grad) g += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor row_sum(const Tensor& x) {
  require_defined(x, "row_sum");
  const std::size_t m = x.rows(), n = x.cols();
  const auto v = x.values();
  std::vector<double> out(m, 0.0);
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) out[r] += v[r * n + c];
  auto xn = x.node();
  return make_result(m, 1, std::move(out), {x}, [xn, m, n](Node& self) {
    xn->ensure_grad();
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t c = 0; c < n; ++c) xn->grad[r * n + c] += self.grad[r];
  });
}

Tensor group_max(const Tensor& x, std::span<const std::size_t> offsets) {
  require_defined(x, "group_max");
  if (offsets.size() < 2 || offsets.front() != 0 || offsets.back() != x.rows()) {
    throw DimensionError("group_max: offsets must start at 0 and end at " + std::to_string(x.rows()));
  }
  const std::size_t groups = offsets.size() - 1;
  const std::size_t n = x.cols();
  const auto v = x.values();
  std::vector<double> out(groups * n, 0.0);
  std::vector<std::size_t> winner(groups * n, static_cast<std::size_t>(-1));
  for (std::size_t g = 0; g < groups; ++g) {
    if (offsets[g + 1] < offsets[g]) throw DimensionError("group_max: offsets must be non-decreasing");
    for (std::size_t r = offsets[g]; r < offsets[g + 1]; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        const double val = v[r * n + c];
        std::size_t& w = winner[g * n + c];
        if (w == static_cast<std::size_t>(-1) || val > out[g * n + c]) {
          out[g * n + c] = val;
          w = r;
        }
      }
    }
  }
  auto xn = x.node();
  return make_result(groups, n, std::move(out), {x}, [xn, n, winner = std::move(winner)](Node& self) {
    xn->ensure_grad();
    for (std::size_t i = 0; i < winner.size(); ++i) {
      if (winner[i] == static_cast<std::size_t>(-1)) continue;
      xn->grad[winner[i] * n + i % n] += self.grad[i];
    }
  });
}

Tensor sample_min(const Tensor& x, std::size_t k, std::vector<std::size_t>* argmin) {
  require_defined(x, "sample_min");
  if (k == 0 || x.cols() != 1 || x.rows() % k != 0) {
    throw DimensionError("sample_min: expected [k*n x 1] with k=" + std::to_string(k) + ", got " +
                         x.shape_string());
  }
  const std::size_t n = x.rows() / k;
  const auto v = x.values();
  std::vector<double> out(n);
  std::vector<std::size_t> best(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t b = 0;
    for (std::size_t s = 1; s < k; ++s) {
      if (v[s * n + i] < v[b * n + i]) b = s;
    }
    best[i] = b;
    out[i] = v[b * n + i];
  }
  if (argmin) *argmin = best;
  auto xn = x.node();
  return make_result(n, 1, std::move(out), {x}, [xn, n, best = std::move(best)](Node& self) {
    xn->ensure_grad();
    for (std::size_t i = 0; i < n; ++i) xn->grad[best[i] * n + i] += self.grad[i];
  });
}

// ---- backward --------------------------------------------------------------

void backward(const Tensor& loss) {
  require_defined(loss, "backward");
  if (loss.size() != 1) {
    throw ContractError("backward: loss must be a scalar, got " + loss.shape_string());
  }
  Node* root = loss.node().get();
  if (!root->requires_grad) return;
  if (root->is_leaf()) {
    root->ensure_grad();
    root->grad[0] += 1.0;
    return;
  }

  // Iterative post-order DFS gives a topological order (inputs first).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.push_back({parent, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Interior gradients are per-pass; leaves accumulate.
  for (Node* n : order) {
    if (!n->is_leaf()) n->grad.assign(n->value.size(), 0.0);
  }
  root->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward_fn) (*it)->backward_fn(**it);
  }
}

}  // namespace trajgan

#include "skillab/numkit/autodiff.hpp"

#include <atomic>
#include <cmath>
#include <unordered_set>

namespace skillab::numkit {

namespace {

std::atomic<std::uint64_t> g_next_parameter_id{1};

std::shared_ptr<Node> make_node(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return n;
}

bool any_requires_grad(std::initializer_list<const Var*> vars) {
  for (const Var* v : vars)
    if (v->requires_grad()) return true;
  return false;
}

// Index map for rank-2 broadcasting of two operands.
struct Broadcast {
  std::size_t rows, cols;
  std::size_t a_rows, a_cols, b_rows, b_cols;

  Broadcast(const Tensor& a, const Tensor& b, const char* op)
      : a_rows(a.rows()), a_cols(a.cols()), b_rows(b.rows()), b_cols(b.cols()) {
    auto extent = [&](std::size_t x, std::size_t y) {
      if (x == y || y == 1) return x;
      if (x == 1) return y;
      throw DimensionError(std::string(op) + ": cannot broadcast " + to_string(a.shape()) + " with " +
                           to_string(b.shape()));
    };
    rows = extent(a_rows, b_rows);
    cols = extent(a_cols, b_cols);
  }
  std::size_t ia(std::size_t i, std::size_t j) const {
    return (a_rows == 1 ? 0 : i) * a_cols + (a_cols == 1 ? 0 : j);
  }
  std::size_t ib(std::size_t i, std::size_t j) const {
    return (b_rows == 1 ? 0 : i) * b_cols + (b_cols == 1 ? 0 : j);
  }
};

// Elementwise binary op. `da`/`db` return d(out)/d(a), d(out)/d(b) given (a, b, out).
template <class F, class DA, class DB>
Var binary(const Var& a, const Var& b, const char* name, F f, DA da, DB db) {
  const Broadcast bc(a.value(), b.value(), name);
  Tensor out({bc.rows, bc.cols});
  const auto& av = a.value();
  const auto& bv = b.value();
  for (std::size_t i = 0; i < bc.rows; ++i)
    for (std::size_t j = 0; j < bc.cols; ++j) out(i, j) = f(av[bc.ia(i, j)], bv[bc.ib(i, j)]);
  auto node = make_node(std::move(out));
  if (any_requires_grad({&a, &b})) {
    node->requires_grad = true;
    node->parents = {a.node(), b.node()};
    node->backward = [bc, da, db](Node& self) {
      Node& na = *self.parents[0];
      Node& nb = *self.parents[1];
      const Tensor& g = self.grad;
      const Tensor& x = na.value;
      const Tensor& y = nb.value;
      if (na.requires_grad) {
        Tensor& ga = na.ensure_grad();
        for (std::size_t i = 0; i < bc.rows; ++i)
          for (std::size_t j = 0; j < bc.cols; ++j) {
            const std::size_t k = i * bc.cols + j;
            ga[bc.ia(i, j)] += g[k] * da(x[bc.ia(i, j)], y[bc.ib(i, j)], self.value[k]);
          }
      }
      if (nb.requires_grad) {
        Tensor& gb = nb.ensure_grad();
        for (std::size_t i = 0; i < bc.rows; ++i)
          for (std::size_t j = 0; j < bc.cols; ++j) {
            const std::size_t k = i * bc.cols + j;
            gb[bc.ib(i, j)] += g[k] * db(x[bc.ia(i, j)], y[bc.ib(i, j)], self.value[k]);
          }
      }
    };
  }
  return Var(std::move(node));
}

// Elementwise unary op. `d` returns d(out)/d(in) given (in, out).
template <class F, class D>
Var unary(const Var& a, F f, D d) {
  Tensor out(a.value().shape());
  const auto& av = a.value();
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = f(av[i]);
  auto node = make_node(std::move(out));
  if (a.requires_grad()) {
    node->requires_grad = true;
    node->parents = {a.node()};
    node->backward = [d](Node& self) {
      Node& na = *self.parents[0];
      Tensor& ga = na.ensure_grad();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i] * d(na.value[i], self.value[i]);
    };
  }
  return Var(std::move(node));
}

}  // namespace

Parameter::Parameter() : id(g_next_parameter_id++) {}

Parameter::Parameter(Tensor v) : value(std::move(v)), grad(value.shape()), id(g_next_parameter_id++) {}

Parameter::Parameter(const Parameter& other)
    : value(other.value), grad(other.grad), id(g_next_parameter_id++), trainable(other.trainable) {}

Parameter& Parameter::operator=(const Parameter& other) {
  if (this != &other) {
    value = other.value;
    grad = other.grad;
    trainable = other.trainable;
  }
  return *this;
}

Tensor& Node::ensure_grad() {
  if (!grad.same_shape(value)) grad = Tensor(value.shape());
  return grad;
}

Tensor Var::grad() const {
  if (node_->grad.same_shape(node_->value)) return node_->grad;
  return Tensor(node_->value.shape());
}

Var constant(Tensor value) { return Var(make_node(std::move(value))); }
Var constant(double value) { return constant(Tensor::scalar(value)); }

Var leaf(Parameter& p) {
  auto node = make_node(p.value);
  if (p.trainable) {
    node->requires_grad = true;
    node->param = &p;
  }
  return Var(std::move(node));
}

Var variable(Tensor value) {
  auto node = make_node(std::move(value));
  node->requires_grad = true;
  return Var(std::move(node));
}

void backward(const Var& loss) {
  if (!loss.valid() || loss.value().size() != 1 || loss.value().rank() != 2) {
    throw ContractError("backward: loss must be a 1x1 tensor, got " +
                        (loss.valid() ? to_string(loss.value().shape()) : std::string("<null>")));
  }
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
  visited.insert(loss.node().get());
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
  for (Node* n : order) n->ensure_grad().fill(0.0);
  loss.node()->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward) n->backward(*n);
    if (n->param != nullptr) n->param->grad += n->grad;
  }
}

Var operator+(const Var& a, const Var& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

Var operator-(const Var& a, const Var& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

Var operator*(const Var& a, const Var& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y, double) { return y; },
      [](double x, double, double) { return x; });
}

Var operator/(const Var& a, const Var& b) {
  return binary(
      a, b, "div", [](double x, double y) { return x / y; }, [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double out) { return -out / y; });
}

Var operator-(const Var& a) {
  return unary(a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Var operator+(const Var& a, double b) {
  return unary(a, [b](double x) { return x + b; }, [](double, double) { return 1.0; });
}
Var operator+(double a, const Var& b) { return b + a; }
Var operator-(const Var& a, double b) { return a + (-b); }
Var operator-(double a, const Var& b) {
  return unary(b, [a](double x) { return a - x; }, [](double, double) { return -1.0; });
}
Var operator*(const Var& a, double b) {
  return unary(a, [b](double x) { return x * b; }, [b](double, double) { return b; });
}
Var operator*(double a, const Var& b) { return b * a; }
Var operator/(const Var& a, double b) { return a * (1.0 / b); }
Var operator/(double a, const Var& b) {
  return unary(b, [a](double x) { return a / x; }, [](double x, double out) { return -out / x; });
}

Var exp(const Var& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double out) { return out; });
}

Var log(const Var& a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var sqrt(const Var& a) {
  return unary(a, [](double x) { return std::sqrt(x); }, [](double, double out) { return 0.5 / out; });
}

Var tanh(const Var& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double out) { return 1.0 - out * out; });
}

Var sin(const Var& a) {
  return unary(a, [](double x) { return std::sin(x); }, [](double x, double) { return std::cos(x); });
}

Var cos(const Var& a) {
  return unary(a, [](double x) { return std::cos(x); }, [](double x, double) { return -std::sin(x); });
}

Var abs(const Var& a) {
  return unary(
      a, [](double x) { return std::abs(x); }, [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var square(const Var& a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var relu(const Var& a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_inverse(double y) {
  if (!(y > 0.0)) throw ContractError("softplus_inverse: argument must be positive");
  return y > 30.0 ? y : std::log(std::expm1(y));
}

Var softplus(const Var& a) {
  return unary(
      a, [](double x) { return softplus(x); }, [](double x, double) { return sigmoid(x); });
}

Var sigmoid(const Var& a) {
  return unary(
      a, [](double x) { return sigmoid(x); }, [](double, double out) { return out * (1.0 - out); });
}

Var clamp(const Var& a, double lo, double hi) {
  return unary(
      a, [lo, hi](double x) { return clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Var matmul(const Var& a, const Var& b) {
  auto node = make_node(matmul(a.value(), b.value()));
  if (any_requires_grad({&a, &b})) {
    node->requires_grad = true;
    node->parents = {a.node(), b.node()};
    node->backward = [](Node& self) {
      Node& na = *self.parents[0];
      Node& nb = *self.parents[1];
      const std::size_t n = na.value.rows(), k = na.value.cols(), m = nb.value.cols();
      const double* g = self.grad.data().data();
      if (na.requires_grad) {
        // dA = G * B^T
        Tensor& ga = na.ensure_grad();
        const double* pb = nb.value.data().data();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double acc = 0.0;
            for (std::size_t j = 0; j < m; ++j) acc += g[i * m + j] * pb[p * m + j];
            ga[i * k + p] += acc;
          }
      }
      if (nb.requires_grad) {
        // dB = A^T * G
        Tensor& gb = nb.ensure_grad();
        const double* pa = na.value.data().data();
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            const double av = pa[i * k + p];
            if (av == 0.0) continue;
            double* row = gb.data().data() + p * m;
            for (std::size_t j = 0; j < m; ++j) row[j] += av * g[i * m + j];
          }
      }
    };
  }
  return Var(std::move(node));
}

Var transpose(const Var& a) {
  auto node = make_node(a.value().transpose());
  if (a.requires_grad()) {
    node->requires_grad = true;
    node->parents = {a.node()};
    node->backward = [](Node& self) { self.parents[0]->ensure_grad() += self.grad.transpose(); };
  }
  return Var(std::move(node));
}

Var hcat(const Var& a, const Var& b) { return hcat(std::vector<Var>{a, b}); }

Var hcat(const std::vector<Var>& parts) {
  if (parts.empty()) throw ContractError("hcat: no operands");
  const std::size_t n = parts.front().rows();
  std::size_t total = 0;
  bool needs_grad = false;
  for (const auto& p : parts) {
    if (p.rows() != n) throw DimensionError("hcat: row count mismatch " + to_string(p.value().shape()));
    total += p.cols();
    needs_grad = needs_grad || p.requires_grad();
  }
  Tensor out({n, total});
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t c = p.cols();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < c; ++j) out(i, offset + j) = p.value()(i, j);
    offset += c;
  }
  auto node = make_node(std::move(out));
  if (needs_grad) {
    node->requires_grad = true;
    for (const auto& p : parts) node->parents.push_back(p.node());
    node->backward = [](Node& self) {
      const std::size_t n = self.value.rows(), total = self.value.cols();
      std::size_t off = 0;
      for (auto& parent : self.parents) {
        const std::size_t c = parent->value.cols();
        if (parent->requires_grad) {
          Tensor& g = parent->ensure_grad();
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < c; ++j) g(i, j) += self.grad[i * total + off + j];
        }
        off += c;
      }
    };
  }
  return Var(std::move(node));
}

Var slice_cols(const Var& a, std::size_t start, std::size_t count) {
  auto node = make_node(cols_slice(a.value(), start, count));
  if (a.requires_grad()) {
    node->requires_grad = true;
    node->parents = {a.node()};
    node->backward = [start, count](Node& self) {
      Tensor& g = self.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < self.value.rows(); ++i)
        for (std::size_t j = 0; j < count; ++j) g(i, start + j) += self.grad(i, j);
    };
  }
  return Var(std::move(node));
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double x : a.value().data()) s += x;
  auto node = make_node(Tensor::scalar(s));
  if (a.requires_grad()) {
    node->requires_grad = true;
    node->parents = {a.node()};
    node->backward = [](Node& self) {
      Tensor& g = self.parents[0]->ensure_grad();
      const double up = self.grad[0];
      for (double& x : g.data()) x += up;
    };
  }
  return Var(std::move(node));
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw DimensionError("mean: empty tensor");
  return sum(a) * (1.0 / n);
}

Var row_sums(const Var& a) {
  const std::size_t n = a.rows(), m = a.cols();
  Tensor out({n, 1});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[i] += a.value()(i, j);
  auto node = make_node(std::move(out));
  if (a.requires_grad()) {
    node->requires_grad = true;
    node->parents = {a.node()};
    node->backward = [n, m](Node& self) {
      Tensor& g = self.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) g(i, j) += self.grad[i];
    };
  }
  return Var(std::move(node));
}

Var col_sums(const Var& a) {
  const std::size_t n = a.rows(), m = a.cols();
  Tensor out({1, m});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[j] += a.value()(i, j);
  auto node = make_node(std::move(out));
  if (a.requires_grad()) {
    node->requires_grad = true;
    node->parents = {a.node()};
    node->backward = [n, m](Node& self) {
      Tensor& g = self.parents[0]->ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) g(i, j) += self.grad[j];
    };
  }
  return Var(std::move(node));
}

Var select(const Tensor& mask, const Var& a, const Var& b) {
  const Broadcast ab(a.value(), b.value(), "select");
  const Tensor shape_probe({ab.rows, ab.cols});
  const Broadcast mb(shape_probe, mask, "select mask");
  if (mb.rows != ab.rows || mb.cols != ab.cols) throw DimensionError("select: mask larger than operands");
  Tensor out({ab.rows, ab.cols});
  for (std::size_t i = 0; i < ab.rows; ++i)
    for (std::size_t j = 0; j < ab.cols; ++j)
      out(i, j) = mask[mb.ib(i, j)] != 0.0 ? a.value()[ab.ia(i, j)] : b.value()[ab.ib(i, j)];
  auto node = make_node(std::move(out));
  if (any_requires_grad({&a, &b})) {
    node->requires_grad = true;
    node->parents = {a.node(), b.node()};
    node->backward = [ab, mb, mask](Node& self) {
      Node& na = *self.parents[0];
      Node& nb = *self.parents[1];
      for (std::size_t i = 0; i < ab.rows; ++i)
        for (std::size_t j = 0; j < ab.cols; ++j) {
          const double g = self.grad(i, j);
          if (mask[mb.ib(i, j)] != 0.0) {
            if (na.requires_grad) na.ensure_grad()[ab.ia(i, j)] += g;
          } else if (nb.requires_grad) {
            nb.ensure_grad()[ab.ib(i, j)] += g;
          }
        }
    };
  }
  return Var(std::move(node));
}

Tensor less(const Var& a, const Var& b) {
  const Broadcast bc(a.value(), b.value(), "less");
  Tensor out({bc.rows, bc.cols});
  for (std::size_t i = 0; i < bc.rows; ++i)
    for (std::size_t j = 0; j < bc.cols; ++j)
      out(i, j) = a.value()[bc.ia(i, j)] < b.value()[bc.ib(i, j)] ? 1.0 : 0.0;
  return out;
}

}  // namespace skillab::numkit

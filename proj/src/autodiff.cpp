#include "lars/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lars/errors.hpp"
#include "lars/kernels.hpp"

namespace lars {

const Matrix& Var::value() const {
  LARS_REQUIRE(tape_ != nullptr, "use of an unbound Var");
  return tape_->value(id_);
}

double Var::scalar() const {
  const Matrix& v = value();
  LARS_REQUIRE(v.rows == 1 && v.cols == 1, "scalar() on a non-scalar node");
  return v.data[0];
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(std::string_view name) {
  LARS_REQUIRE(values_ != nullptr, "tape has no parameter store");
  const std::string key(name);
  if (auto it = param_nodes_.find(key); it != param_nodes_.end()) return Var(this, it->second);
  const std::size_t index = values_->index_of(name);
  const ParamEntry& e = values_->at(index);
  Matrix m;
  if (e.shape.size() == 1) {
    m = Matrix(1, e.shape[0], e.values);
  } else if (e.shape.size() == 2) {
    m = Matrix(e.shape[0], e.shape[1], e.values);
  } else {
    m = Matrix(1, e.size(), e.values);
  }
  Node n;
  n.value = std::move(m);
  if (grads_ != nullptr && e.trainable) {
    n.requires_grad = true;
    n.param = static_cast<long>(index);
  }
  nodes_.push_back(std::move(n));
  param_nodes_.emplace(key, nodes_.size() - 1);
  return Var(this, nodes_.size() - 1);
}

Matrix& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty() && !n.value.empty()) n.grad = Matrix(n.value.rows, n.value.cols);
  return n.grad;
}

Var Tape::push(Matrix value, std::vector<std::size_t> inputs, BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = std::any_of(inputs.begin(), inputs.end(), [&](std::size_t i) { return nodes_[i].requires_grad; });
  if (n.requires_grad) {
    n.inputs = std::move(inputs);
    n.backward = std::move(backward);
  }
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(Var loss) {
  LARS_REQUIRE(loss.valid() && &loss.tape() == this, "backward() needs a loss recorded on this tape");
  LARS_REQUIRE(!backward_done_, "backward() called twice on one tape");
  const Matrix& lv = loss.value();
  LARS_REQUIRE(lv.rows == 1 && lv.cols == 1, "backward() needs a scalar loss");
  backward_done_ = true;
  if (!nodes_[loss.id()].requires_grad) return;
  grad_buffer(loss.id()).data[0] = 1.0;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, id);
    if (n.param >= 0 && grads_ != nullptr) {
      auto& g = grads_->at(static_cast<std::size_t>(n.param)).grads;
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad.data[i];
    }
  }
}

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.grad.empty()) return Matrix(n.value.rows, n.value.cols);
  return n.grad;
}

namespace {

Tape& same_tape(Var a, Var b) {
  LARS_REQUIRE(a.valid() && b.valid(), "use of an unbound Var");
  LARS_REQUIRE(&a.tape() == &b.tape(), "operands live on different tapes");
  return a.tape();
}

// Elementwise map with derivative expressed through (x, y).
template <class F, class DF>
Var unary(Var x, F f, DF df) {
  Tape& t = x.tape();
  const Matrix& xv = x.value();
  Matrix y(xv.rows, xv.cols);
  for (std::size_t i = 0; i < xv.size(); ++i) y.data[i] = f(xv.data[i]);
  const std::size_t xi = x.id();
  return t.push(std::move(y), {xi}, [xi, df](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad_buffer(self);
    const Matrix& xv = tp.value(xi);
    const Matrix& yv = tp.value(self);
    Matrix& gx = tp.grad_buffer(xi);
    for (std::size_t i = 0; i < g.size(); ++i) gx.data[i] += g.data[i] * df(xv.data[i], yv.data[i]);
  });
}

struct Broadcast {
  std::size_t rows, cols;
  std::size_t a_rs, a_cs, b_rs, b_cs;  // strides (0 for broadcast dims)
};

Broadcast broadcast(const Matrix& a, const Matrix& b) {
  const auto dim = [](std::size_t x, std::size_t y) {
    LARS_REQUIRE(x == y || x == 1 || y == 1, "incompatible shapes for broadcasting");
    return std::max(x, y);
  };
  Broadcast s{};
  s.rows = dim(a.rows, b.rows);
  s.cols = dim(a.cols, b.cols);
  s.a_rs = a.rows == 1 ? 0 : a.cols;
  s.a_cs = a.cols == 1 ? 0 : 1;
  s.b_rs = b.rows == 1 ? 0 : b.cols;
  s.b_cs = b.cols == 1 ? 0 : 1;
  return s;
}

// f(a, b) with partials da(a, b, y), db(a, b, y).
template <class F, class DA, class DB>
Var binary(Var a, Var b, F f, DA da, DB db) {
  Tape& t = same_tape(a, b);
  const Broadcast s = broadcast(a.value(), b.value());
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  Matrix y(s.rows, s.cols);
  for (std::size_t i = 0; i < s.rows; ++i)
    for (std::size_t j = 0; j < s.cols; ++j)
      y.data[i * s.cols + j] = f(av.data[i * s.a_rs + j * s.a_cs], bv.data[i * s.b_rs + j * s.b_cs]);
  const std::size_t ai = a.id();
  const std::size_t bi = b.id();
  return t.push(std::move(y), {ai, bi}, [ai, bi, s, da, db](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad_buffer(self);
    const Matrix& av = tp.value(ai);
    const Matrix& bv = tp.value(bi);
    const Matrix& yv = tp.value(self);
    const bool need_a = tp.needs_grad(ai);
    const bool need_b = tp.needs_grad(bi);
    Matrix* ga = need_a ? &tp.grad_buffer(ai) : nullptr;
    Matrix* gb = need_b ? &tp.grad_buffer(bi) : nullptr;
    for (std::size_t i = 0; i < s.rows; ++i) {
      for (std::size_t j = 0; j < s.cols; ++j) {
        const std::size_t k = i * s.cols + j;
        const std::size_t ka = i * s.a_rs + j * s.a_cs;
        const std::size_t kb = i * s.b_rs + j * s.b_cs;
        if (ga) ga->data[ka] += g.data[k] * da(av.data[ka], bv.data[kb], yv.data[k]);
        if (gb) gb->data[kb] += g.data[k] * db(av.data[ka], bv.data[kb], yv.data[k]);
      }
    }
  });
}

double log_logistic_value(double x) {
  // -softplus(-x)
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

double logistic_value(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log1mexp_value(double x) {
  // Maechler's split keeps both branches accurate.
  return x > -0.6931471805599453 ? std::log(-std::expm1(x)) : std::log1p(-std::exp(x));
}

}  // namespace

Var matmul(Var x, Var w) { return affine(x, w, Var()); }

Var affine(Var x, Var w, Var b) {
  Tape& t = same_tape(x, w);
  const Matrix& xv = x.value();
  const Matrix& wv = w.value();
  LARS_REQUIRE(xv.cols == wv.rows, "affine: input width does not match weight rows");
  const std::size_t m = xv.rows, k = xv.cols, n = wv.cols;
  Matrix y(m, n);
  std::vector<std::size_t> inputs{x.id(), w.id()};
  if (b.valid()) {
    const Matrix& bv = b.value();
    LARS_REQUIRE(&b.tape() == &t, "operands live on different tapes");
    LARS_REQUIRE(bv.rows == 1 && bv.cols == n, "affine: bias must be 1 x out");
    for (std::size_t i = 0; i < m; ++i) std::copy(bv.data.begin(), bv.data.end(), y.data.begin() + i * n);
    inputs.push_back(b.id());
  }
  kernels::parallel::gemm_nn(m, n, k, xv.data, wv.data, y.data, b.valid());
  const std::size_t xi = x.id(), wi = w.id();
  const long bi = b.valid() ? static_cast<long>(b.id()) : -1;
  return t.push(std::move(y), std::move(inputs), [xi, wi, bi, m, n, k](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad_buffer(self);
    if (tp.needs_grad(xi))
      kernels::parallel::gemm_nt(m, n, k, g.data, tp.value(wi).data, tp.grad_buffer(xi).data, true);
    if (tp.needs_grad(wi))
      kernels::parallel::gemm_tn(m, n, k, tp.value(xi).data, g.data, tp.grad_buffer(wi).data, true);
    if (bi >= 0 && tp.needs_grad(static_cast<std::size_t>(bi)))
      kernels::parallel::column_sums(m, n, g.data, tp.grad_buffer(static_cast<std::size_t>(bi)).data, true);
  });
}

Var tanh(Var x) {
  return unary(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var x) {
  return unary(x, [](double v) { return v > 0 ? v : 0.0; }, [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

Var logistic(Var x) {
  return unary(x, logistic_value, [](double, double y) { return y * (1.0 - y); });
}

Var log_logistic(Var x) {
  // d/dx log sigma(x) = sigma(-x)
  return unary(x, log_logistic_value, [](double v, double) { return logistic_value(-v); });
}

Var softplus(Var x) {
  return unary(x, [](double v) { return -log_logistic_value(-v); }, [](double v, double) { return logistic_value(v); });
}

Var exp(Var x) {
  return unary(x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var log(Var x) {
  return unary(x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Var square(Var x) {
  return unary(x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Var sqrt(Var x) {
  return unary(x, [](double v) { return std::sqrt(v); }, [](double, double y) { return 0.5 / y; });
}

Var neg(Var x) {
  return unary(x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Var log1mexp(Var x) {
  // d/dx log(1 - e^x) = -e^x / (1 - e^x) = -exp(x - y)
  return unary(x, log1mexp_value, [](double v, double y) { return -std::exp(v - y); });
}

Var clamp(Var x, double lo, double hi) {
  return unary(
      x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

Var scale(Var x, double c) {
  return unary(x, [c](double v) { return c * v; }, [c](double, double) { return c; });
}

Var add_scalar(Var x, double c) {
  return unary(x, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

Var stop_gradient(Var x) { return x.tape().constant(x.value()); }

Var add(Var a, Var b) {
  return binary(
      a, b, [](double x, double y) { return x + y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary(
      a, b, [](double x, double y) { return x - y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary(
      a, b, [](double x, double y) { return x * y; }, [](double, double y, double) { return y; },
      [](double x, double, double) { return x; });
}

Var div(Var a, Var b) {
  return binary(
      a, b, [](double x, double y) { return x / y; }, [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double r) { return -r / y; });
}

Var logaddexp(Var a, Var b) {
  constexpr double ninf = -std::numeric_limits<double>::infinity();
  return binary(
      a, b,
      [](double x, double y) {
        if (x == ninf && y == ninf) return ninf;
        const double m = std::max(x, y);
        return m + std::log1p(std::exp(std::min(x, y) - m));
      },
      [](double x, double, double r) { return r == ninf ? 0.0 : std::exp(x - r); },
      [](double, double y, double r) { return r == ninf ? 0.0 : std::exp(y - r); });
}

Var sum(Var x) {
  Tape& t = x.tape();
  double s = 0.0;
  for (double v : x.value().data) s += v;
  const std::size_t xi = x.id();
  return t.push(Matrix::scalar(s), {xi}, [xi](Tape& tp, std::size_t self) {
    const double g = tp.grad_buffer(self).data[0];
    for (double& v : tp.grad_buffer(xi).data) v += g;
  });
}

Var mean(Var x) {
  const double n = static_cast<double>(x.value().size());
  LARS_REQUIRE(n > 0, "mean of an empty node");
  return scale(sum(x), 1.0 / n);
}

Var row_sum(Var x) {
  Tape& t = x.tape();
  const Matrix& xv = x.value();
  Matrix y(xv.rows, 1);
  for (std::size_t i = 0; i < xv.rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < xv.cols; ++j) s += xv(i, j);
    y.data[i] = s;
  }
  const std::size_t xi = x.id();
  return t.push(std::move(y), {xi}, [xi](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad_buffer(self);
    Matrix& gx = tp.grad_buffer(xi);
    for (std::size_t i = 0; i < gx.rows; ++i)
      for (std::size_t j = 0; j < gx.cols; ++j) gx(i, j) += g.data[i];
  });
}

Var row_logsumexp(Var x) {
  Tape& t = x.tape();
  const Matrix& xv = x.value();
  Matrix y(xv.rows, 1);
  for (std::size_t i = 0; i < xv.rows; ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < xv.cols; ++j) m = std::max(m, xv(i, j));
    if (!std::isfinite(m)) {
      y.data[i] = m;
      continue;
    }
    double s = 0.0;
    for (std::size_t j = 0; j < xv.cols; ++j) s += std::exp(xv(i, j) - m);
    y.data[i] = m + std::log(s);
  }
  const std::size_t xi = x.id();
  return t.push(std::move(y), {xi}, [xi](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad_buffer(self);
    const Matrix& yv = tp.value(self);
    const Matrix& xv = tp.value(xi);
    Matrix& gx = tp.grad_buffer(xi);
    for (std::size_t i = 0; i < gx.rows; ++i)
      for (std::size_t j = 0; j < gx.cols; ++j) gx(i, j) += g.data[i] * std::exp(xv(i, j) - yv.data[i]);
  });
}

Var col_mean(Var x) {
  Tape& t = x.tape();
  const Matrix& xv = x.value();
  LARS_REQUIRE(xv.rows > 0, "col_mean of an empty node");
  Matrix y(1, xv.cols);
  kernels::parallel::column_sums(xv.rows, xv.cols, xv.data, y.data, false);
  const double inv = 1.0 / static_cast<double>(xv.rows);
  for (double& v : y.data) v *= inv;
  const std::size_t xi = x.id();
  return t.push(std::move(y), {xi}, [xi, inv](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad_buffer(self);
    Matrix& gx = tp.grad_buffer(xi);
    for (std::size_t i = 0; i < gx.rows; ++i)
      for (std::size_t j = 0; j < gx.cols; ++j) gx(i, j) += g.data[j] * inv;
  });
}

Var slice_cols(Var x, std::size_t begin, std::size_t count) {
  Tape& t = x.tape();
  const Matrix& xv = x.value();
  LARS_REQUIRE(begin + count <= xv.cols, "slice_cols out of range");
  Matrix y(xv.rows, count);
  for (std::size_t i = 0; i < xv.rows; ++i)
    for (std::size_t j = 0; j < count; ++j) y(i, j) = xv(i, begin + j);
  const std::size_t xi = x.id();
  return t.push(std::move(y), {xi}, [xi, begin, count](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad_buffer(self);
    Matrix& gx = tp.grad_buffer(xi);
    for (std::size_t i = 0; i < gx.rows; ++i)
      for (std::size_t j = 0; j < count; ++j) gx(i, begin + j) += g(i, j);
  });
}

Var concat_cols(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  LARS_REQUIRE(av.rows == bv.rows, "concat_cols: row counts differ");
  Matrix y(av.rows, av.cols + bv.cols);
  for (std::size_t i = 0; i < av.rows; ++i) {
    for (std::size_t j = 0; j < av.cols; ++j) y(i, j) = av(i, j);
    for (std::size_t j = 0; j < bv.cols; ++j) y(i, av.cols + j) = bv(i, j);
  }
  const std::size_t ai = a.id(), bi = b.id();
  const std::size_t ac = av.cols;
  return t.push(std::move(y), {ai, bi}, [ai, bi, ac](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad_buffer(self);
    if (tp.needs_grad(ai)) {
      Matrix& ga = tp.grad_buffer(ai);
      for (std::size_t i = 0; i < ga.rows; ++i)
        for (std::size_t j = 0; j < ga.cols; ++j) ga(i, j) += g(i, j);
    }
    if (tp.needs_grad(bi)) {
      Matrix& gb = tp.grad_buffer(bi);
      for (std::size_t i = 0; i < gb.rows; ++i)
        for (std::size_t j = 0; j < gb.cols; ++j) gb(i, j) += g(i, ac + j);
    }
  });
}

Var bernoulli_log_prob(Var logits, const Matrix& targets) {
  Tape& t = logits.tape();
  const Matrix& lv = logits.value();
  LARS_REQUIRE(lv.same_shape(targets), "bernoulli_log_prob: targets shape mismatch");
  Matrix y(lv.rows, 1);
  for (std::size_t i = 0; i < lv.rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < lv.cols; ++j) {
      const double l = lv(i, j);
      const double x = targets(i, j);
      // x*log(sigma(l)) + (1-x)*log(sigma(-l)) = x*l - softplus(l)
      s += x * l + log_logistic_value(-l);
    }
    y.data[i] = s;
  }
  const std::size_t li = logits.id();
  return t.push(std::move(y), {li}, [li, targets](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad_buffer(self);
    const Matrix& lv = tp.value(li);
    Matrix& gl = tp.grad_buffer(li);
    for (std::size_t i = 0; i < lv.rows; ++i)
      for (std::size_t j = 0; j < lv.cols; ++j)
        gl(i, j) += g.data[i] * (targets(i, j) - logistic_value(lv(i, j)));
  });
}

}  // namespace lars

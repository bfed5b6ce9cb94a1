#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lars/matrix.hpp"
#include "lars/params.hpp"

// Reverse-mode differentiation over matrix-valued nodes.
//
// A Tape records every operation applied to its Vars. Parameters enter the
// tape through `Tape::param`, which binds the node to a ParamStore entry;
// `Tape::backward` then adds d(loss)/d(param) into that entry's gradient
// buffer. The operation set is closed (affine maps, the usual activations,
// elementwise arithmetic with broadcasting, reductions, log-sum-exp and a
// handful of fused numerically stable forms); everything in the library is
// written in terms of it.
namespace lars {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid for the tape's lifetime.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }

  const Matrix& value() const;
  std::size_t rows() const { return value().rows; }
  std::size_t cols() const { return value().cols; }
  // Value of a 1 x 1 node.
  double scalar() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  // A tape with no parameters.
  Tape() = default;
  // Evaluation tape: parameters enter as constants, nothing is recorded
  // for differentiation.
  explicit Tape(const ParamStore& store) : values_(&store) {}
  // Training tape: trainable parameters receive gradients on backward().
  // Entries marked non-trainable enter as constants.
  explicit Tape(ParamStore& store) : values_(&store), grads_(&store) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var constant(double value) { return constant(Matrix::scalar(value)); }
  // Rank-1 entries become 1 x n rows, rank-2 entries keep their shape.
  Var param(std::string_view name);

  bool recording() const { return grads_ != nullptr; }
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }

  // Propagates d(loss)/d(node) to every node and accumulates parameter
  // gradients into the store. `loss` must be 1 x 1; may be called once.
  void backward(Var loss);
  // Gradient of the last backward() loss w.r.t. `v` (zeros if unreached).
  Matrix grad(Var v) const;

  std::size_t size() const { return nodes_.size(); }

  // --- op implementation interface ---
  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  // Lazily allocated gradient buffer of node `id`.
  Matrix& grad_buffer(std::size_t id);
  bool needs_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  // Records a node computed from `inputs`. `backward` runs only if some
  // input requires a gradient.
  Var push(Matrix value, std::vector<std::size_t> inputs, BackwardFn backward);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    long param = -1;
    bool requires_grad = false;
  };

  std::deque<Node> nodes_;
  std::unordered_map<std::string, std::size_t> param_nodes_;
  const ParamStore* values_ = nullptr;
  ParamStore* grads_ = nullptr;
  bool backward_done_ = false;
};

// --- linear algebra ---
// x[R x in] * w[in x out] + b[1 x out]; pass an invalid Var for no bias.
Var affine(Var x, Var w, Var b);
Var matmul(Var x, Var w);

// --- elementwise unary ---
Var tanh(Var x);
Var relu(Var x);
Var logistic(Var x);
// log(logistic(x)) = -softplus(-x), finite for every finite x.
Var log_logistic(Var x);
Var softplus(Var x);
Var exp(Var x);
Var log(Var x);
Var square(Var x);
Var sqrt(Var x);
Var neg(Var x);
// log(1 - exp(x)) for x <= 0.
Var log1mexp(Var x);
// Gradient passes only where lo <= x <= hi.
Var clamp(Var x, double lo, double hi);
Var scale(Var x, double c);
Var add_scalar(Var x, double c);

// Forward value of `x`, zero gradient.
Var stop_gradient(Var x);

// --- elementwise binary, with broadcasting of size-1 dimensions ---
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
// log(exp(a) + exp(b))
Var logaddexp(Var a, Var b);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator-(Var a) { return neg(a); }
inline Var operator*(double c, Var x) { return scale(x, c); }
inline Var operator*(Var x, double c) { return scale(x, c); }
inline Var operator+(Var x, double c) { return add_scalar(x, c); }
inline Var operator+(double c, Var x) { return add_scalar(x, c); }
inline Var operator-(Var x, double c) { return add_scalar(x, -c); }
inline Var operator-(double c, Var x) { return add_scalar(neg(x), c); }

// --- reductions ---
Var sum(Var x);                // 1 x 1
Var mean(Var x);               // 1 x 1
Var row_sum(Var x);            // R x 1
Var row_logsumexp(Var x);      // R x 1
Var col_mean(Var x);           // 1 x C

// --- shape ---
Var slice_cols(Var x, std::size_t begin, std::size_t count);
Var concat_cols(Var a, Var b);

// --- fused likelihood ---
// Per-row sum_j x*log(sigma(l)) + (1-x)*log(1-sigma(l)) from logits l.
// `targets` is constant data of the same shape as `logits`.
Var bernoulli_log_prob(Var logits, const Matrix& targets);

}  // namespace lars

#pragma once

// Minimal reverse-mode differentiation over dense double tensors.
//
// A Tape owns every node created during one forward pass. Ops append nodes in
// creation order, which is already a topological order, so backward() is a
// single reverse sweep. A tape is single-owner; use one tape per thread.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "pulse/signal.hpp"

namespace pulse::ad {

using Shape = std::vector<std::size_t>;

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const std::vector<double>& value() const;
  const std::vector<double>& grad() const;
  const Shape& shape() const;
  std::size_t size() const { return value().size(); }
  double item() const;
  bool requires_grad() const;

  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Shape shape, std::vector<double> values);
  Var constant(Shape shape, std::vector<double> values);

  // Seeds d(root)/d(root) = 1 and propagates to every node that requires it.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::size_t id) const { return nodes_[id]; }

  // Used by op implementations.
  Var record(Shape shape, std::vector<double> value, std::vector<std::size_t> inputs,
             BackwardFn backward);
  std::vector<double>& grad_of(std::size_t id);
  const std::vector<double>& value_of(std::size_t id) const { return nodes_[id].value; }
  const std::vector<double>& upstream(std::size_t id) const { return nodes_[id].grad; }
  bool needs_grad(std::size_t id) const { return nodes_[id].requires_grad; }

 private:
  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

std::size_t element_count(const Shape& shape);

// Binary ops take equal shapes, or a one-element operand broadcast across
// the other.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var scale(Var x, double k);
Var add_scalar(Var x, double k);

Var tanh(Var x);
// Subgradient at 0 is 0.
Var relu(Var x);
Var sqrt(Var x);
Var log(Var x);
Var square(Var x);

Var sum(Var x);
Var mean(Var x);

// x: [Cin, T], weight: [Cout, Cin, K] with K odd, bias: [Cout] -> [Cout, T].
// Zero padding keeps the output length equal to T.
Var conv1d_same(Var x, Var weight, Var bias);

// a: [m, k], b: [k, n] -> [m, n].
Var matmul(Var a, Var b);

// Subtracts the mean over all elements.
Var mean_center(Var x);

inline constexpr double kNormalizeEpsilon = 1e-12;
// x / max(sum(x), kNormalizeEpsilon).
Var normalize(Var x);

// Fixed-coefficient linear map y = M x, with M given row-major as
// [rows, x.size()]. No gradient flows into M.
Var project(std::shared_ptr<const std::vector<double>> matrix, std::size_t rows, Var x);

// Contiguous view of `count(shape)` elements starting at `offset`.
Var slice(Var x, std::size_t offset, Shape shape);
Var index(Var x, std::size_t i);

// Same values with the gradient path cut.
Var detach(Var x);

// Power per heart-rate class of a length-T signal: mean-center, project on
// the cosine and sine banks, then sum the squares.
Var psd_power(Var signal, const std::shared_ptr<const SpectralProbe>& probe);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator*(double k, Var x) { return scale(x, k); }

using ScalarFn = std::function<Var(Tape&, Var)>;

// Max over coordinates of |analytic - central difference| / max(1, |central|).
double grad_check(const ScalarFn& fn, const Shape& shape, std::span<const double> point,
                  double h = 1e-5);

// Analytic gradient of fn at point, for callers that compare routes.
std::vector<double> gradient(const ScalarFn& fn, const Shape& shape,
                             std::span<const double> point);

}  // namespace pulse::ad

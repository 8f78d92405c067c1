#include "pulse/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "pulse/errors.hpp"

namespace pulse::ad {

const std::vector<double>& Var::value() const { return tape_->node(id_).value; }
const std::vector<double>& Var::grad() const { return tape_->node(id_).grad; }
const Shape& Var::shape() const { return tape_->node(id_).shape; }
bool Var::requires_grad() const { return tape_->node(id_).requires_grad; }

double Var::item() const {
  const auto& v = value();
  if (v.size() != 1) throw ShapeMismatch("item() on a tensor of size " + std::to_string(v.size()));
  return v[0];
}

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

namespace {

void check_finite(const std::vector<double>& values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NonFiniteValue(std::string(what) + " produced a non-finite value");
  }
}

void check_same_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) throw ShapeMismatch("operands live on different tapes");
}

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

}  // namespace

Var Tape::leaf(Shape shape, std::vector<double> values) {
  if (element_count(shape) != values.size()) {
    throw ShapeMismatch("leaf shape " + shape_str(shape) + " does not hold " +
                        std::to_string(values.size()) + " values");
  }
  check_finite(values, "leaf");
  nodes_.push_back(Node{std::move(shape), std::move(values), {}, {}, {}, true});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Shape shape, std::vector<double> values) {
  Var v = leaf(std::move(shape), std::move(values));
  nodes_.back().requires_grad = false;
  return v;
}

Var Tape::record(Shape shape, std::vector<double> value, std::vector<std::size_t> inputs,
                 BackwardFn backward) {
  check_finite(value, "op");
  const bool rg = std::any_of(inputs.begin(), inputs.end(),
                              [this](std::size_t i) { return nodes_[i].requires_grad; });
  nodes_.push_back(Node{std::move(shape), std::move(value), {}, std::move(inputs),
                        rg ? std::move(backward) : BackwardFn{}, rg});
  return Var(this, nodes_.size() - 1);
}

std::vector<double>& Tape::grad_of(std::size_t id) {
  auto& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

void Tape::backward(Var root) {
  if (&root.tape() != this) throw ShapeMismatch("backward root belongs to another tape");
  if (root.size() != 1) throw ShapeMismatch("backward needs a scalar root");
  if (backward_done_) throw ShapeMismatch("backward already ran on this tape");
  backward_done_ = true;
  if (!nodes_[root.id()].requires_grad) return;
  grad_of(root.id())[0] = 1.0;
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    n.backward(*this, i);
  }
  for (const auto& n : nodes_) {
    if (!n.grad.empty()) check_finite(n.grad, "backward");
  }
}

namespace {

// Elementwise binary op with one-element broadcast. dfa/dfb return the
// partials of y with respect to a and b at one element.
template <typename F, typename DA, typename DB>
Var binary(Var a, Var b, F f, DA dfa, DB dfb, const char* name) {
  check_same_tape(a, b);
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  if (na != nb && na != 1 && nb != 1) {
    throw ShapeMismatch(std::string(name) + " on shapes " + shape_str(a.shape()) + " and " +
                        shape_str(b.shape()));
  }
  const std::size_t n = std::max(na, nb);
  const Shape shape = na >= nb ? a.shape() : b.shape();
  const auto& av = a.value();
  const auto& bv = b.value();
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = f(av[na == 1 ? 0 : i], bv[nb == 1 ? 0 : i]);
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  return a.tape().record(shape, std::move(y), {ia, ib},
                         [=](Tape& t, std::size_t self) {
                           const auto& g = t.upstream(self);
                           const auto& x = t.value_of(ia);
                           const auto& z = t.value_of(ib);
                           if (t.needs_grad(ia)) {
                             auto& ga = t.grad_of(ia);
                             for (std::size_t i = 0; i < n; ++i) {
                               ga[na == 1 ? 0 : i] +=
                                   g[i] * dfa(x[na == 1 ? 0 : i], z[nb == 1 ? 0 : i]);
                             }
                           }
                           if (t.needs_grad(ib)) {
                             auto& gb = t.grad_of(ib);
                             for (std::size_t i = 0; i < n; ++i) {
                               gb[nb == 1 ? 0 : i] +=
                                   g[i] * dfb(x[na == 1 ? 0 : i], z[nb == 1 ? 0 : i]);
                             }
                           }
                         });
}

// Elementwise unary op; df receives (x, y).
template <typename F, typename D>
Var unary(Var x, F f, D df) {
  const auto& xv = x.value();
  std::vector<double> y(xv.size());
  std::transform(xv.begin(), xv.end(), y.begin(), f);
  const std::size_t ix = x.id();
  return x.tape().record(x.shape(), std::move(y), {ix}, [=](Tape& t, std::size_t self) {
    const auto& g = t.upstream(self);
    const auto& in = t.value_of(ix);
    const auto& out = t.value_of(self);
    auto& gx = t.grad_of(ix);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * df(in[i], out[i]);
  });
}

}  // namespace

Var add(Var a, Var b) {
  return binary(
      a, b, [](double x, double z) { return x + z; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; }, "add");
}

Var sub(Var a, Var b) {
  return binary(
      a, b, [](double x, double z) { return x - z; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; }, "sub");
}

Var mul(Var a, Var b) {
  return binary(
      a, b, [](double x, double z) { return x * z; }, [](double, double z) { return z; },
      [](double x, double) { return x; }, "mul");
}

Var div(Var a, Var b) {
  return binary(
      a, b, [](double x, double z) { return x / z; }, [](double, double z) { return 1.0 / z; },
      [](double x, double z) { return -x / (z * z); }, "div");
}

Var scale(Var x, double k) {
  return unary(
      x, [k](double v) { return k * v; }, [k](double, double) { return k; });
}

Var add_scalar(Var x, double k) {
  return unary(
      x, [k](double v) { return v + k; }, [](double, double) { return 1.0; });
}

Var tanh(Var x) {
  return unary(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var sqrt(Var x) {
  return unary(
      x, [](double v) { return std::sqrt(v); }, [](double, double y) { return 0.5 / y; });
}

Var log(Var x) {
  return unary(
      x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Var square(Var x) {
  return unary(
      x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Var sum(Var x) {
  const auto& xv = x.value();
  const double s = std::accumulate(xv.begin(), xv.end(), 0.0);
  const std::size_t ix = x.id();
  return x.tape().record({1}, {s}, {ix}, [ix](Tape& t, std::size_t self) {
    const double g = t.upstream(self)[0];
    for (double& v : t.grad_of(ix)) v += g;
  });
}

Var mean(Var x) {
  const auto& xv = x.value();
  const double n = static_cast<double>(xv.size());
  const double m = std::accumulate(xv.begin(), xv.end(), 0.0) / n;
  const std::size_t ix = x.id();
  return x.tape().record({1}, {m}, {ix}, [ix, n](Tape& t, std::size_t self) {
    const double g = t.upstream(self)[0] / n;
    for (double& v : t.grad_of(ix)) v += g;
  });
}

Var conv1d_same(Var x, Var weight, Var bias) {
  check_same_tape(x, weight);
  check_same_tape(x, bias);
  const auto& xs = x.shape();
  const auto& ws = weight.shape();
  if (xs.size() != 2 || ws.size() != 3 || ws[1] != xs[0] || ws[2] % 2 == 0 ||
      bias.size() != ws[0]) {
    throw ShapeMismatch("conv1d_same: x " + shape_str(xs) + ", weight " + shape_str(ws) +
                        ", bias " + shape_str(bias.shape()));
  }
  const std::size_t cin = xs[0];
  const std::size_t len = xs[1];
  const std::size_t cout = ws[0];
  const std::size_t k = ws[2];
  const auto pad = static_cast<std::ptrdiff_t>(k / 2);
  const auto T = static_cast<std::ptrdiff_t>(len);

  const auto& xv = x.value();
  const auto& wv = weight.value();
  const auto& bv = bias.value();
  std::vector<double> y(cout * len);
  for (std::size_t o = 0; o < cout; ++o) {
    double* yo = y.data() + o * len;
    std::fill(yo, yo + len, bv[o]);
    for (std::size_t i = 0; i < cin; ++i) {
      const double* xi = xv.data() + i * len;
      const double* w = wv.data() + (o * cin + i) * k;
      for (std::size_t j = 0; j < k; ++j) {
        const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) - pad;
        const std::ptrdiff_t t0 = std::max<std::ptrdiff_t>(0, -shift);
        const std::ptrdiff_t t1 = std::min<std::ptrdiff_t>(T, T - shift);
        const double wj = w[j];
        for (std::ptrdiff_t t = t0; t < t1; ++t) yo[t] += wj * xi[t + shift];
      }
    }
  }

  const std::size_t ix = x.id();
  const std::size_t iw = weight.id();
  const std::size_t ib = bias.id();
  return x.tape().record({cout, len}, std::move(y), {ix, iw, ib}, [=](Tape& t, std::size_t self) {
    const auto& g = t.upstream(self);
    const auto& xin = t.value_of(ix);
    const auto& win = t.value_of(iw);
    if (t.needs_grad(ib)) {
      auto& gb = t.grad_of(ib);
      for (std::size_t o = 0; o < cout; ++o) {
        const double* go = g.data() + o * len;
        gb[o] += std::accumulate(go, go + len, 0.0);
      }
    }
    const bool want_x = t.needs_grad(ix);
    const bool want_w = t.needs_grad(iw);
    double* gx = want_x ? t.grad_of(ix).data() : nullptr;
    double* gw = want_w ? t.grad_of(iw).data() : nullptr;
    for (std::size_t o = 0; o < cout; ++o) {
      const double* go = g.data() + o * len;
      for (std::size_t i = 0; i < cin; ++i) {
        const double* xi = xin.data() + i * len;
        const double* w = win.data() + (o * cin + i) * k;
        for (std::size_t j = 0; j < k; ++j) {
          const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) - pad;
          const std::ptrdiff_t t0 = std::max<std::ptrdiff_t>(0, -shift);
          const std::ptrdiff_t t1 = std::min<std::ptrdiff_t>(T, T - shift);
          if (want_w) {
            double acc = 0.0;
            for (std::ptrdiff_t tt = t0; tt < t1; ++tt) acc += go[tt] * xi[tt + shift];
            gw[(o * cin + i) * k + j] += acc;
          }
          if (want_x) {
            double* gxi = gx + i * len;
            const double wj = w[j];
            for (std::ptrdiff_t tt = t0; tt < t1; ++tt) gxi[tt + shift] += wj * go[tt];
          }
        }
      }
    }
  });
}

Var matmul(Var a, Var b) {
  check_same_tape(a, b);
  const auto& as = a.shape();
  const auto& bs = b.shape();
  if (as.size() != 2 || bs.size() != 2 || as[1] != bs[0]) {
    throw ShapeMismatch("matmul on " + shape_str(as) + " and " + shape_str(bs));
  }
  const std::size_t m = as[0];
  const std::size_t kk = as[1];
  const std::size_t n = bs[1];
  const auto& av = a.value();
  const auto& bv = b.value();
  std::vector<double> y(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < kk; ++p) {
      const double aip = av[i * kk + p];
      for (std::size_t j = 0; j < n; ++j) y[i * n + j] += aip * bv[p * n + j];
    }
  }
  const std::size_t ia = a.id();
  const std::size_t ib = b.id();
  return a.tape().record({m, n}, std::move(y), {ia, ib}, [=](Tape& t, std::size_t self) {
    const auto& g = t.upstream(self);
    const auto& A = t.value_of(ia);
    const auto& B = t.value_of(ib);
    if (t.needs_grad(ia)) {
      auto& ga = t.grad_of(ia);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < kk; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * B[p * n + j];
          ga[i * kk + p] += acc;
        }
    }
    if (t.needs_grad(ib)) {
      auto& gb = t.grad_of(ib);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < kk; ++p) {
          const double aip = A[i * kk + p];
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
        }
    }
  });
}

Var mean_center(Var x) {
  const auto& xv = x.value();
  const double n = static_cast<double>(xv.size());
  const double m = std::accumulate(xv.begin(), xv.end(), 0.0) / n;
  std::vector<double> y(xv.size());
  std::transform(xv.begin(), xv.end(), y.begin(), [m](double v) { return v - m; });
  const std::size_t ix = x.id();
  return x.tape().record(x.shape(), std::move(y), {ix}, [ix, n](Tape& t, std::size_t self) {
    const auto& g = t.upstream(self);
    const double gm = std::accumulate(g.begin(), g.end(), 0.0) / n;
    auto& gx = t.grad_of(ix);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] - gm;
  });
}

Var normalize(Var x) {
  const auto& xv = x.value();
  const double s = std::accumulate(xv.begin(), xv.end(), 0.0);
  const bool floored = !(s > kNormalizeEpsilon);
  const double d = floored ? kNormalizeEpsilon : s;
  std::vector<double> y(xv.size());
  std::transform(xv.begin(), xv.end(), y.begin(), [d](double v) { return v / d; });
  const std::size_t ix = x.id();
  return x.tape().record(x.shape(), std::move(y), {ix}, [=](Tape& t, std::size_t self) {
    const auto& g = t.upstream(self);
    const auto& out = t.value_of(self);
    auto& gx = t.grad_of(ix);
    // dy_i/dx_j = delta_ij / d - y_i / d when the denominator tracks the sum.
    double gy = 0.0;
    if (!floored) {
      for (std::size_t i = 0; i < g.size(); ++i) gy += g[i] * out[i];
    }
    for (std::size_t j = 0; j < g.size(); ++j) gx[j] += (g[j] - gy) / d;
  });
}

Var project(std::shared_ptr<const std::vector<double>> matrix, std::size_t rows, Var x) {
  const std::size_t cols = x.size();
  if (!matrix || matrix->size() != rows * cols) {
    throw ShapeMismatch("project: matrix does not match " + std::to_string(rows) + "x" +
                        std::to_string(cols));
  }
  const auto& xv = x.value();
  const auto& M = *matrix;
  std::vector<double> y(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = M.data() + r * cols;
    double acc = 0.0;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * xv[c];
    y[r] = acc;
  }
  const std::size_t ix = x.id();
  return x.tape().record({rows}, std::move(y), {ix}, [=](Tape& t, std::size_t self) {
    const auto& g = t.upstream(self);
    auto& gx = t.grad_of(ix);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* row = matrix->data() + r * cols;
      const double gr = g[r];
      for (std::size_t c = 0; c < cols; ++c) gx[c] += gr * row[c];
    }
  });
}

Var slice(Var x, std::size_t offset, Shape shape) {
  const std::size_t count = element_count(shape);
  if (offset + count > x.size()) {
    throw ShapeMismatch("slice [" + std::to_string(offset) + ", " +
                        std::to_string(offset + count) + ") outside tensor of size " +
                        std::to_string(x.size()));
  }
  const auto& xv = x.value();
  std::vector<double> y(xv.begin() + static_cast<std::ptrdiff_t>(offset),
                        xv.begin() + static_cast<std::ptrdiff_t>(offset + count));
  const std::size_t ix = x.id();
  return x.tape().record(std::move(shape), std::move(y), {ix}, [=](Tape& t, std::size_t self) {
    const auto& g = t.upstream(self);
    auto& gx = t.grad_of(ix);
    for (std::size_t i = 0; i < count; ++i) gx[offset + i] += g[i];
  });
}

Var index(Var x, std::size_t i) { return slice(x, i, {1}); }

Var detach(Var x) { return x.tape().constant(x.shape(), x.value()); }

Var psd_power(Var signal, const std::shared_ptr<const SpectralProbe>& probe) {
  if (signal.size() != probe->length()) {
    throw ShapeMismatch("psd_power: probe expects length " + std::to_string(probe->length()) +
                        ", got " + std::to_string(signal.size()));
  }
  const auto rows = static_cast<std::size_t>(probe->n_classes());
  const std::shared_ptr<const std::vector<double>> cos_bank(probe, &probe->cos_bank());
  const std::shared_ptr<const std::vector<double>> sin_bank(probe, &probe->sin_bank());
  Var centered = mean_center(signal);
  Var re = project(cos_bank, rows, centered);
  Var im = project(sin_bank, rows, centered);
  return add(square(re), square(im));
}

std::vector<double> gradient(const ScalarFn& fn, const Shape& shape,
                             std::span<const double> point) {
  Tape tape;
  Var x = tape.leaf(shape, std::vector<double>(point.begin(), point.end()));
  Var y = fn(tape, x);
  tape.backward(y);
  auto g = x.grad();
  if (g.empty()) g.assign(point.size(), 0.0);
  return g;
}

double grad_check(const ScalarFn& fn, const Shape& shape, std::span<const double> point,
                  double h) {
  const auto analytic = gradient(fn, shape, point);
  std::vector<double> probe(point.begin(), point.end());
  auto eval = [&] {
    Tape tape;
    Var x = tape.constant(shape, probe);
    return fn(tape, x).item();
  };
  double worst = 0.0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + h;
    const double up = eval();
    probe[i] = saved - h;
    const double down = eval();
    probe[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    worst = std::max(worst, std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric)));
  }
  return worst;
}

}  // namespace pulse::ad

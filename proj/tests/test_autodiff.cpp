#include <cmath>
#include <limits>

#include "doctest.h"
#include "pulse/autodiff.hpp"
#include "pulse/errors.hpp"
#include "pulse/rng.hpp"
#include "pulse/signal.hpp"

using namespace pulse;
using namespace pulse::ad;

namespace {

std::vector<double> draw(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

}  // namespace

TEST_CASE("elementwise ops pass finite differences") {
  Rng rng(3);
  const auto p = draw(rng, 6, 0.2, 2.0);
  const Shape s{6};
  CHECK(grad_check([](Tape&, Var x) { return sum(tanh(x)); }, s, p) < 1e-7);
  CHECK(grad_check([](Tape&, Var x) { return sum(log(x)); }, s, p) < 1e-7);
  CHECK(grad_check([](Tape&, Var x) { return sum(sqrt(x)); }, s, p) < 1e-7);
  CHECK(grad_check([](Tape&, Var x) { return sum(square(x)); }, s, p) < 1e-7);
  CHECK(grad_check([](Tape&, Var x) { return mean(x * x / add_scalar(x, 1.0)); }, s, p) < 1e-7);
  CHECK(grad_check([](Tape&, Var x) { return sum(scale(x, 3.0) - x * x); }, s, p) < 1e-7);
  CHECK(grad_check([](Tape&, Var x) { return sum(normalize(x) * x); }, s, p) < 1e-7);
  CHECK(grad_check([](Tape&, Var x) { return sum(square(mean_center(x))); }, s, p) < 1e-7);
  CHECK(grad_check([](Tape&, Var x) { return index(x, 2) * index(x, 4); }, s, p) < 1e-7);
  CHECK(grad_check([](Tape&, Var x) { return sum(slice(x, 1, {3})); }, s, p) < 1e-7);
}

TEST_CASE("scalar broadcast in binary ops") {
  Rng rng(4);
  const auto p = draw(rng, 5, 0.5, 1.5);
  CHECK(grad_check([](Tape&, Var x) { return sum(x / sum(x)); }, {5}, p) < 1e-7);
  CHECK(grad_check([](Tape&, Var x) { return sum(sum(x) * x - x); }, {5}, p) < 1e-7);
}

TEST_CASE("relu subgradient at zero is zero") {
  const std::vector<double> p{-1.0, 0.0, 2.0};
  const auto g = gradient([](Tape&, Var x) { return sum(relu(x)); }, {3}, p);
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 0.0);
  CHECK(g[2] == 1.0);
}

TEST_CASE("conv1d_same matches a direct loop and its gradient") {
  Rng rng(5);
  const std::size_t cin = 2, cout = 3, k = 5, t = 9;
  const auto xv = draw(rng, cin * t);
  const auto wv = draw(rng, cout * cin * k);
  const auto bv = draw(rng, cout);
  Tape tape;
  Var x = tape.constant({cin, t}, xv);
  Var w = tape.constant({cout, cin, k}, wv);
  Var b = tape.constant({cout}, bv);
  const auto y = conv1d_same(x, w, b).value();
  const long half = static_cast<long>(k / 2);
  for (std::size_t o = 0; o < cout; ++o) {
    for (std::size_t ti = 0; ti < t; ++ti) {
      double acc = bv[o];
      for (std::size_t i = 0; i < cin; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          const long src = static_cast<long>(ti) + static_cast<long>(j) - half;
          if (src < 0 || src >= static_cast<long>(t)) continue;
          acc += wv[(o * cin + i) * k + j] * xv[i * t + static_cast<std::size_t>(src)];
        }
      }
      CHECK(y[o * t + ti] == doctest::Approx(acc).epsilon(1e-12));
    }
  }

  std::vector<double> all = xv;
  all.insert(all.end(), wv.begin(), wv.end());
  all.insert(all.end(), bv.begin(), bv.end());
  auto fn = [&](Tape&, Var p) {
    Var xs = slice(p, 0, {cin, t});
    Var ws = slice(p, cin * t, {cout, cin, k});
    Var bs = slice(p, cin * t + cout * cin * k, {cout});
    return sum(square(tanh(conv1d_same(xs, ws, bs))));
  };
  CHECK(grad_check(fn, {all.size()}, all) < 1e-7);
}

TEST_CASE("matmul and project gradients") {
  Rng rng(6);
  const auto p = draw(rng, 12);
  auto fn = [](Tape& tape, Var x) {
    Var a = slice(x, 0, {2, 3});
    Var b = slice(x, 6, {3, 2});
    (void)tape;
    return sum(square(matmul(a, b)));
  };
  CHECK(grad_check(fn, {12}, p) < 1e-7);

  auto m = std::make_shared<const std::vector<double>>(draw(rng, 4 * 12));
  CHECK(grad_check([&](Tape&, Var x) { return sum(square(project(m, 4, x))); }, {12}, p) < 1e-7);
}

TEST_CASE("psd_power agrees with psd_probe and differentiates") {
  Rng rng(7);
  const auto x = draw(rng, 120);
  const BandConfig band;
  const auto probe = probe_for(120, 30.0, band);
  Tape tape;
  Var v = tape.constant({120}, x);
  const auto got = psd_power(v, probe).value();
  const auto want = psd_probe(x, 30.0, band).power;
  REQUIRE(got.size() == want.size());
  for (std::size_t c = 0; c < want.size(); ++c) {
    CHECK(got[c] == doctest::Approx(want[c]).epsilon(1e-10));
  }
  auto fn = [&](Tape&, Var s) { return log(index(normalize(psd_power(s, probe)), 40)); };
  CHECK(grad_check(fn, {120}, x) < 1e-6);
}

TEST_CASE("detach blocks gradient flow") {
  const std::vector<double> p{0.5, -0.25};
  const auto g = gradient([](Tape&, Var x) { return sum(x * detach(x)); }, {2}, p);
  CHECK(g[0] == doctest::Approx(0.5));
  CHECK(g[1] == doctest::Approx(-0.25));
}

TEST_CASE("tape records in creation order and runs backward once") {
  Tape tape;
  Var a = tape.leaf({1}, {2.0});
  Var b = tape.leaf({1}, {3.0});
  Var c = a * b;
  Var d = c + a;
  CHECK(a.id() < b.id());
  CHECK(b.id() < c.id());
  CHECK(c.id() < d.id());
  tape.backward(d);
  CHECK(a.grad()[0] == doctest::Approx(4.0));
  CHECK(b.grad()[0] == doctest::Approx(2.0));
  CHECK_THROWS_AS(tape.backward(d), ShapeMismatch);
}

TEST_CASE("shape and finiteness errors") {
  Tape tape;
  Var a = tape.leaf({3}, {1.0, 2.0, 3.0});
  Var b = tape.leaf({2}, {1.0, 2.0});
  CHECK_THROWS_AS(a + b, ShapeMismatch);
  CHECK_THROWS_AS(tape.leaf({4}, {1.0}), ShapeMismatch);
  CHECK_THROWS_AS(tape.backward(a), ShapeMismatch);
  Var z = tape.constant({1}, {0.0});
  CHECK_THROWS_AS(log(z), NonFiniteValue);
  Tape other;
  Var o = other.leaf({3}, {1.0, 1.0, 1.0});
  CHECK_THROWS_AS(a * o, ShapeMismatch);
}

TEST_CASE("normalize floors a zero sum") {
  Tape tape;
  Var z = tape.constant({3}, {0.0, 0.0, 0.0});
  const auto v = normalize(z).value();
  for (double x : v) CHECK(std::isfinite(x));
}

TEST_CASE("backward is linear") {
  Rng rng(9);
  const auto p = draw(rng, 8, 0.3, 1.5);
  const Shape s{8};
  const ScalarFn f = [](Tape&, Var x) { return sum(tanh(x) * x); };
  const ScalarFn g = [](Tape&, Var x) { return mean(log(x)) + index(x, 3) * index(x, 5); };
  const double a = 2.5, b = -0.75;
  const auto gf = gradient(f, s, p);
  const auto gg = gradient(g, s, p);
  const auto gh = gradient([&](Tape& t, Var x) { return scale(f(t, x), a) + scale(g(t, x), b); }, s, p);
  for (std::size_t i = 0; i < p.size(); ++i) CHECK(gh[i] == doctest::Approx(a * gf[i] + b * gg[i]).epsilon(1e-10));
}

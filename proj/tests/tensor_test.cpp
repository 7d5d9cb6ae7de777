#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "dmn/tensor.hpp"
#include "support/gradcheck.hpp"

using dmn::Graph;
using dmn::Parameter;
using dmn::Tensor;
using dmn::Val;

namespace {

std::vector<double> random_values(std::size_t n, std::mt19937& rng,
                                  double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

Parameter<double> random_param(const std::string& name,
                               std::vector<std::size_t> shape,
                               std::mt19937& rng) {
  auto n = Tensor<double>::shape_numel(shape);
  return Parameter<double>(name,
                           Tensor<double>(std::move(shape), random_values(n, rng)));
}

// Independent triple-loop product used as the matmul oracle.
Tensor<double> naive_matmul(const Tensor<double>& a, const Tensor<double>& b) {
  auto out = Tensor<double>::zeros({a.shape[0], b.shape[1]});
  for (std::size_t i = 0; i < a.shape[0]; ++i)
    for (std::size_t j = 0; j < b.shape[1]; ++j)
      for (std::size_t p = 0; p < a.shape[1]; ++p)
        out.at(i, j) += a.at(i, p) * b.at(p, j);
  return out;
}

}  // namespace

TEST_CASE("tensor shape and scalar basics") {
  auto s = Tensor<double>::scalar(4.5);
  CHECK(s.numel() == 1);
  CHECK(s.rank() == 0);
  CHECK(s.item() == 4.5);

  auto m = Tensor<double>::matrix(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK(m.numel() == 6);
  CHECK(m.at(1, 2) == 6.0);
  CHECK_THROWS_AS(Tensor<double>({2, 2}, {1, 2, 3}), dmn::ShapeError);
}

TEST_CASE("matmul identity and scalar cases") {
  Graph<double> g;
  auto eye = g.input(Tensor<double>::matrix(2, 2, {1, 0, 0, 1}));
  auto a = g.input(Tensor<double>::matrix(2, 2, {1, 2, 3, 4}));
  auto prod = matmul(eye, a);
  CHECK(g.value(prod).data == std::vector<double>{1, 2, 3, 4});

  auto x = g.input(Tensor<double>::matrix(1, 1, {2}));
  auto y = g.input(Tensor<double>::matrix(1, 1, {3}));
  CHECK(g.value(matmul(x, y)).item() == 6.0);
}

TEST_CASE("matmul matches triple-loop oracle") {
  std::mt19937 rng(71);
  Graph<double> g;
  auto A = Tensor<double>({5, 4}, random_values(20, rng));
  auto B = Tensor<double>({4, 3}, random_values(12, rng));
  auto got = g.value(matmul(g.input(A), g.input(B)));
  auto want = naive_matmul(A, B);
  for (std::size_t i = 0; i < want.numel(); ++i) {
    CHECK(std::abs(got[i] - want[i]) < 1e-12);
  }
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Graph<double> g;
  auto a = g.input(Tensor<double>::zeros({2, 3}));
  auto b = g.input(Tensor<double>::zeros({4, 2}));
  CHECK_THROWS_WITH(matmul(a, b), Catch::Matchers::ContainsSubstring("(2x3)") &&
                                      Catch::Matchers::ContainsSubstring("(4x2)"));
}

TEST_CASE("matmul associativity on random conformable triples") {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    Graph<double> g;
    auto a = g.input(Tensor<double>({3, 4}, random_values(12, rng)));
    auto b = g.input(Tensor<double>({4, 5}, random_values(20, rng)));
    auto c = g.input(Tensor<double>({5, 2}, random_values(10, rng)));
    auto left = g.value(matmul(matmul(a, b), c));
    auto right = g.value(matmul(a, matmul(b, c)));
    for (std::size_t i = 0; i < left.numel(); ++i) {
      CHECK(std::abs(left[i] - right[i]) < 1e-9);
    }
  }
}

TEST_CASE("elementwise basics") {
  Graph<double> g;
  auto a = g.input(Tensor<double>::vector({1, 2}));
  auto b = g.input(Tensor<double>::vector({3, 4}));
  CHECK(g.value(a * b).data == std::vector<double>{3, 8});
  CHECK(g.value(a + b).data == std::vector<double>{4, 6});
  CHECK(g.value(a - b).data == std::vector<double>{-2, -2});

  auto v = g.input(Tensor<double>::vector({0.3, -1.25, 7.0}));
  CHECK(g.value(absdiff(v, v)).data == std::vector<double>{0, 0, 0});

  auto bad = g.input(Tensor<double>::vector({1, 2, 3}));
  CHECK_THROWS_AS(a + bad, dmn::ShapeError);
  CHECK_THROWS_AS(absdiff(a, bad), dmn::ShapeError);
}

TEST_CASE("scalar broadcast in elementwise ops") {
  Graph<double> g;
  auto v = g.input(Tensor<double>::vector({1, 2, 3}));
  auto s = g.input(Tensor<double>::scalar(2));
  CHECK(g.value(v * s).data == std::vector<double>{2, 4, 6});
  CHECK(g.value(s * v).data == std::vector<double>{2, 4, 6});
  CHECK(g.value(v + s).data == std::vector<double>{3, 4, 5});
  CHECK(g.value(affine(v, 2.0, 1.0)).data == std::vector<double>{3, 5, 7});
  CHECK(g.value(1.0 - s).item() == -1.0);
}

TEST_CASE("add gradient is ones, against finite differences") {
  std::mt19937 rng(11);
  auto a = random_param("a", {4}, rng);
  auto b = random_param("b", {4}, rng);
  auto build = [&](Graph<double>& g) { return sum(g.param(a) + g.param(b)); };
  auto rep = dmn_test::check_gradients({&a, &b}, build);
  CHECK(rep.max_err < 1e-6);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(a.grad[i] == 1.0);
    CHECK(b.grad[i] == 1.0);
  }
}

TEST_CASE("activation fixed points") {
  Graph<double> g;
  auto zero = g.input(Tensor<double>::scalar(0));
  CHECK(g.value(sigmoid(zero)).item() == 0.5);
  CHECK(g.value(tanh_(zero)).item() == 0.0);

  auto u = g.input(Tensor<double>::vector({0, 0, 0}));
  auto sm = g.value(softmax(u));
  for (auto v : sm.data) CHECK(v == Catch::Approx(1.0 / 3.0).margin(1e-15));

  auto big = g.input(Tensor<double>::vector({1000, 1000}));
  auto sb = g.value(softmax(big));
  CHECK(sb[0] == Catch::Approx(0.5).margin(1e-12));
  CHECK(sb[1] == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("non-finite input raises a numeric error") {
  Graph<double> g;
  CHECK_THROWS_AS(
      g.input(Tensor<double>::vector({1.0, std::nan("")})),
      dmn::NumericError);
  CHECK_THROWS_AS(
      g.input(Tensor<double>::scalar(std::numeric_limits<double>::infinity())),
      dmn::NumericError);
}

TEST_CASE("softmax rows sum to one and are shift invariant") {
  std::mt19937 rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    Graph<double> g;
    auto vals = random_values(6, rng, -5.0, 5.0);
    auto x = g.input(Tensor<double>::vector(vals));
    auto y = g.value(softmax(x));
    double total = 0;
    for (auto v : y.data) total += v;
    CHECK(std::abs(total - 1.0) < 1e-12);

    for (auto& v : vals) v += 17.25;
    auto y2 = g.value(softmax(g.input(Tensor<double>::vector(vals))));
    for (std::size_t i = 0; i < y.numel(); ++i) {
      CHECK(std::abs(y[i] - y2[i]) < 1e-9);
    }
  }
}

TEST_CASE("softmax normalizes each matrix row") {
  Graph<double> g;
  auto m = g.input(Tensor<double>::matrix(2, 3, {1, 2, 3, -1, 0, 1}));
  auto y = g.value(softmax(m));
  CHECK(std::abs(y.at(0, 0) + y.at(0, 1) + y.at(0, 2) - 1.0) < 1e-12);
  CHECK(std::abs(y.at(1, 0) + y.at(1, 1) + y.at(1, 2) - 1.0) < 1e-12);
  // both rows have the same shifted logits, so identical probabilities
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(y.at(0, j) == Catch::Approx(y.at(1, j)).margin(1e-12));
  }
}

TEST_CASE("cross entropy fixed values") {
  Graph<double> g;
  auto uniform = g.input(Tensor<double>::vector({0.7, 0.7, 0.7, 0.7, 0.7}));
  CHECK(g.value(cross_entropy(uniform, 2)).item() ==
        Catch::Approx(std::log(5.0)).margin(1e-12));

  auto sharp = g.input(Tensor<double>::vector({40, -40}));
  CHECK(g.value(cross_entropy(sharp, 0)).item() ==
        Catch::Approx(0.0).margin(1e-12));

  CHECK_THROWS_AS(cross_entropy(uniform, 5), dmn::IndexError);
}

TEST_CASE("cross entropy gradient equals softmax minus one-hot") {
  std::mt19937 rng(37);
  auto logits = random_param("logits", {6}, rng);
  const std::size_t target = 4;
  auto build = [&](Graph<double>& g) {
    return cross_entropy(g.param(logits), target);
  };
  auto rep = dmn_test::check_gradients({&logits}, build);
  CHECK(rep.max_err < 1e-6);

  // closed form
  double mx = *std::max_element(logits.value.data.begin(),
                                logits.value.data.end());
  double z = 0;
  for (auto v : logits.value.data) z += std::exp(v - mx);
  for (std::size_t i = 0; i < 6; ++i) {
    const double p = std::exp(logits.value[i] - mx) / z;
    const double want = p - (i == target ? 1.0 : 0.0);
    CHECK(logits.grad[i] == Catch::Approx(want).margin(1e-12));
  }
}

TEST_CASE("backward on a product leaf pair") {
  Parameter<double> x("x", Tensor<double>::scalar(3));
  Parameter<double> y("y", Tensor<double>::scalar(5));
  Graph<double> g;
  auto root = g.param(x) * g.param(y);
  g.backward(root);
  CHECK(x.grad.item() == 5.0);
  CHECK(y.grad.item() == 3.0);
}

TEST_CASE("backward of sum gives ones") {
  Parameter<double> v("v", Tensor<double>::vector({1, -2, 0.5}));
  Graph<double> g;
  g.backward(sum(g.param(v)));
  CHECK(v.grad.data == std::vector<double>{1, 1, 1});
}

TEST_CASE("backward requires a scalar root") {
  Graph<double> g;
  auto v = g.input(Tensor<double>::vector({1, 2}));
  CHECK_THROWS_AS(g.backward(v), dmn::ContractError);
}

TEST_CASE("gradients accumulate across shared uses") {
  Parameter<double> x("x", Tensor<double>::vector({2, 3}));
  Graph<double> g;
  auto xv = g.param(x);
  auto root = sum(xv) + sum(xv * xv);  // d/dx = 1 + 2x
  g.backward(root);
  CHECK(x.grad[0] == Catch::Approx(5.0));
  CHECK(x.grad[1] == Catch::Approx(7.0));
}

TEST_CASE("repeated backward on fresh graphs is deterministic") {
  std::mt19937 rng(99);
  auto w = random_param("w", {3, 3}, rng);
  auto v = random_param("v", {3}, rng);
  auto run = [&]() {
    w.zero_grad();
    v.zero_grad();
    Graph<double> g;
    auto root = sum(tanh_(matmul(g.param(w), g.param(v))));
    g.backward(root);
    auto out = w.grad.data;
    out.insert(out.end(), v.grad.data.begin(), v.grad.data.end());
    return out;
  };
  CHECK(run() == run());
}

TEST_CASE("concat, slice and column round data and gradients correctly") {
  std::mt19937 rng(3);
  auto a = random_param("a", {3}, rng);
  auto b = random_param("b", {2}, rng);
  auto m = random_param("m", {3, 4}, rng);
  {
    Graph<double> g;
    auto cat = dmn::concat<double>({g.param(a), g.param(b)});
    CHECK(g.value(cat).numel() == 5);
    CHECK(g.value(cat)[3] == b.value[0]);
    auto sl = g.value(slice(cat, 1, 3));
    CHECK(sl[0] == a.value[1]);
    CHECK(sl[2] == b.value[0]);
    auto col = g.value(column(g.param(m), 2));
    CHECK(col[1] == m.value.at(1, 2));
    CHECK_THROWS_AS(column(g.param(m), 4), dmn::IndexError);
    CHECK_THROWS_AS(slice(cat, 4, 3), dmn::IndexError);
  }
  auto build = [&](Graph<double>& g) {
    auto cat = dmn::concat<double>({g.param(a), g.param(b), column(g.param(m), 1)});
    return sum(tanh_(cat) * tanh_(cat)) + dot(g.param(a), slice(cat, 2, 3));
  };
  auto rep = dmn_test::check_gradients({&a, &b, &m}, build);
  CHECK(rep.max_err < 1e-6);
}

TEST_CASE("randomized gradient checks for every primitive") {
  std::mt19937 rng(2024);
  auto A = random_param("A", {3, 4}, rng);
  auto B = random_param("B", {4, 2}, rng);
  auto u = random_param("u", {4}, rng);
  auto v = random_param("v", {4}, rng);
  auto s = random_param("s", {}, rng);

  struct Case {
    const char* name;
    std::function<Val<double>(Graph<double>&)> build;
  };
  const std::vector<Case> cases = {
      {"matmul_mm", [&](Graph<double>& g) {
         return sum(matmul(g.param(A), g.param(B)));
       }},
      {"matmul_mv", [&](Graph<double>& g) {
         return sum(matmul(g.param(A), g.param(u)));
       }},
      {"add", [&](Graph<double>& g) { return sum(g.param(u) + g.param(v)); }},
      {"sub", [&](Graph<double>& g) {
         return dot(g.param(u) - g.param(v), g.param(u));
       }},
      {"hadamard", [&](Graph<double>& g) {
         return sum(g.param(u) * g.param(v));
       }},
      {"hadamard_scalar", [&](Graph<double>& g) {
         return sum(g.param(u) * g.param(s));
       }},
      {"absdiff", [&](Graph<double>& g) {
         return sum(absdiff(g.param(u), g.param(v)));
       }},
      {"affine", [&](Graph<double>& g) {
         return sum(affine(g.param(u), -2.5, 0.75));
       }},
      {"sigmoid", [&](Graph<double>& g) {
         return sum(sigmoid(g.param(u)) * g.param(v));
       }},
      {"tanh", [&](Graph<double>& g) {
         return sum(tanh_(g.param(u)) * g.param(v));
       }},
      {"softmax", [&](Graph<double>& g) {
         return sum(softmax(g.param(u)) * g.param(v));
       }},
      {"dot", [&](Graph<double>& g) { return dot(g.param(u), g.param(v)); }},
      {"cross_entropy", [&](Graph<double>& g) {
         return cross_entropy(g.param(u), 1);
       }},
  };
  for (const auto& c : cases) {
    INFO(c.name);
    auto rep = dmn_test::check_gradients({&A, &B, &u, &v, &s}, c.build);
    INFO(rep.worst << " analytic=" << rep.analytic_at_worst
                   << " numeric=" << rep.numeric_at_worst);
    CHECK(rep.max_err < 1e-6);
  }
}

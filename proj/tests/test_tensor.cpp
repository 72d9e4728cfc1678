#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dyno/kernels.hpp"
#include "dyno/rng.hpp"
#include "dyno/tensor.hpp"

using namespace dyno;

namespace {

LayerSpec dense_spec(std::size_t in, std::size_t out, bool bias, const char* name = "L") {
  return LayerSpec{LayerSpec::Kind::Dense, in, out, bias, name};
}

}  // namespace

TEST_CASE("dense_forward flop count follows the MAC=2 convention") {
  // 4->8 with bias: 2*4*8 + 8 = 72
  Tensor W({8, 4});
  Tensor b({8});
  Tensor x({4});
  auto r = dense_forward(dense_spec(4, 8, true), W, &b, x);
  CHECK(r.flops == 72);
  CHECK(r.output.numel() == 8);

  // 1->1 no bias, W=[[2]], x=[3] -> [6], flops 2
  Tensor W2({1, 1}, {2.0});
  Tensor x2 = Tensor::vector({3.0});
  auto r2 = dense_forward(dense_spec(1, 1, false), W2, nullptr, x2);
  CHECK(r2.output.at(0) == 6.0);
  CHECK(r2.flops == 2);
}

TEST_CASE("dense_forward with zero weights and bias yields zeros") {
  Tensor W({8, 4});
  Tensor b({8});
  Tensor x = Tensor::vector({1.0, -2.0, 3.0, 4.0});
  auto r = dense_forward(dense_spec(4, 8, true), W, &b, x);
  for (double v : r.output.data) CHECK(v == 0.0);
}

TEST_CASE("dense_forward rejects shape mismatches naming the layer") {
  Tensor W({8, 4});
  Tensor b({8});
  Tensor x({5});
  CHECK_THROWS_WITH(dense_forward(dense_spec(4, 8, true, "probe"), W, &b, x),
                    Catch::Matchers::ContainsSubstring("probe"));
  Tensor Wbad({4, 8});
  Tensor x4({4});
  CHECK_THROWS_AS(dense_forward(dense_spec(4, 8, true), Wbad, &b, x4), std::invalid_argument);
  CHECK_THROWS_AS(dense_forward(dense_spec(4, 8, true), W, nullptr, x4), std::invalid_argument);
}

TEST_CASE("softmax matches closed forms and sums to one") {
  auto r = softmax_forward(Tensor::vector({0.0, 0.0}));
  CHECK(r.output.at(0) == Catch::Approx(0.5).margin(1e-15));
  CHECK(r.output.at(1) == Catch::Approx(0.5).margin(1e-15));
  CHECK(r.flops == 7);  // 4*2 - 1

  auto r2 = softmax_forward(Tensor::vector({std::log(1.0), std::log(3.0)}));
  CHECK(r2.output.at(0) == Catch::Approx(0.25).margin(1e-12));
  CHECK(r2.output.at(1) == Catch::Approx(0.75).margin(1e-12));

  Rng rng(123);
  for (int it = 0; it < 200; ++it) {
    std::size_t n = 1 + rng.next_index(9);
    Tensor v({n});
    for (double& d : v.data) d = rng.uniform(-30.0, 30.0);
    auto s = softmax_forward(v);
    double sum = 0.0;
    for (double p : s.output.data) {
      CHECK(p > 0.0);
      sum += p;
    }
    CHECK(sum == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("relu clamps negatives and counts one flop per element") {
  auto r = relu_forward(Tensor::vector({-1.0, 2.0}));
  CHECK(r.output.data == std::vector<double>{0.0, 2.0});
  CHECK(r.flops == 2);
  CHECK_THROWS_AS(relu_forward(Tensor{}), std::invalid_argument);
}

TEST_CASE("cross_entropy closed forms") {
  CHECK(cross_entropy(Tensor::vector({1.0, 0.0}), 0) == Catch::Approx(0.0).margin(1e-9));
  CHECK(cross_entropy(Tensor::vector({0.5, 0.5}), 1) ==
        Catch::Approx(std::log(2.0)).margin(1e-9));
  CHECK(cross_entropy(Tensor::vector({0.25, 0.75}), 0) ==
        Catch::Approx(std::log(4.0)).margin(1e-9));
  CHECK(cross_entropy(Tensor::vector({0.0, 1.0}), 0) >= 0.0);
  CHECK_THROWS_AS(cross_entropy(Tensor::vector({0.5, 0.5}), 2), std::invalid_argument);
}

TEST_CASE("sgd_step arithmetic and edge cases") {
  std::vector<Tensor> p{Tensor::vector({1.0})};
  std::vector<Tensor> g{Tensor::vector({2.0})};
  sgd_step(p, g, 0.5);
  CHECK(p[0].at(0) == 0.0);

  std::vector<Tensor> p2{Tensor::vector({1.0, -1.0})};
  std::vector<Tensor> g0{Tensor::vector({0.0, 0.0})};
  sgd_step(p2, g0, 0.3);
  CHECK(p2[0].data == std::vector<double>{1.0, -1.0});

  // two steps with constant g equal one step at summed displacement
  std::vector<Tensor> a{Tensor::vector({5.0})}, b2{Tensor::vector({5.0})};
  std::vector<Tensor> g1{Tensor::vector({3.0})};
  sgd_step(a, g1, 0.1);
  sgd_step(a, g1, 0.1);
  sgd_step(b2, g1, 0.2);
  CHECK(a[0].at(0) == Catch::Approx(b2[0].at(0)).margin(1e-15));

  std::vector<Tensor> bad{Tensor::vector({1.0, 2.0})};
  CHECK_THROWS_AS(sgd_step(bad, g1, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(sgd_step(a, g1, 0.0), std::invalid_argument);
}

TEST_CASE("sigmoid kernel is finite at extremes") {
  auto r = sigmoid_forward(Tensor::vector({-1000.0, 0.0, 1000.0}));
  CHECK(r.output.at(0) == 0.0);
  CHECK(r.output.at(1) == 0.5);
  CHECK(r.output.at(2) == 1.0);
  CHECK(r.flops == 9);
}

TEST_CASE("argmax breaks ties toward the lowest index") {
  CHECK(argmax(Tensor::vector({1.0, 1.0, 1.0})) == 0);
  CHECK(argmax(Tensor::vector({0.0, 2.0, 2.0})) == 1);
}

TEST_CASE("determinism: identical inputs give bit-identical outputs") {
  Rng rng(99);
  Tensor W({4, 4});
  for (double& v : W.data) v = rng.uniform(-1.0, 1.0);
  Tensor b({4});
  for (double& v : b.data) v = rng.uniform(-1.0, 1.0);
  Tensor x({4});
  for (double& v : x.data) v = rng.uniform(-1.0, 1.0);
  auto r1 = dense_forward(dense_spec(4, 4, true), W, &b, x);
  auto r2 = dense_forward(dense_spec(4, 4, true), W, &b, x);
  CHECK(r1.output == r2.output);
  CHECK(r1.flops == r2.flops);
  auto s1 = softmax_forward(r1.output);
  auto s2 = softmax_forward(r2.output);
  CHECK(s1.output == s2.output);
}

TEST_CASE("splitmix-based rng is stable and seed derivation separates labels") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  CHECK(derive_seed(1, "model-init") != derive_seed(1, "dataset"));
  CHECK(derive_seed(1, "model-init") == derive_seed(1, "model-init"));
  CHECK(derive_seed(1, "model-init") != derive_seed(2, "model-init"));
}

#include <cmath>

#include "doctest.h"
#include "hanet/error.hpp"
#include "hanet/ops.hpp"
#include "hanet/param_store.hpp"
#include "support.hpp"

using namespace hanet;
using T = Tensor<double>;

TEST_CASE("softmax of a constant vector is uniform") {
  const T x({3}, {0.0, 0.0, 0.0});
  const T y = ops::softmax(x, 0);
  for (std::size_t i = 0; i < 3; ++i) CHECK(y.at(i) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("sigmoid of zero") {
  CHECK(ops::sigmoid(T::scalar(0.0)).item() == doctest::Approx(0.5));
}

TEST_CASE("same-padded conv keeps the temporal length") {
  Rng rng(1);
  const T x = testing::uniform({7, 3}, rng);
  const T w = testing::uniform({5, 3, 2}, rng);
  const T y = ops::conv1d(x, w, T::full({2}, 0.0));
  CHECK(y.shape() == Shape{7, 2});

  const T one = testing::uniform({1, 3}, rng);
  CHECK(ops::conv1d(one, w, T::full({2}, 0.0)).shape() == Shape{1, 2});
}

TEST_CASE("conv with an even kernel is rejected") {
  Rng rng(2);
  const T x = testing::uniform({7, 3}, rng);
  const T w = testing::uniform({4, 3, 2}, rng);
  CHECK_THROWS_AS(ops::conv1d(x, w, T::full({2}, 0.0)), ShapeError);
}

TEST_CASE("shape errors name the op and both shapes") {
  const T a({2, 3}, std::vector<double>(6, 1.0));
  const T b({4, 2}, std::vector<double>(8, 1.0));
  try {
    ops::matmul(a, b);
    FAIL("matmul accepted incompatible shapes");
  } catch (const ShapeError& e) {
    const std::string what = e.what();
    CHECK(what.find("matmul") != std::string::npos);
    CHECK(what.find("[2, 3]") != std::string::npos);
    CHECK(what.find("[4, 2]") != std::string::npos);
  }
}

TEST_CASE("eval-mode batch norm centres a channel at its running mean") {
  const T x({3, 1}, {2.5, 2.5, 2.5});
  T mean({1}, std::vector<double>{2.5});
  T var({1}, std::vector<double>{4.0});
  ops::BatchNormOptions options;
  options.training = false;
  const T y = ops::batch_norm(x, T::full({1}, 3.0), T::full({1}, 0.0), mean, var, options);
  for (std::size_t i = 0; i < 3; ++i) CHECK(y.at(i) == doctest::Approx(0.0));
}

TEST_CASE("backward of sum(W*W)") {
  const T w({2}, {1.0, 2.0}, true);
  const T loss = ops::sum(ops::mul(w, w));
  loss.backward();
  CHECK(w.grad()[0] == doctest::Approx(2.0));
  CHECK(w.grad()[1] == doctest::Approx(4.0));

  SUBCASE("a second backward accumulates") {
    loss.backward();
    CHECK(w.grad()[0] == 4.0);
    CHECK(w.grad()[1] == 8.0);
  }
}

TEST_CASE("backward needs a scalar") {
  const T w({2}, {1.0, 2.0}, true);
  CHECK_THROWS(ops::mul(w, w).backward());
}

TEST_CASE("no-grad guard stops recording") {
  const T w({2}, {1.0, 2.0}, true);
  T y;
  {
    NoGradGuard guard;
    y = ops::sum(ops::mul(w, w));
  }
  CHECK_FALSE(y.requires_grad());
  CHECK(GradMode::enabled());
}

TEST_CASE("first Adam step moves by about lr") {
  ParamStore<double> store;
  T p = store.add_parameter("p", T({1}, std::vector<double>{1.0}, true));
  store.zero_grad();
  p.mutable_grad()[0] = 1.0;
  AdamOptions options;
  options.lr = 0.1;
  adam_step(store, options);
  CHECK(p.at(0) == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(store.step() == 1);
}

TEST_CASE("Adam leaves a parameter with zero gradient alone") {
  ParamStore<double> store;
  T p = store.add_parameter("p", T({2}, {1.0, -3.0}, true));
  store.zero_grad();
  adam_step(store, AdamOptions{});
  CHECK(p.at(0) == 1.0);
  CHECK(p.at(1) == -3.0);
}

TEST_CASE("Adam rejects a parameter without a gradient buffer") {
  ParamStore<double> store;
  store.add_parameter("p", T({1}, std::vector<double>{1.0}, true));
  CHECK_THROWS(adam_step(store, AdamOptions{}));
}

TEST_CASE("identical seeds give bit-identical Adam trajectories") {
  auto trajectory = [] {
    ParamStore<double> store;
    Rng rng(5);
    T w = store.glorot("w", {3, 2}, 3, 2, rng);
    const T x = testing::uniform({4, 3}, rng, -1.0, 1.0, false);
    std::vector<double> out;
    for (int step = 0; step < 10; ++step) {
      store.zero_grad();
      ops::sum(ops::tanh(ops::matmul(x, w))).backward();
      adam_step(store, AdamOptions{});
      out.insert(out.end(), w.values().begin(), w.values().end());
    }
    return out;
  };
  CHECK(trajectory() == trajectory());
}

TEST_CASE("parameter names are unique") {
  ParamStore<double> store;
  store.add_parameter("w", T({1}, std::vector<double>{0.0}, true));
  CHECK_THROWS_AS(store.add_parameter("w", T({1}, std::vector<double>{0.0}, true)), ConfigError);
  CHECK_THROWS_AS(store.add_buffer("w", T({1}, std::vector<double>{0.0})), ConfigError);
}

TEST_CASE("gradient checker catches a wrong backward") {
  Rng rng(9);
  const T x = testing::away_from_zero({4}, rng);
  // Square with a backward that forgets the factor of two.
  auto bad_square = [](const T& in) {
    std::vector<double> v(in.values().begin(), in.values().end());
    for (auto& e : v) e *= e;
    return T::make_result(
        in.shape(), v, {in},
        [](T::NodeType& node) {
          auto& parent = *node.parents[0];
          parent.ensure_grad();
          for (std::size_t i = 0; i < node.grad.size(); ++i) {
            parent.grad[i] += node.grad[i] * parent.data[i];
          }
        },
        "bad_square");
  };
  const auto report = testing::grad_check([&] { return ops::sum(bad_square(x)); }, {x});
  CHECK_FALSE(report.ok);
  const auto good = testing::grad_check([&] { return ops::sum(ops::mul(x, x)); }, {x});
  CHECK(good.ok);
}

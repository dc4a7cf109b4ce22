#include <doctest.h>

#include <cmath>
#include <numeric>

#include "codecsep/autodiff.hpp"
#include "codecsep/grad_check.hpp"
#include "codecsep/nn.hpp"
#include "codecsep/params.hpp"

using namespace codecsep;
using ad::Shape;

TEST_CASE("snake values") {
  ad::TapeT<double> t;
  auto x = t.leaf({3}, {0.0, M_PI / 2, -M_PI / 2}, false);
  auto y = t.snake(x);
  CHECK(t.val(y)[0] == doctest::Approx(0.0));
  CHECK(t.val(y)[1] == doctest::Approx(M_PI / 2 + 1.0));   // sin^2 = 1
  CHECK(t.val(y)[2] == doctest::Approx(-M_PI / 2 + 1.0));  // snake is not odd
}

TEST_CASE("backward of sum is all-ones") {
  ad::Tape t;
  auto x = t.leaf({2, 3}, {1, 2, 3, 4, 5, 6}, true);
  t.backward(t.sum(x));
  for (float g : t.grad(x)) CHECK(g == 1.0f);
}

TEST_CASE("backward of sum(snake(x)) at zero is all-ones") {
  ad::Tape t;
  auto x = t.leaf({4}, {0, 0, 0, 0}, true);
  t.backward(t.sum(t.snake(x)));
  for (float g : t.grad(x)) CHECK(g == 1.0f);  // 1 + sin(0)
}

TEST_CASE("gradient accumulates over reuse") {
  ad::Tape t;
  auto x = t.leaf({2}, {3.0f, -1.0f}, true);
  // loss = sum(x*x + x) -> d/dx = 2x + 1
  t.backward(t.sum(t.add(t.mul(x, x), x)));
  CHECK(t.grad(x)[0] == doctest::Approx(7.0f));
  CHECK(t.grad(x)[1] == doctest::Approx(-1.0f));
}

TEST_CASE("backward twice is an error") {
  ad::Tape t;
  auto x = t.leaf({2}, {1, 2}, true);
  auto l = t.sum(x);
  t.backward(l);
  CHECK_THROWS_AS(t.backward(l), std::runtime_error);
}

TEST_CASE("non-finite values are rejected at op boundaries") {
  ad::Tape t;
  CHECK_THROWS_AS(t.leaf({1}, {std::nanf("")}, false), std::runtime_error);
  auto x = t.leaf({1}, {0.0f}, false);
  CHECK_THROWS_AS(t.log10(x), std::runtime_error);  // log10(0) -> -inf
}

TEST_CASE("shape mismatches are rejected") {
  ad::Tape t;
  auto a = t.leaf({2, 2}, {1, 2, 3, 4}, false);
  auto b = t.leaf({4}, {1, 2, 3, 4}, false);
  CHECK_THROWS_AS(t.add(a, b), std::invalid_argument);
  CHECK_THROWS_AS(t.matmul(a, b), std::invalid_argument);
}

TEST_CASE("finite differences validate every registered op over 5 seeds") {
  for (const std::string& op : ad::grad_check_ops()) {
    for (uint64_t seed = 0; seed < 5; ++seed) {
      const ad::GradCheckReport r = ad::grad_check(op, {}, 1e-3, seed);
      INFO(op << " seed " << seed << ": " << r.detail);
      CHECK(r.pass);
    }
  }
}

TEST_CASE("grad_check flags a corrupted backward (negative control)") {
  ad::GradCheckCase bad;
  bad.make_inputs = [](Rng& rng, const std::vector<Shape>&) {
    ad::TensorT<double> t = ad::TensorT<double>::zeros({3, 3});
    for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
    return std::vector<ad::TensorT<double>>{t};
  };
  bad.build = [](ad::TapeT<double>& t, const std::vector<ad::TapeT<double>::Id>& in, Rng&) {
    // sin forward with a wrong scale folded in afterwards: the analytic
    // gradient of 2*sum(sin(x)) is 2*cos(x), but we report sum(sin(x))'s
    // forward, so FD sees cos(x) while backward reports 2*cos(x).
    auto y = t.sin(in[0]);
    auto loss = t.sum(y);
    // Double-apply gradient through a second path that does not change the
    // forward value: loss + 0*sum(y) keeps f(x) but the test corrupts by
    // returning sum over y twice minus once in value space.
    auto twice = t.add(loss, t.sum(y));
    return t.sub(twice, t.detach(loss));  // forward == loss, backward == 2x
  };
  ad::register_grad_check("corrupted_for_tests", bad);
  const ad::GradCheckReport r = ad::grad_check("corrupted_for_tests", {}, 1e-3, 0);
  CHECK_FALSE(r.pass);
}

TEST_CASE("backward is linear") {
  Rng rng(7);
  std::vector<float> xv(12);
  for (float& v : xv) v = static_cast<float>(rng.uniform(-1.0, 1.0));

  auto grads_of = [&](float a, float b) {
    ad::Tape t;
    auto x = t.leaf({3, 4}, xv, true);
    auto f = t.sum(t.square(x));
    auto g = t.sum(t.snake(x));
    t.backward(t.add(t.scale(f, a), t.scale(g, b)));
    return std::vector<float>(t.grad(x).begin(), t.grad(x).end());
  };

  const auto gf = grads_of(1.0f, 0.0f);
  const auto gg = grads_of(0.0f, 1.0f);
  const auto combined = grads_of(2.0f, -0.5f);
  for (size_t i = 0; i < combined.size(); ++i)
    CHECK(combined[i] == doctest::Approx(2.0f * gf[i] - 0.5f * gg[i]).epsilon(1e-4));
}

TEST_CASE("conv1d_transposed is the adjoint of conv1d") {
  // Forward of one equals backward-input of the other for the same weight
  // array, exactly.
  Rng rng(8);
  const int64_t T = 12, cin = 3, cout = 4, K = 5, stride = 2, pad = 1;
  std::vector<float> xv(static_cast<size_t>(T * cin)), wv(static_cast<size_t>(cout * K * cin));
  for (float& v : xv) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  for (float& v : wv) v = static_cast<float>(rng.uniform(-1.0, 1.0));

  // conv1d forward to learn the output size, then backprop a fixed upstream
  // gradient g through it.
  ad::Tape t1;
  auto x1 = t1.leaf({T, cin}, xv, true);
  auto w1 = t1.leaf({cout, K, cin}, wv, false);
  auto y1 = t1.conv1d(x1, w1, stride, pad);
  const int64_t Tout = t1.shape(y1)[0];
  std::vector<float> gv(static_cast<size_t>(Tout * cout));
  for (float& v : gv) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  auto g1 = t1.constant({Tout, cout}, gv);
  t1.backward(t1.sum(t1.mul(y1, g1)));
  const std::vector<float> dx(t1.grad(x1).begin(), t1.grad(x1).end());

  // conv1d_transposed forward on g with the same weights, read as
  // [cin=cout, K, cout=cin].
  ad::Tape t2;
  auto g2 = t2.leaf({Tout, cout}, gv, false);
  auto w2 = t2.leaf({cout, K, cin}, wv, false);
  auto x2 = t2.conv1d_transposed(g2, w2, stride, pad);
  REQUIRE(t2.shape(x2) == ad::Shape{T, cin});
  for (size_t i = 0; i < dx.size(); ++i) CHECK(t2.val(x2)[i] == dx[i]);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  ParamStore store;
  store.add("p", {3}, {1.0f, -2.0f, 0.5f});
  const std::vector<float> before = store.named("p").value;
  store.adam_step({std::vector<float>{0, 0, 0}}, {});
  CHECK(store.named("p").value == before);
}

TEST_CASE("adam: constant gradient step size approaches lr") {
  ParamStore store;
  store.add("p", {1}, {0.0f});
  AdamConfig cfg;
  cfg.lr = 0.01f;
  float prev = 0.0f;
  float step = 0.0f;
  for (int i = 0; i < 500; ++i) {
    store.adam_step({std::vector<float>{1.0f}}, cfg);
    step = prev - store.named("p").value[0];
    prev = store.named("p").value[0];
  }
  CHECK(step == doctest::Approx(cfg.lr).epsilon(0.05));
}

TEST_CASE("adam: converges on a scalar quadratic") {
  // loss = (x - 3)^2, lr = 1e-2, within 1e-3 of the minimizer in <= 2000
  // steps.
  ParamStore store;
  store.add("x", {1}, {0.0f});
  AdamConfig cfg;
  cfg.lr = 0.01f;
  for (int i = 0; i < 2000; ++i) {
    const float x = store.named("x").value[0];
    store.adam_step({std::vector<float>{2.0f * (x - 3.0f)}}, cfg);
  }
  CHECK(std::abs(store.named("x").value[0] - 3.0f) < 1e-3f);
}

TEST_CASE("forward evaluation is deterministic") {
  Rng rng(9);
  std::vector<float> xv(24);
  for (float& v : xv) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  auto run = [&] {
    ad::Tape t;
    auto x = t.leaf({4, 6}, xv, false);
    auto y = t.softmax(t.layer_norm(t.snake(x), 1e-5f));
    return std::vector<float>(t.val(y).begin(), t.val(y).end());
  };
  CHECK(run() == run());
}

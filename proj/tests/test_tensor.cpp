#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "mtcad/errors.hpp"
#include "mtcad/rng.hpp"
#include "mtcad/tensor.hpp"
#include "test_util.hpp"

using namespace mtcad;
using testutil::central_diff;
using testutil::rel_err;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, bool requires_grad = false,
                     double lo = -1.0, double hi = 1.0) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  std::vector<double> data(n);
  for (auto& v : data) v = rng.uniform(lo, hi);
  return Tensor::from_data(std::move(shape), std::move(data), requires_grad);
}

}  // namespace

TEST_CASE("matmul identity and annihilator") {
  Rng rng(7);
  Tape tape;
  Tensor x = random_tensor({3, 3}, rng);
  Tensor eye = Tensor::from_data({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tensor y = tape.matmul(eye, x);
  for (int i = 0; i < 9; ++i) CHECK(y.data()[i] == x.data()[i]);

  Tensor z = tape.matmul(Tensor::zeros({2, 3}), random_tensor({3, 4}, rng));
  for (double v : z.data()) CHECK(v == 0.0);
}

TEST_CASE("matmul matches triple-loop oracle") {
  Rng rng(11);
  Tape tape;
  Tensor a = random_tensor({3, 3}, rng);
  Tensor b = random_tensor({3, 3}, rng);
  Tensor y = tape.matmul(a, b);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) acc += a.data()[i * 3 + k] * b.data()[k * 3 + j];
      CHECK(std::abs(y.data()[i * 3 + j] - acc) < 1e-12);
    }
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Tape tape;
  try {
    tape.matmul(Tensor::zeros({2, 3}), Tensor::zeros({4, 2}));
    FAIL("expected invalid_argument");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2,3]") != std::string::npos);
    CHECK(msg.find("[4,2]") != std::string::npos);
  }
}

TEST_CASE("elementwise definitions") {
  Tape tape;
  Tensor x = Tensor::from_data({3}, {-1.0, 0.0, 2.0});
  Tensor r = tape.elementwise(ElemKind::Relu, x);
  CHECK(r.data() == std::vector<double>{0.0, 0.0, 2.0});

  Tensor s = tape.sigmoid(Tensor::scalar(0.0));
  CHECK(s.item() == doctest::Approx(0.5).epsilon(1e-15));

  Tensor bad_shape = Tensor::zeros({2});
  CHECK_THROWS_AS(tape.elementwise(ElemKind::Add, x, bad_shape), std::invalid_argument);
}

TEST_CASE("tanh gradient matches the analytic derivative") {
  Tape tape;
  Tensor x = Tensor::from_data({1}, {0.7}, /*requires_grad=*/true);
  Tensor y = tape.tanh(x);
  tape.backward(y);
  const double expected = 1.0 - std::tanh(0.7) * std::tanh(0.7);
  CHECK(std::abs(x.grad()[0] - expected) < 1e-12);
}

TEST_CASE("softmax basics") {
  Tape tape;
  Tensor uniform = Tensor::from_data({1, 3}, {4.2, 4.2, 4.2});
  Tensor y = tape.softmax_rows(uniform);
  for (double v : y.data()) CHECK(std::abs(v - 1.0 / 3.0) < 1e-15);

  // shift invariance
  Tensor v1 = Tensor::from_data({1, 4}, {0.3, -1.2, 0.9, 2.0});
  Tensor v2 = Tensor::from_data({1, 4}, {0.3 + 17.5, -1.2 + 17.5, 0.9 + 17.5, 2.0 + 17.5});
  Tensor s1 = tape.softmax_rows(v1);
  Tensor s2 = tape.softmax_rows(v2);
  for (int i = 0; i < 4; ++i) CHECK(std::abs(s1.data()[i] - s2.data()[i]) < 1e-12);

  // high-precision oracle for [1,2,3]
  Tensor v3 = Tensor::from_data({1, 3}, {1.0, 2.0, 3.0});
  Tensor s3 = tape.softmax_rows(v3);
  long double e1 = expl(1.0L), e2 = expl(2.0L), e3 = expl(3.0L);
  long double total = e1 + e2 + e3;
  CHECK(std::abs(s3.data()[0] - double(e1 / total)) < 1e-12);
  CHECK(std::abs(s3.data()[1] - double(e2 / total)) < 1e-12);
  CHECK(std::abs(s3.data()[2] - double(e3 / total)) < 1e-12);

  Tensor with_nan = Tensor::from_data({1, 2}, {0.0, std::nan("")});
  CHECK_THROWS_AS(tape.softmax_rows(with_nan), numeric_error);
}

TEST_CASE("softmax rows sum to one on random input") {
  Rng rng(3);
  Tape tape;
  Tensor x = random_tensor({4, 5, 7}, rng, false, -30.0, 30.0);
  Tensor y = tape.softmax_rows(x);
  for (int r = 0; r < 20; ++r) {
    double sum = 0.0;
    for (int j = 0; j < 7; ++j) sum += y.data()[r * 7 + j];
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("backward of x*x and sum") {
  {
    Tape tape;
    Tensor x = Tensor::from_data({1}, {3.0}, true);
    Tensor loss = tape.mul(x, x);
    tape.backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(6.0).epsilon(1e-15));
  }
  {
    Tape tape;
    Rng rng(5);
    Tensor x = random_tensor({2, 3}, rng, true);
    Tensor loss = tape.sum_all(x);
    tape.backward(loss);
    for (double g : x.grad()) CHECK(g == 1.0);
  }
}

TEST_CASE("backward requires a scalar loss") {
  Tape tape;
  Tensor x = Tensor::zeros({2, 2}, true);
  Tensor y = tape.relu(x);
  CHECK_THROWS_AS(tape.backward(y), std::logic_error);
}

TEST_CASE("two-layer network gradients match finite differences") {
  Rng rng(17);
  Tensor w1 = random_tensor({5, 4}, rng, true);
  Tensor b1 = random_tensor({5}, rng, true);
  Tensor w2 = random_tensor({2, 5}, rng, true);
  Tensor b2 = random_tensor({2}, rng, true);
  Tensor input = random_tensor({3, 4}, rng);

  auto forward = [&](Tape& tape) {
    Tensor h = tape.tanh(tape.add_bias(tape.linear(input, w1), b1));
    Tensor out = tape.sigmoid(tape.add_bias(tape.linear(h, w2), b2));
    return tape.sum_all(tape.mul(out, out));
  };

  Tape tape;
  Tensor loss = forward(tape);
  tape.backward(loss);

  auto eval = [&]() {
    Tape fresh(true);
    return forward(fresh).item();
  };
  double worst = 0.0;
  for (Tensor* p : {&w1, &b1, &w2, &b2}) {
    for (int64_t i = 0; i < p->size(); ++i) {
      const double fd = central_diff(p->data(), i, eval);
      worst = std::max(worst, rel_err(fd, p->grad()[i]));
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("composed graph with bmm, concat, softmax and batch norm vs finite differences") {
  Rng rng(23);
  Tensor wq = random_tensor({4, 6}, rng, true);
  Tensor wk = random_tensor({4, 6}, rng, true);
  Tensor gamma = Tensor::from_data({6}, std::vector<double>(6, 1.0), true);
  Tensor beta = Tensor::zeros({6}, true);
  Tensor xa = random_tensor({2, 3, 6}, rng);
  Tensor xb = random_tensor({2, 2, 6}, rng);
  BnStats stats(6);

  auto forward = [&](Tape& tape) {
    BnStats local = stats;
    Tensor x = tape.batch_norm(tape.concat_mid(xa, xb), gamma, beta, local,
                               BnMode::TrainNoUpdate);
    Tensor q = tape.linear(x, wq);
    Tensor k = tape.linear(x, wk);
    Tensor att = tape.softmax_rows(tape.scale(tape.bmm(q, k, true), 0.5));
    Tensor mixed = tape.bmm(att, x);
    return tape.sum_all(tape.mul(mixed, mixed));
  };

  Tape tape;
  Tensor loss = forward(tape);
  tape.backward(loss);

  auto eval = [&]() {
    Tape fresh;
    return forward(fresh).item();
  };
  double worst = 0.0;
  for (Tensor* p : {&wq, &wk, &gamma, &beta}) {
    for (int64_t i = 0; i < p->size(); ++i) {
      const double fd = central_diff(p->data(), i, eval);
      worst = std::max(worst, rel_err(fd, p->grad()[i]));
    }
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("batch norm inference path uses frozen statistics") {
  Rng rng(29);
  Tensor gamma = Tensor::from_data({3}, {1.0, 2.0, 0.5}, true);
  Tensor beta = Tensor::from_data({3}, {0.1, -0.2, 0.0}, true);
  BnStats stats(3);
  stats.mean = {1.0, -1.0, 0.5};
  stats.var = {4.0, 1.0, 0.25};
  Tape tape;
  Tensor x = Tensor::from_data({1, 2, 3}, {1.0, -1.0, 0.5, 3.0, 0.0, 1.0});
  Tensor y = tape.batch_norm(x, gamma, beta, stats, BnMode::Inference, 0.1, 0.0);
  // first row normalizes to exactly the shift
  CHECK(y.data()[0] == doctest::Approx(0.1));
  CHECK(y.data()[1] == doctest::Approx(-0.2));
  CHECK(y.data()[2] == doctest::Approx(0.0));
  CHECK(y.data()[3] == doctest::Approx(0.1 + 1.0 * (3.0 - 1.0) / 2.0));
}

TEST_CASE("batch norm running statistics update with momentum") {
  Tensor gamma = Tensor::from_data({1}, {1.0}, true);
  Tensor beta = Tensor::zeros({1}, true);
  BnStats stats(1);
  Tape tape;
  Tensor x = Tensor::from_data({4, 1}, {1.0, 2.0, 3.0, 4.0});
  tape.batch_norm(x, gamma, beta, stats, BnMode::Train, 0.1);
  const double mu = 2.5, var = 1.25;  // biased
  CHECK(stats.mean[0] == doctest::Approx(0.9 * 0.0 + 0.1 * mu));
  CHECK(stats.var[0] == doctest::Approx(0.9 * 1.0 + 0.1 * var));

  // TrainNoUpdate leaves them alone
  BnStats before = stats;
  tape.batch_norm(x, gamma, beta, stats, BnMode::TrainNoUpdate, 0.1);
  CHECK(stats.mean[0] == before.mean[0]);
  CHECK(stats.var[0] == before.var[0]);
}

TEST_CASE("backward is deterministic bit for bit") {
  Rng rng(31);
  Tensor w = random_tensor({4, 4}, rng, true);
  Tensor x = random_tensor({2, 3, 4}, rng);
  Tape tape;
  Tensor y = tape.softmax_rows(tape.linear(x, w));
  Tensor loss = tape.sum_all(tape.mul(y, y));
  tape.backward(loss);
  std::vector<double> first = w.grad();
  tape.backward(loss);
  CHECK(w.grad() == first);
}

TEST_CASE("mask_self writes the masked column and passes other gradients") {
  Tape tape;
  Tensor x = Tensor::from_data({1, 2, 3}, {1, 2, 3, 4, 5, 6}, true);
  Tensor y = tape.mask_self(x, 1);  // masks (0,1) and (1,2)
  CHECK(y.data()[1] == -1e30);
  CHECK(y.data()[5] == -1e30);
  Tensor loss = tape.sum_all(y);
  tape.backward(loss);
  CHECK(x.grad() == std::vector<double>{1, 0, 1, 1, 1, 0});
}

TEST_CASE("reshape round trip") {
  Tape tape;
  Tensor x = Tensor::from_data({2, 3}, {1, 2, 3, 4, 5, 6}, true);
  Tensor y = tape.reshape(x, {3, 2});
  CHECK(y.data() == x.data());
  CHECK_THROWS_AS(tape.reshape(x, {4, 2}), std::invalid_argument);
  tape.backward(tape.sum_all(tape.mul(y, y)));
  for (int i = 0; i < 6; ++i) CHECK(x.grad()[i] == doctest::Approx(2.0 * x.data()[i]));
}

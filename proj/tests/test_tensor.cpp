#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "fjsp/tensor.hpp"
#include "grad_check.hpp"

using namespace fjsp;
using fjsp::testing::check_gradients;

namespace {

Tensor randn_like(int rows, int cols, Rng& rng, double spread = 1.0) {
  return Tensor::uniform(rows, cols, -spread, spread, rng);
}

}  // namespace

TEST_CASE("masked softmax matches the symmetry and mask semantics") {
  Tape tape;
  const Tape::Id x = tape.constant(Tensor::row(std::array{0.0, 0.0}));
  const Tape::Id y = tape.masked_softmax_rows(x, {1, 1});
  CHECK(tape.val(y).data[0] == doctest::Approx(0.5));
  CHECK(tape.val(y).data[1] == doctest::Approx(0.5));

  Tape tape2;
  const Tape::Id x2 = tape2.constant(Tensor::row(std::array{3.0, 100.0}));
  const Tape::Id y2 = tape2.masked_softmax_rows(x2, {1, 0});
  CHECK(tape2.val(y2).data[0] == 1.0);
  CHECK(tape2.val(y2).data[1] == 0.0);
}

TEST_CASE("masked softmax rows sum to one over unmasked entries") {
  Rng rng(5);
  Tape tape;
  const Tape::Id x = tape.constant(randn_like(4, 5, rng, 3.0));
  std::vector<std::uint8_t> mask(20, 0);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j <= i; ++j) mask[i * 5 + j] = 1;
  const Tape::Id y = tape.masked_softmax_rows(x, mask);
  for (int i = 0; i < 4; ++i) {
    double sum = 0.0;
    for (int j = 0; j < 5; ++j) {
      const double v = tape.val(y).at(i, j);
      if (!mask[i * 5 + j]) CHECK(v == 0.0);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("fully masked rows are contract faults") {
  Tape tape;
  const Tape::Id x = tape.constant(Tensor::full(2, 2, 1.0));
  CHECK_THROWS_AS(tape.masked_softmax_rows(x, {1, 1, 0, 0}), ContractViolation);
}

TEST_CASE("activation point values") {
  Tape tape;
  const Tape::Id x = tape.constant(Tensor::row(std::array{0.0, -1.0, 2.0}));
  CHECK(tape.val(tape.elu(x)).data[0] == 0.0);
  CHECK(tape.val(tape.elu(x)).data[1] == doctest::Approx(std::expm1(-1.0)));
  CHECK(tape.val(tape.leaky_relu(x, 0.01)).data[1] == doctest::Approx(-0.01));
  CHECK(tape.val(tape.leaky_relu(x, 0.01)).data[2] == 2.0);
}

TEST_CASE("shape mismatches are contract faults") {
  Tape tape;
  const Tape::Id a = tape.constant(Tensor(2, 3));
  const Tape::Id b = tape.constant(Tensor(3, 3));
  CHECK_THROWS_AS(tape.add(a, b), ContractViolation);
  CHECK_THROWS_AS(tape.mul(a, b), ContractViolation);
  CHECK_THROWS_AS(tape.matmul(a, tape.constant(Tensor(2, 2))), ContractViolation);
  CHECK_THROWS_AS(tape.backward(a), ContractViolation);
}

TEST_CASE("linear loss gradient is the broadcast input") {
  // loss = sum(W x): dW = x^T replicated across rows of W.
  Tensor W = Tensor::full(3, 2, 0.5);
  Tensor x(2, 1);
  x.data = {2.0, -3.0};
  Tape tape;
  const Tape::Id loss = tape.sum_all(tape.matmul(tape.param(&W), tape.constant(x)));
  W.zero_grad();
  tape.backward(loss);
  for (int r = 0; r < 3; ++r) {
    CHECK(W.grad[r * 2 + 0] == doctest::Approx(2.0));
    CHECK(W.grad[r * 2 + 1] == doctest::Approx(-3.0));
  }
}

TEST_CASE("gradient of masked softmax entries is exactly zero") {
  Tensor x(1, 3);
  x.data = {0.3, -0.2, 5.0};
  Tape tape;
  const Tape::Id y =
      tape.masked_softmax_rows(tape.param(&x), {1, 1, 0});
  const Tape::Id loss = tape.sum_all(tape.mul(
      y, tape.constant(Tensor::row(std::array{1.0, 2.0, 3.0}))));
  x.zero_grad();
  tape.backward(loss);
  CHECK(x.grad[2] == 0.0);
  CHECK(x.grad[0] != 0.0);
}

TEST_CASE("finite differences agree on every primitive") {
  Rng rng(12345);

  SUBCASE("matmul") {
    Tensor A = randn_like(3, 4, rng), B = randn_like(4, 2, rng);
    auto r = check_gradients({{"A", &A}, {"B", &B}}, [&](Tape& t) {
      return t.mean_all(t.matmul(t.param(&A), t.param(&B)));
    });
    CHECK(r.max_rel_error < 1e-6);
  }

  SUBCASE("add sub mul scale") {
    Tensor A = randn_like(3, 3, rng), B = randn_like(3, 3, rng);
    auto r = check_gradients({{"A", &A}, {"B", &B}}, [&](Tape& t) {
      const Tape::Id sum = t.add(t.param(&A), t.param(&B));
      const Tape::Id diff = t.sub(sum, t.scale(t.param(&B), 0.75));
      return t.mean_all(t.mul(diff, t.param(&A)));
    });
    CHECK(r.max_rel_error < 1e-6);
  }

  SUBCASE("rowvec bias, transpose, reshape") {
    Tensor A = randn_like(4, 3, rng), v = randn_like(1, 3, rng);
    auto r = check_gradients({{"A", &A}, {"v", &v}}, [&](Tape& t) {
      const Tape::Id biased = t.add_rowvec(t.param(&A), t.param(&v));
      return t.mean_all(t.reshape(t.transpose(biased), 4, 3));
    });
    CHECK(r.max_rel_error < 1e-6);
  }

  SUBCASE("concat and slice") {
    Tensor A = randn_like(2, 3, rng), B = randn_like(2, 2, rng);
    auto r = check_gradients({{"A", &A}, {"B", &B}}, [&](Tape& t) {
      const std::array<Tape::Id, 2> parts = {t.param(&A), t.param(&B)};
      const Tape::Id joined = t.concat_cols(parts);
      return t.mean_all(t.mul(t.slice_cols(joined, 1, 4), t.slice_cols(joined, 0, 3)));
    });
    CHECK(r.max_rel_error < 1e-6);
  }

  SUBCASE("repeat, gather with duplicates, scatter with collisions") {
    Tensor A = randn_like(3, 2, rng), v = randn_like(1, 2, rng);
    auto r = check_gradients({{"A", &A}, {"v", &v}}, [&](Tape& t) {
      const Tape::Id gathered = t.gather_rows(t.param(&A), {0, 2, 2, 1});
      const Tape::Id spread = t.repeat_rows(t.param(&v), 4);
      const Tape::Id mixed = t.mul(gathered, spread);
      return t.mean_all(t.scatter_add_rows(mixed, {1, 0, 1, 1}, 2));
    });
    CHECK(r.max_rel_error < 1e-6);
  }

  SUBCASE("reductions") {
    Tensor A = randn_like(3, 4, rng);
    auto r = check_gradients({{"A", &A}}, [&](Tape& t) {
      const Tape::Id m = t.mean_rows(t.param(&A));
      return t.add(t.mean_all(m), t.scale(t.sum_all(t.param(&A)), 0.1));
    });
    CHECK(r.max_rel_error < 1e-6);
  }

  SUBCASE("masked softmax") {
    Tensor A = randn_like(3, 4, rng);
    std::vector<std::uint8_t> mask = {1, 1, 0, 1, 0, 1, 1, 1, 1, 1, 1, 0};
    Tensor C = randn_like(3, 4, rng);
    auto r = check_gradients({{"A", &A}}, [&](Tape& t) {
      const Tape::Id y = t.masked_softmax_rows(t.param(&A), mask);
      return t.mean_all(t.mul(y, t.constant(C)));
    });
    CHECK(r.max_rel_error < 1e-6);
  }

  SUBCASE("activations and transcendentals") {
    Tensor A = randn_like(3, 3, rng);
    for (double& v : A.data) {
      if (std::abs(v) < 0.05) v += 0.1;  // keep clear of the leaky-relu kink
    }
    auto r = check_gradients({{"A", &A}}, [&](Tape& t) {
      const Tape::Id act =
          t.tanh_op(t.elu(t.leaky_relu(t.param(&A), 0.2)));
      const Tape::Id positive = t.exp_op(act);
      return t.mean_all(t.log_op(positive));
    });
    CHECK(r.max_rel_error < 1e-6);
  }

  SUBCASE("minimum and clamp") {
    Tensor A = randn_like(3, 3, rng), B = randn_like(3, 3, rng);
    for (int i = 0; i < 9; ++i) {
      if (std::abs(A.data[i] - B.data[i]) < 0.05) B.data[i] += 0.1;
      if (std::abs(A.data[i] - 0.5) < 0.05) A.data[i] += 0.1;
      if (std::abs(A.data[i] + 0.5) < 0.05) A.data[i] -= 0.1;
    }
    auto r = check_gradients({{"A", &A}, {"B", &B}}, [&](Tape& t) {
      const Tape::Id lo = t.minimum(t.param(&A), t.param(&B));
      return t.mean_all(t.add(lo, t.clamp(t.param(&A), -0.5, 0.5)));
    });
    CHECK(r.max_rel_error < 1e-6);
  }
}

TEST_CASE("repeated backward accumulates into parameter gradients") {
  Tensor w = Tensor::full(1, 1, 3.0);
  Tape tape;
  const Tape::Id loss = tape.mul(tape.param(&w), tape.param(&w));
  w.zero_grad();
  tape.backward(loss);
  CHECK(w.grad[0] == doctest::Approx(6.0));
  tape.backward(loss);
  CHECK(w.grad[0] == doctest::Approx(12.0));  // accumulation is the contract
}

TEST_CASE("identical seeds give bit-identical runs") {
  auto run = [](std::uint64_t seed) {
    Rng rng(seed);
    Tensor A = randn_like(4, 4, rng), B = randn_like(4, 4, rng);
    Tape tape;
    const Tape::Id loss = tape.mean_all(
        tape.tanh_op(tape.matmul(tape.param(&A), tape.param(&B))));
    A.zero_grad();
    tape.backward(loss);
    return std::pair(tape.val(loss).data[0], A.grad);
  };
  const auto [loss1, grad1] = run(99);
  const auto [loss2, grad2] = run(99);
  CHECK(loss1 == loss2);
  CHECK(grad1 == grad2);
}

TEST_CASE("adam leaves parameters alone under zero gradients") {
  Tensor w = Tensor::full(2, 2, 1.5);
  Adam adam({&w}, AdamConfig{});
  adam.zero_grad();
  adam.step();
  for (double v : w.data) CHECK(v == doctest::Approx(1.5).epsilon(1e-15));
}

TEST_CASE("adam first step is sign-scaled by the learning rate") {
  Tensor w = Tensor::full(1, 2, 0.0);
  AdamConfig cfg;
  cfg.lr = 1e-2;
  Adam adam({&w}, cfg);
  adam.zero_grad();
  w.grad = {0.3, -4.0};
  adam.step();
  // With bias correction at t=1, the update is -lr * g / (|g| + eps).
  CHECK(w.data[0] == doctest::Approx(-1e-2).epsilon(1e-6));
  CHECK(w.data[1] == doctest::Approx(1e-2).epsilon(1e-6));
}

TEST_CASE("adam drives a quadratic to its minimum") {
  Tensor w = Tensor::full(1, 1, 1.0);
  AdamConfig cfg;
  cfg.lr = 3e-3;
  Adam adam({&w}, cfg);
  for (int step = 0; step < 2000; ++step) {
    Tape tape;
    const Tape::Id loss = tape.mul(tape.param(&w), tape.param(&w));
    adam.zero_grad();
    tape.backward(loss);
    adam.step();
  }
  CHECK(std::abs(w.data[0]) < 1e-2);
}

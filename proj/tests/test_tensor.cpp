#include "emuproto/tensor.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "emuproto/kernels.hpp"
#include "emuproto/rng.hpp"

using namespace emuproto;

namespace {

Tensor random_tensor(std::vector<std::int64_t> shape, Rng& rng,
                     float avoid_zero_margin = 0.0f) {
  Tensor t(shape);
  for (std::int64_t i = 0; i < t.size(); ++i) {
    float v = float(rng.uniform(-1.0, 1.0));
    // keep ReLU inputs away from the kink when requested
    if (avoid_zero_margin > 0.0f && std::abs(v) < avoid_zero_margin)
      v = v < 0 ? -avoid_zero_margin : avoid_zero_margin;
    t.mutable_data()[i] = v;
  }
  return t;
}

}  // namespace

TEST_CASE("matmul identity") {
  Rng rng(1);
  Tensor a = random_tensor({3, 3}, rng);
  Tensor id({3, 3});
  for (int i = 0; i < 3; ++i) id.mutable_data()[i * 3 + i] = 1.0f;
  Tensor out = matmul(id, a);
  for (int i = 0; i < 9; ++i) CHECK(out.at(i) == a.at(i));
}

TEST_CASE("matmul shape mismatch names op and shapes") {
  Tensor a({2, 3}), b({2, 3});
  CHECK_THROWS_WITH_AS(matmul(a, b), "matmul: shape mismatch [2,3] vs [2,3]",
                       std::invalid_argument);
}

TEST_CASE("relu clamps negatives") {
  Tensor x({3}, {-1.0f, 0.0f, 2.0f});
  Tensor y = relu(x);
  CHECK(y.at(0) == 0.0f);
  CHECK(y.at(1) == 0.0f);
  CHECK(y.at(2) == 2.0f);
}

TEST_CASE("segment_sum hand example") {
  Tensor v({3}, {1.0f, 2.0f, 3.0f});
  Tensor out = segment_sum(v, {0, 0, 1}, 2);
  CHECK(out.at(0) == 3.0f);  // 1 + 2
  CHECK(out.at(1) == 3.0f);
}

TEST_CASE("segment index out of range") {
  Tensor v({3}, {1.0f, 2.0f, 3.0f});
  CHECK_THROWS_AS(segment_sum(v, {0, 2, 1}, 2), std::out_of_range);
  CHECK_THROWS_AS(segment_mean(v, {0, -1, 1}, 2), std::out_of_range);
}

TEST_CASE("segment_sum conserves total mass") {
  Rng rng(7);
  Tensor v = random_tensor({40, 3}, rng);
  std::vector<std::int32_t> seg(40);
  for (int i = 0; i < 40; ++i) seg[i] = std::int32_t(rng.uniform_index(7));
  Tensor s = segment_sum(v, seg, 7);
  CHECK(sum(s).at(0) == doctest::Approx(sum(v).at(0)).epsilon(1e-5));
}

TEST_CASE("forward ops are deterministic") {
  Rng rng(3);
  Tensor a = random_tensor({17, 9}, rng);
  Tensor b = random_tensor({9, 5}, rng);
  Tensor c1 = matmul(a, b), c2 = matmul(a, b);
  for (std::int64_t i = 0; i < c1.size(); ++i) CHECK(c1.at(i) == c2.at(i));
}

TEST_CASE("backward: sum of squares") {
  Tensor x({2}, {1.0f, 2.0f});
  Tape tape;
  Tensor xl = tape.leaf(x);
  Tensor loss = sum(mul(xl, xl));
  tape.backward(loss);
  Tensor g = tape.grad(xl);
  CHECK(g.at(0) == 2.0f);
  CHECK(g.at(1) == 4.0f);
}

TEST_CASE("backward: inactive relu has zero grad") {
  Tape tape;
  Tensor xl = tape.leaf(Tensor({1}, {-1.0f}));
  Tensor loss = sum(relu(xl));
  tape.backward(loss);
  CHECK(tape.grad(xl).at(0) == 0.0f);
}

TEST_CASE("backward errors") {
  Tape tape;
  Tensor xl = tape.leaf(Tensor({2}, {1.0f, 2.0f}));
  Tensor y = mul(xl, xl);
  CHECK_THROWS_AS(tape.backward(y), std::invalid_argument);  // not scalar
  Tape other;
  Tensor loss = sum(y);
  CHECK_THROWS_AS(other.backward(loss), std::invalid_argument);  // wrong tape
}

TEST_CASE("non-trainable leaves get no grad entry") {
  Tape tape;
  Tensor a = tape.leaf(Tensor({2}, {1.0f, 2.0f}), true);
  Tensor b = tape.leaf(Tensor({2}, {3.0f, 4.0f}), false);
  tape.backward(sum(mul(a, b)));
  CHECK(tape.grad(a).at(0) == 3.0f);
}

TEST_CASE("gradcheck: quadratic is exact to roundoff") {
  Rng rng(11);
  Tensor x = random_tensor({6}, rng);
  // central differences have zero truncation error on a quadratic; a
  // power-of-two step keeps x +- h exact so only f32 roundoff remains
  double err = gradcheck(
      [](Tape&, const Tensor& v) { return scale(sum(mul(v, v)), 0.5f); }, x,
      0.25f);
  CHECK(err < 1e-6);
}

TEST_CASE("gradcheck: constant function") {
  Tensor x({3}, {0.3f, -0.2f, 0.9f});
  double err = gradcheck(
      [](Tape& t, const Tensor& v) {
        return sub(sum(v), sum(v));  // identically zero
      },
      x, 1e-3f);
  CHECK(err == 0.0);
}

TEST_CASE("gradcheck: composite graph vs finite differences") {
  Rng rng(21);
  const float step = 1e-3f;
  Tensor x = random_tensor({4, 3}, rng, 2.0f * step);
  Tensor w = random_tensor({3, 5}, rng);
  Tensor bias = random_tensor({5}, rng);
  std::vector<std::int32_t> seg = {0, 1, 0, 1};
  double err = gradcheck(
      [&](Tape&, const Tensor& v) {
        Tensor h = relu(bias_add(matmul(v, w), bias));
        Tensor s = segment_mean(h, seg, 2);
        Tensor c = concat_cols({s, s});
        return mean(mul(c, c));
      },
      x, step);
  CHECK(err < 1e-3);
}

TEST_CASE("per-op gradchecks at random inputs") {
  Rng rng(31);
  const float step = 1e-3f;
  auto check = [&](auto fn, const Tensor& x) {
    CHECK(gradcheck(fn, x, step) < 1e-3);
  };
  check([](Tape&, const Tensor& v) { return sum(mul(v, v)); },
        random_tensor({7}, rng));
  check([](Tape&, const Tensor& v) { return sum(relu(v)); },
        random_tensor({9}, rng, 2.0f * step));
  Tensor m = random_tensor({4, 6}, rng);
  check([&](Tape&, const Tensor& v) { return sum(matmul(v, m)); },
        random_tensor({3, 4}, rng));
  check([&](Tape&, const Tensor& v) { return sum(matmul(m, v)); },
        random_tensor({6, 2}, rng));
  check([&](Tape&, const Tensor& v) { return sum(bias_add(m, v)); },
        random_tensor({6}, rng));
  check([&](Tape&, const Tensor& v) { return sum(gather_rows(v, {2, 0, 2})); },
        random_tensor({4, 3}, rng));
  check(
      [&](Tape&, const Tensor& v) {
        return sum(mul(segment_sum(v, {1, 0, 1, 1}, 2),
                       segment_mean(v, {1, 0, 1, 1}, 2)));
      },
      random_tensor({4, 2}, rng));
  check([&](Tape&, const Tensor& v) { return mean(sub(v, scale(v, 0.25f))); },
        random_tensor({5}, rng));
}

TEST_CASE("fast kernels match serial reference") {
  Rng rng(41);
  const std::int64_t m = 33, k = 17, n = 32;
  std::vector<float> a(m * k), b(k * n), c_fast(m * n), c_ref(m * n);
  for (auto& v : a) v = float(rng.uniform(-1.0, 1.0));
  for (auto& v : b) v = float(rng.uniform(-1.0, 1.0));
  kernels::matmul(m, n, k, a.data(), b.data(), c_fast.data());
  kernels::serial::matmul(m, n, k, a.data(), b.data(), c_ref.data());
  for (std::int64_t i = 0; i < m * n; ++i)
    CHECK(c_fast[i] == doctest::Approx(c_ref[i]).epsilon(1e-5));

  std::vector<float> x(4096), y(4096), out1(4096), out2(4096);
  for (auto& v : x) v = float(rng.uniform(-1.0, 1.0));
  for (auto& v : y) v = float(rng.uniform(-1.0, 1.0));
  kernels::add(4096, x.data(), y.data(), out1.data());
  kernels::serial::add(4096, x.data(), y.data(), out2.data());
  CHECK(out1 == out2);
  kernels::mul(4096, x.data(), y.data(), out1.data());
  kernels::serial::mul(4096, x.data(), y.data(), out2.data());
  CHECK(out1 == out2);
  kernels::relu(4096, x.data(), out1.data());
  kernels::serial::relu(4096, x.data(), out2.data());
  CHECK(out1 == out2);
}

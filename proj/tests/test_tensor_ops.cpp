#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "glom/ops.hpp"
#include "glom/tensor.hpp"
#include "testing_util.hpp"

using glom::Tensor;
using glomtest::random_tensor;
namespace ops = glom::ops;

// Direct-summation convolution, the independent oracle for conv2d.
static Tensor conv2d_bruteforce(const Tensor& x, const Tensor& w, int stride,
                                int pad) {
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int F = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const int Ho = (H + 2 * pad - kh) / stride + 1;
  const int Wo = (W + 2 * pad - kw) / stride + 1;
  Tensor y({N, F, Ho, Wo});
  for (int n = 0; n < N; ++n)
    for (int f = 0; f < F; ++f)
      for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox) {
          double acc = 0.0;
          for (int c = 0; c < C; ++c)
            for (int ky = 0; ky < kh; ++ky)
              for (int kx = 0; kx < kw; ++kx) {
                const int iy = oy * stride - pad + ky;
                const int ix = ox * stride - pad + kx;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                acc += x.at(n, c, iy, ix) * w.at(f, c, ky, kx);
              }
          y.at(n, f, oy, ox) = acc;
        }
  return y;
}

TEST_CASE("conv2d identity kernel") {
  glom::Rng rng(11);
  Tensor x = random_tensor({2, 3, 5, 5}, rng);
  Tensor w({3, 3, 1, 1});
  for (int f = 0; f < 3; ++f) w.at(f, f, 0, 0) = 1.0;
  Tensor y = ops::conv2d(x, w, 1, 0);
  REQUIRE(y.shape() == x.shape());
  for (std::size_t i = 0; i < x.size(); ++i)
    REQUIRE(y[i] == Catch::Approx(x[i]).margin(1e-12));
}

TEST_CASE("conv2d 3x3 input with all-ones 2x2 kernel") {
  Tensor x({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  Tensor w = Tensor::full({1, 1, 2, 2}, 1.0);
  Tensor y = ops::conv2d(x, w, 1, 0);
  REQUIRE(y.shape() == std::vector<int>{1, 1, 2, 2});
  CHECK(y.at(0, 0, 0, 0) == 12.0);
  CHECK(y.at(0, 0, 0, 1) == 16.0);
  CHECK(y.at(0, 0, 1, 0) == 24.0);
  CHECK(y.at(0, 0, 1, 1) == 28.0);
}

TEST_CASE("conv2d all-zero kernel gives zero output") {
  glom::Rng rng(12);
  Tensor x = random_tensor({1, 2, 6, 4}, rng);
  Tensor w({3, 2, 3, 3});
  Tensor y = ops::conv2d(x, w, 1, 1);
  REQUIRE(y.shape() == std::vector<int>{1, 3, 6, 4});
  for (double v : y.values()) CHECK(v == 0.0);
}

TEST_CASE("conv2d matches direct summation on random shapes") {
  glom::Rng rng(13);
  for (int trial = 0; trial < 24; ++trial) {
    const int N = 1 + static_cast<int>(rng.below(3));
    const int C = 1 + static_cast<int>(rng.below(3));
    const int H = 3 + static_cast<int>(rng.below(6));
    const int W = 3 + static_cast<int>(rng.below(6));
    const int F = 1 + static_cast<int>(rng.below(4));
    const int k = 1 + static_cast<int>(rng.below(3));
    const int stride = 1 + static_cast<int>(rng.below(2));
    const int pad = static_cast<int>(rng.below(2));
    if (k > H + 2 * pad || k > W + 2 * pad) continue;
    Tensor x = random_tensor({N, C, H, W}, rng);
    Tensor w = random_tensor({F, C, k, k}, rng);
    Tensor got = ops::conv2d(x, w, stride, pad);
    Tensor want = conv2d_bruteforce(x, w, stride, pad);
    REQUIRE(got.shape() == want.shape());
    // floor formula for the output shape
    CHECK(got.dim(2) == (H + 2 * pad - k) / stride + 1);
    CHECK(got.dim(3) == (W + 2 * pad - k) / stride + 1);
    for (std::size_t i = 0; i < got.size(); ++i)
      REQUIRE(got[i] == Catch::Approx(want[i]).margin(1e-10));
  }
}

TEST_CASE("conv2d dimension errors name the offending axes") {
  Tensor x({1, 3, 4, 4});
  Tensor w({2, 2, 3, 3});  // channel mismatch
  CHECK_THROWS_AS(ops::conv2d(x, w, 1, 0), glom::DimensionError);
  CHECK_THROWS_WITH(ops::conv2d(x, w, 1, 0),
                    Catch::Matchers::ContainsSubstring("channel"));
  Tensor big({2, 3, 7, 7});  // kernel exceeds padded input
  CHECK_THROWS_AS(ops::conv2d(x, big, 1, 0), glom::DimensionError);
}

TEST_CASE("maxpool2d basics") {
  Tensor x({1, 1, 2, 2}, {1, 2, 3, 4});
  auto r = ops::maxpool2d(x, 2, 2);
  REQUIRE(r.y.shape() == std::vector<int>{1, 1, 1, 1});
  CHECK(r.y[0] == 4.0);

  Tensor c = Tensor::full({2, 3, 4, 4}, 7.5);
  auto rc = ops::maxpool2d(c, 2, 2);
  for (double v : rc.y.values()) CHECK(v == 7.5);

  CHECK_THROWS_AS(ops::maxpool2d(x, 3, 1), glom::DimensionError);
}

TEST_CASE("maxpool2d routes gradient to the argmax only") {
  Tensor x({1, 1, 2, 2}, {1, 2, 3, 4});
  auto r = ops::maxpool2d(x, 2, 2);
  Tensor dy = Tensor::full({1, 1, 1, 1}, 1.0);
  Tensor dx = ops::maxpool2d_backward(x.shape(), r.argmax, dy);
  CHECK(dx.values() == std::vector<double>{0, 0, 0, 1});
}

TEST_CASE("maxpool2d ties go to the first occurrence in row-major scan") {
  Tensor x = Tensor::full({1, 1, 2, 2}, 3.0);
  auto r = ops::maxpool2d(x, 2, 2);
  CHECK(r.argmax[0] == 0);
}

TEST_CASE("maxpool2d output shape follows the floor formula") {
  glom::Rng rng(14);
  for (int trial = 0; trial < 30; ++trial) {
    const int H = 2 + static_cast<int>(rng.below(9));
    const int W = 2 + static_cast<int>(rng.below(9));
    const int win = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::min(H, W))));
    const int stride = 1 + static_cast<int>(rng.below(3));
    Tensor x = random_tensor({1, 2, H, W}, rng);
    auto r = ops::maxpool2d(x, win, stride);
    CHECK(r.y.dim(2) == (H - win) / stride + 1);
    CHECK(r.y.dim(3) == (W - win) / stride + 1);
  }
}

TEST_CASE("batchnorm normalizes a two-value batch to +-1") {
  Tensor x({2, 1}, {1, 3});
  auto state = ops::BatchNormState::identity(1);
  auto r = ops::batchnorm(x, Tensor::full({1}, 1.0), Tensor({1}), state,
                          ops::Mode::train, 0.99, 1e-12);
  CHECK(r.y.at(0, 0) == Catch::Approx(-1.0).epsilon(1e-9));
  CHECK(r.y.at(1, 0) == Catch::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("batchnorm constant batch maps to zero") {
  Tensor x = Tensor::full({4, 2, 3, 3}, 5.0);
  auto state = ops::BatchNormState::identity(2);
  auto r = ops::batchnorm(x, Tensor::full({2}, 1.0), Tensor({2}), state,
                          ops::Mode::train);
  for (double v : r.y.values()) CHECK(std::abs(v) < 1e-6);
}

TEST_CASE("batchnorm eval with identity statistics is the identity") {
  glom::Rng rng(15);
  Tensor x = random_tensor({3, 2, 2, 2}, rng);
  auto state = ops::BatchNormState::identity(2);
  auto r = ops::batchnorm(x, Tensor::full({2}, 1.0), Tensor({2}), state,
                          ops::Mode::eval, 0.99, 1e-5);
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(r.y[i] == Catch::Approx(x[i]).margin(1e-4));
}

TEST_CASE("batchnorm rejects degenerate train batches") {
  Tensor x({1, 2, 2, 2});
  auto state = ops::BatchNormState::identity(2);
  CHECK_THROWS_AS(ops::batchnorm(x, Tensor::full({2}, 1.0), Tensor({2}), state,
                                 ops::Mode::train),
                  glom::DataError);
}

TEST_CASE("batchnorm updates running state with the configured momentum") {
  Tensor x({2, 1}, {0, 4});  // mean 2, biased var 4
  auto state = ops::BatchNormState::identity(1);
  ops::batchnorm(x, Tensor::full({1}, 1.0), Tensor({1}), state,
                 ops::Mode::train, 0.99, 1e-5);
  CHECK(state.running_mean[0] == Catch::Approx(0.01 * 2.0));
  CHECK(state.running_var[0] == Catch::Approx(0.99 * 1.0 + 0.01 * 4.0));
}

TEST_CASE("activations follow their definitions") {
  Tensor x({1, 4}, {-2, 0, 3, 0.5});
  Tensor r = ops::relu(x);
  CHECK(r.values() == std::vector<double>{0, 0, 3, 0.5});

  Tensor s = ops::sigmoid(Tensor({1, 1}, {0}));
  CHECK(s[0] == Catch::Approx(0.5));

  Tensor dy = Tensor::full({1, 4}, 1.0);
  Tensor dr = ops::relu_backward(x, dy);
  CHECK(dr.values() == std::vector<double>{0, 0, 1, 1});
}

TEST_CASE("dense computes the affine map") {
  Tensor id({2, 2}, {1, 0, 0, 1});
  glom::Rng rng(16);
  Tensor x = random_tensor({3, 2}, rng);
  Tensor y = ops::dense(x, id, Tensor({2}));
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == Catch::Approx(x[i]));

  Tensor w({2, 2}, {1, 1, 1, -1});
  Tensor b({2}, {0, 1});
  Tensor v = ops::dense(Tensor({1, 2}, {1, 2}), w, b);
  CHECK(v.at(0, 0) == 3.0);
  CHECK(v.at(0, 1) == 0.0);

  Tensor z = ops::dense(Tensor({1, 2}), w, b);
  CHECK(z.at(0, 0) == 0.0);
  CHECK(z.at(0, 1) == 1.0);

  CHECK_THROWS_AS(ops::dense(Tensor({1, 3}), w, b), glom::DimensionError);
}

TEST_CASE("dropout contracts") {
  glom::Rng rng(17);
  Tensor x = random_tensor({4, 8}, rng);

  auto p0 = ops::dropout(x, 0.0, ops::Mode::train, 1);
  CHECK(p0.y == x);
  auto ev = ops::dropout(x, 0.7, ops::Mode::eval, 1);
  CHECK(ev.y == x);

  auto a = ops::dropout(x, 0.5, ops::Mode::train, 42);
  auto b = ops::dropout(x, 0.5, ops::Mode::train, 42);
  CHECK(a.y == b.y);
  CHECK(a.keep == b.keep);

  CHECK_THROWS_AS(ops::dropout(x, 1.0, ops::Mode::train, 1), glom::ParameterError);
}

TEST_CASE("dropout inverted scaling preserves the mean over many masks") {
  glom::Rng rng(18);
  Tensor x = random_tensor({1, 32}, rng, 0.5, 1.5);
  const double p = 0.5;
  std::vector<double> mean(x.size(), 0.0);
  const int masks = 10000;
  for (int m = 0; m < masks; ++m) {
    auto r = ops::dropout(x, p, ops::Mode::train, 1000 + m);
    for (std::size_t i = 0; i < x.size(); ++i) mean[i] += r.y[i];
  }
  double err2 = 0.0, ref2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mean[i] /= masks;
    err2 += (mean[i] - x[i]) * (mean[i] - x[i]);
    ref2 += x[i] * x[i];
  }
  CHECK(std::sqrt(err2 / ref2) < 0.02);
}

TEST_CASE("softmax definitions and stability") {
  Tensor u = ops::softmax(Tensor({1, 2}, {0, 0}));
  CHECK(u.at(0, 0) == Catch::Approx(0.5));
  CHECK(u.at(0, 1) == Catch::Approx(0.5));

  Tensor t = ops::softmax(Tensor({1, 2}, {std::log(1.0), std::log(3.0)}));
  CHECK(t.at(0, 0) == Catch::Approx(0.25));
  CHECK(t.at(0, 1) == Catch::Approx(0.75));

  glom::Rng rng(19);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = random_tensor({3, 5}, rng, -30.0, 30.0);
    Tensor y = ops::softmax(x);
    const double c = rng.uniform(-100.0, 100.0);
    Tensor xs = x;
    for (auto& v : xs.values()) v += c;
    Tensor ys = ops::softmax(xs);
    for (int n = 0; n < 3; ++n) {
      double row = 0.0;
      for (int k = 0; k < 5; ++k) {
        row += y.at(n, k);
        CHECK(y.at(n, k) > 0.0);
        CHECK(y.at(n, k) < 1.0);
        CHECK(ys.at(n, k) == Catch::Approx(y.at(n, k)).margin(1e-12));
      }
      CHECK(std::abs(row - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("cross entropy values") {
  CHECK(ops::cross_entropy(Tensor({1, 2}, {1, 0}), {0}) == 0.0);
  CHECK(ops::cross_entropy(Tensor({1, 2}, {0.5, 0.5}), {0}) ==
        Catch::Approx(std::log(2.0)));
  CHECK(ops::cross_entropy(Tensor({1, 2}, {0.5, 0.5}), {1}) ==
        Catch::Approx(std::log(2.0)));
  long clamps = 0;
  ops::cross_entropy(Tensor({1, 2}, {1, 0}), {1}, &clamps);
  CHECK(clamps == 1);
  CHECK_THROWS_AS(ops::cross_entropy(Tensor({1, 2}, {0.4, 0.4}), {0}),
                  glom::ParameterError);
  CHECK_THROWS_AS(ops::cross_entropy(Tensor({1, 2}, {0.5, 0.5}), {2}),
                  glom::DataError);
}

TEST_CASE("global average pool") {
  Tensor x({1, 1, 2, 2}, {1, 2, 3, 4});
  CHECK(ops::global_avg_pool(x).at(0, 0) == 2.5);

  Tensor c = Tensor::full({2, 3, 4, 5}, -1.25);
  Tensor cm = ops::global_avg_pool(c);
  for (double v : cm.values()) CHECK(v == -1.25);

  glom::Rng rng(20);
  Tensor one = random_tensor({2, 4, 1, 1}, rng);
  Tensor y = ops::global_avg_pool(one);
  for (int n = 0; n < 2; ++n)
    for (int ch = 0; ch < 4; ++ch)
      CHECK(y.at(n, ch) == one.at(n, ch, 0, 0));
}

TEST_CASE("two_class_probs complements a sigmoid output") {
  Tensor s({2, 1}, {0.3, 0.9});
  Tensor p = ops::two_class_probs(s);
  CHECK(p.at(0, 0) == Catch::Approx(0.7));
  CHECK(p.at(0, 1) == Catch::Approx(0.3));
  CHECK(p.at(1, 0) == Catch::Approx(0.1));
  CHECK(p.at(1, 1) == Catch::Approx(0.9));
}

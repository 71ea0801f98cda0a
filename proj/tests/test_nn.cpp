#include <doctest.h>

#include <cmath>

#include "hiner/nn.hpp"
#include "hiner/rng.hpp"

using namespace hiner;
using namespace hiner::nn;

namespace {

FeatureMap random_map(int c, int h, int w, Rng& rng) {
  FeatureMap x{Matrix(c, h * w), h, w};
  for (Eigen::Index i = 0; i < x.data.size(); ++i) x.data.data()[i] = static_cast<float>(rng.uniform(-1, 1));
  return x;
}

Conv2d random_conv(int cin, int cout, int k, Rng& rng) {
  Conv2d c{Matrix(cout, cin * k * k), Vector(cout), k};
  for (Eigen::Index i = 0; i < c.weight.size(); ++i) c.weight.data()[i] = static_cast<float>(rng.uniform(-1, 1));
  for (Eigen::Index i = 0; i < c.bias.size(); ++i) c.bias[i] = static_cast<float>(rng.uniform(-1, 1));
  return c;
}

// Direct same-padded convolution.
double naive_conv(const Conv2d& c, const FeatureMap& x, int co, int y, int xx) {
  const int k = c.kernel, r = k / 2;
  double s = c.bias[co];
  for (int ci = 0; ci < x.channels(); ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const int sy = y + ky - r, sx = xx + kx - r;
        if (sy < 0 || sy >= x.height || sx < 0 || sx >= x.width) continue;
        s += static_cast<double>(c.weight(co, ci * k * k + ky * k + kx)) * x.data(ci, sy * x.width + sx);
      }
    }
  }
  return s;
}

}  // namespace

TEST_CASE("gelu uses the exact erf form") {
  CHECK(gelu(0.0f) == 0.0f);
  CHECK(gelu(1.0f) == doctest::Approx(0.8413447460685429).epsilon(1e-6));
  CHECK(gelu(-1.0f) == doctest::Approx(-0.15865525393145707).epsilon(1e-6));
  for (float x : {-3.0f, -0.7f, 0.0f, 0.4f, 2.5f}) {
    const double h = 1e-3;
    const double fd = (static_cast<double>(gelu(x + h)) - gelu(x - h)) / (2 * h);
    CHECK(gelu_derivative(x) == doctest::Approx(fd).epsilon(1e-3));
  }
}

TEST_CASE("conv2d matches direct convolution") {
  Rng rng(3);
  for (int k : {1, 3, 5}) {
    const auto x = random_map(3, 5, 4, rng);
    const auto c = random_conv(3, 2, k, rng);
    const auto y = conv2d(c, x);
    REQUIRE(y.height == 5);
    REQUIRE(y.width == 4);
    for (int co = 0; co < 2; ++co) {
      for (int yy = 0; yy < 5; ++yy) {
        for (int xx = 0; xx < 4; ++xx) {
          CHECK(y.data(co, yy * 4 + xx) == doctest::Approx(naive_conv(c, x, co, yy, xx)).epsilon(1e-5));
        }
      }
    }
  }
}

TEST_CASE("col2im is the adjoint of im2col") {
  Rng rng(5);
  const auto x = random_map(2, 4, 3, rng);
  const auto cols = im2col(x, 3);
  Matrix y(cols.rows(), cols.cols());
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = static_cast<float>(rng.uniform(-1, 1));
  const auto back = col2im(y, 2, 4, 3, 3);
  const double lhs = (cols.cast<double>().array() * y.cast<double>().array()).sum();
  const double rhs = (x.data.cast<double>().array() * back.data.cast<double>().array()).sum();
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-6));
}

TEST_CASE("conv2d_backward matches finite differences") {
  Rng rng(11);
  auto x = random_map(2, 3, 3, rng);
  auto c = random_conv(2, 3, 3, rng);
  const auto probe = random_map(3, 3, 3, rng);
  auto loss = [&](const Conv2d& cc, const FeatureMap& xx) {
    return (conv2d(cc, xx).data.cast<double>().array() * probe.data.cast<double>().array()).sum();
  };
  Matrix cols;
  conv2d(c, x, &cols);
  Conv2d g = zeros_like(c);
  const auto dx = conv2d_backward(c, cols, 3, 3, probe, g);
  const float h = 1e-2f;
  for (Eigen::Index i = 0; i < c.weight.size(); i += 5) {
    auto cp = c, cm = c;
    cp.weight.data()[i] += h;
    cm.weight.data()[i] -= h;
    CHECK(g.weight.data()[i] == doctest::Approx((loss(cp, x) - loss(cm, x)) / (2 * h)).epsilon(1e-3));
  }
  for (Eigen::Index i = 0; i < x.data.size(); ++i) {
    auto xp = x, xm = x;
    xp.data.data()[i] += h;
    xm.data.data()[i] -= h;
    CHECK(dx.data.data()[i] == doctest::Approx((loss(c, xp) - loss(c, xm)) / (2 * h)).epsilon(1e-3));
  }
  CHECK(g.bias[0] == doctest::Approx(probe.data.row(0).sum()).epsilon(1e-5));
}

TEST_CASE("pixel shuffle layout and inverse") {
  Rng rng(2);
  const auto x = random_map(8, 2, 3, rng);
  const auto y = pixel_shuffle(x, 2);
  REQUIRE(y.channels() == 2);
  REQUIRE(y.height == 4);
  REQUIRE(y.width == 6);
  for (int c = 0; c < 2; ++c) {
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        for (int yy = 0; yy < 2; ++yy) {
          for (int xx = 0; xx < 3; ++xx) {
            CHECK(y.data(c, (yy * 2 + i) * 6 + xx * 2 + j) == x.data(c * 4 + i * 2 + j, yy * 3 + xx));
          }
        }
      }
    }
  }
  CHECK(pixel_unshuffle(y, 2).data == x.data);
  CHECK(pixel_shuffle(x, 1).data == x.data);
}

TEST_CASE("center crop takes the floor offset") {
  const auto o = center_crop_offsets(180, 180, 145, 145);
  CHECK(o.top == 17);
  CHECK(o.left == 17);
  Rng rng(1);
  const auto x = random_map(1, 5, 4, rng);
  const auto y = center_crop(x, 2, 3);
  CHECK(y.data(0, 0) == x.data(0, 1 * 4 + 0));
  const auto back = center_crop_backward(y, 5, 4);
  CHECK(back.data(0, 1 * 4 + 0) == y.data(0, 0));
  CHECK(back.data(0, 0) == 0.0f);
  CHECK(back.data.sum() == doctest::Approx(y.data.sum()));
}

TEST_CASE("Adam step follows the bias-corrected update") {
  Matrix w(1, 2);
  w << 1.0f, -2.0f;
  Matrix g(1, 2);
  g << 0.5f, -0.25f;
  std::vector<ParamRef> params;
  add_param(params, w, g);
  Adam adam(params, {.weight_decay = 0.1});
  adam.step(params, 0.01);
  for (int i = 0; i < 2; ++i) {
    const double w0 = i == 0 ? 1.0 : -2.0;
    const double grad = (i == 0 ? 0.5 : -0.25) + 0.1 * w0;
    const double m = 0.1 * grad / (1 - 0.9);
    const double v = 0.001 * grad * grad / (1 - 0.999);
    CHECK(w(0, i) == doctest::Approx(w0 - 0.01 * m / (std::sqrt(v) + 1e-8)).epsilon(1e-6));
  }
  CHECK(adam.steps() == 1);
}

TEST_CASE("cosine learning rate") {
  CHECK(cosine_lr(1e-3, 0, 100) == doctest::Approx(1e-3));
  CHECK(cosine_lr(1e-3, 50, 100) == doctest::Approx(5e-4));
  CHECK(cosine_lr(1e-3, 100, 100) == doctest::Approx(0.0));
  CHECK(cosine_lr(1e-3, 100, 100, 1e-5) == doctest::Approx(1e-5));
  double prev = 1.0;
  for (std::size_t s = 0; s <= 100; ++s) {
    const double lr = cosine_lr(1e-3, s, 100);
    CHECK(lr <= prev);
    prev = lr;
  }
}

#include "hiner/nn.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "hiner/error.hpp"

namespace hiner::nn {

Linear zeros_like(const Linear& layer) {
  return {Matrix::Zero(layer.weight.rows(), layer.weight.cols()), Vector::Zero(layer.bias.size())};
}

Conv2d zeros_like(const Conv2d& layer) {
  return {Matrix::Zero(layer.weight.rows(), layer.weight.cols()), Vector::Zero(layer.bias.size()),
          layer.kernel};
}

float gelu(float x) {
  return 0.5f * x * (1.0f + std::erf(x * static_cast<float>(std::numbers::sqrt2 / 2.0)));
}

float gelu_derivative(float x) {
  constexpr float inv_sqrt2 = static_cast<float>(std::numbers::sqrt2 / 2.0);
  constexpr float inv_sqrt2pi = static_cast<float>(0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
  const float cdf = 0.5f * (1.0f + std::erf(x * inv_sqrt2));
  return cdf + x * inv_sqrt2pi * std::exp(-0.5f * x * x);
}

void gelu_inplace(Matrix& m) {
  float* p = m.data();
  for (Eigen::Index i = 0; i < m.size(); ++i) p[i] = gelu(p[i]);
}

void gelu_backward_inplace(const Matrix& pre, Matrix& grad) {
  const float* x = pre.data();
  float* g = grad.data();
  for (Eigen::Index i = 0; i < grad.size(); ++i) g[i] *= gelu_derivative(x[i]);
}

Matrix im2col(const FeatureMap& x, int kernel) {
  if (kernel == 1) return x.data;
  const int h = x.height, w = x.width, cin = x.channels(), pad = kernel / 2;
  const int kk = kernel * kernel;
  Matrix cols = Matrix::Zero(static_cast<Eigen::Index>(cin) * kk, static_cast<Eigen::Index>(h) * w);
  for (int ci = 0; ci < cin; ++ci) {
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        const Eigen::Index row = static_cast<Eigen::Index>(ci) * kk + ky * kernel + kx;
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - pad;
          if (sy < 0 || sy >= h) continue;
          for (int xx = 0; xx < w; ++xx) {
            const int sx = xx + kx - pad;
            if (sx < 0 || sx >= w) continue;
            cols(row, static_cast<Eigen::Index>(y) * w + xx) = x.data(ci, static_cast<Eigen::Index>(sy) * w + sx);
          }
        }
      }
    }
  }
  return cols;
}

FeatureMap col2im(const Matrix& cols, int channels, int height, int width, int kernel) {
  if (kernel == 1) return {cols, height, width};
  const int pad = kernel / 2, kk = kernel * kernel;
  FeatureMap out{Matrix::Zero(channels, static_cast<Eigen::Index>(height) * width), height, width};
  for (int ci = 0; ci < channels; ++ci) {
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        const Eigen::Index row = static_cast<Eigen::Index>(ci) * kk + ky * kernel + kx;
        for (int y = 0; y < height; ++y) {
          const int sy = y + ky - pad;
          if (sy < 0 || sy >= height) continue;
          for (int xx = 0; xx < width; ++xx) {
            const int sx = xx + kx - pad;
            if (sx < 0 || sx >= width) continue;
            out.data(ci, static_cast<Eigen::Index>(sy) * width + sx) += cols(row, static_cast<Eigen::Index>(y) * width + xx);
          }
        }
      }
    }
  }
  return out;
}

FeatureMap conv2d(const Conv2d& layer, const FeatureMap& x, Matrix* cols) {
  if (x.channels() != layer.in_channels()) {
    throw ShapeMismatch("conv2d expects " + std::to_string(layer.in_channels()) +
                        " input channels, got " + std::to_string(x.channels()));
  }
  FeatureMap y{Matrix(layer.out_channels(), x.data.cols()), x.height, x.width};
  if (cols) {
    *cols = im2col(x, layer.kernel);
    y.data.noalias() = layer.weight * *cols;
  } else if (layer.kernel == 1) {
    y.data.noalias() = layer.weight * x.data;
  } else {
    const Matrix c = im2col(x, layer.kernel);
    y.data.noalias() = layer.weight * c;
  }
  y.data.colwise() += layer.bias;
  return y;
}

FeatureMap conv2d_backward(const Conv2d& layer, const Matrix& cols, int height, int width,
                           const FeatureMap& dy, Conv2d& grad) {
  grad.weight.noalias() += dy.data * cols.transpose();
  grad.bias += dy.data.rowwise().sum();
  const Matrix dcols = layer.weight.transpose() * dy.data;
  return col2im(dcols, layer.in_channels(), height, width, layer.kernel);
}

FeatureMap pixel_shuffle(const FeatureMap& x, int s) {
  if (s == 1) return x;
  if (x.channels() % (s * s) != 0) throw ShapeMismatch("pixel_shuffle: channels not divisible by stride^2");
  const int c_out = x.channels() / (s * s);
  const int h = x.height, w = x.width, ho = h * s, wo = w * s;
  FeatureMap out{Matrix(c_out, static_cast<Eigen::Index>(ho) * wo), ho, wo};
  for (int c = 0; c < c_out; ++c) {
    for (int i = 0; i < s; ++i) {
      for (int j = 0; j < s; ++j) {
        const int src = c * s * s + i * s + j;
        for (int y = 0; y < h; ++y) {
          for (int xx = 0; xx < w; ++xx) {
            out.data(c, static_cast<Eigen::Index>(y * s + i) * wo + xx * s + j) =
                x.data(src, static_cast<Eigen::Index>(y) * w + xx);
          }
        }
      }
    }
  }
  return out;
}

FeatureMap pixel_unshuffle(const FeatureMap& x, int s) {
  if (s == 1) return x;
  if (x.height % s || x.width % s) throw ShapeMismatch("pixel_unshuffle: size not divisible by stride");
  const int h = x.height / s, w = x.width / s, c_in = x.channels();
  FeatureMap out{Matrix(static_cast<Eigen::Index>(c_in) * s * s, static_cast<Eigen::Index>(h) * w), h, w};
  for (int c = 0; c < c_in; ++c) {
    for (int i = 0; i < s; ++i) {
      for (int j = 0; j < s; ++j) {
        const int dst = c * s * s + i * s + j;
        for (int y = 0; y < h; ++y) {
          for (int xx = 0; xx < w; ++xx) {
            out.data(dst, static_cast<Eigen::Index>(y) * w + xx) =
                x.data(c, static_cast<Eigen::Index>(y * s + i) * x.width + xx * s + j);
          }
        }
      }
    }
  }
  return out;
}

CropOffsets center_crop_offsets(int height, int width, int target_h, int target_w) {
  if (target_h > height || target_w > width) {
    throw ShapeMismatch("center crop target " + std::to_string(target_h) + "x" + std::to_string(target_w) +
                        " exceeds " + std::to_string(height) + "x" + std::to_string(width));
  }
  return {(height - target_h) / 2, (width - target_w) / 2};
}

FeatureMap center_crop(const FeatureMap& x, int th, int tw) {
  if (th == x.height && tw == x.width) return x;
  const auto off = center_crop_offsets(x.height, x.width, th, tw);
  FeatureMap out{Matrix(x.channels(), static_cast<Eigen::Index>(th) * tw), th, tw};
  for (int y = 0; y < th; ++y) {
    for (int xx = 0; xx < tw; ++xx) {
      out.data.col(static_cast<Eigen::Index>(y) * tw + xx) =
          x.data.col(static_cast<Eigen::Index>(y + off.top) * x.width + xx + off.left);
    }
  }
  return out;
}

FeatureMap center_crop_backward(const FeatureMap& dy, int height, int width) {
  if (dy.height == height && dy.width == width) return dy;
  const auto off = center_crop_offsets(height, width, dy.height, dy.width);
  FeatureMap out{Matrix::Zero(dy.channels(), static_cast<Eigen::Index>(height) * width), height, width};
  for (int y = 0; y < dy.height; ++y) {
    for (int xx = 0; xx < dy.width; ++xx) {
      out.data.col(static_cast<Eigen::Index>(y + off.top) * width + xx + off.left) =
          dy.data.col(static_cast<Eigen::Index>(y) * dy.width + xx);
    }
  }
  return out;
}

void add_param(std::vector<ParamRef>& out, Matrix& value, const Matrix& grad, bool decay) {
  out.push_back({{value.data(), static_cast<std::size_t>(value.size())},
                 {grad.data(), static_cast<std::size_t>(grad.size())},
                 decay});
}

void add_param(std::vector<ParamRef>& out, Vector& value, const Vector& grad, bool decay) {
  out.push_back({{value.data(), static_cast<std::size_t>(value.size())},
                 {grad.data(), static_cast<std::size_t>(grad.size())},
                 decay});
}

Adam::Adam(std::span<const ParamRef> params, Options options) : options_(options) {
  for (const auto& p : params) {
    m_.emplace_back(p.value.size(), 0.0f);
    v_.emplace_back(p.value.size(), 0.0f);
  }
}

void Adam::step(std::span<const ParamRef> params, double lr) {
  if (params.size() != m_.size()) throw std::logic_error("Adam: parameter list changed size");
  ++t_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const float step = static_cast<float>(lr / bc1);
  const float inv_sqrt_bc2 = static_cast<float>(1.0 / std::sqrt(bc2));
  const float eps = static_cast<float>(options_.eps);
  const float fb1 = static_cast<float>(b1), fb2 = static_cast<float>(b2);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    auto& m = m_[k];
    auto& v = v_[k];
    const float wd = p.decay ? static_cast<float>(options_.weight_decay) : 0.0f;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const float g = p.grad[i] + wd * p.value[i];
      m[i] = fb1 * m[i] + (1.0f - fb1) * g;
      v[i] = fb2 * v[i] + (1.0f - fb2) * g * g;
      p.value[i] -= step * m[i] / (std::sqrt(v[i]) * inv_sqrt_bc2 + eps);
    }
  }
}

double cosine_lr(double lr_init, std::size_t step, std::size_t total, double lr_min) {
  if (total == 0) return lr_init;
  const double t = std::min(1.0, static_cast<double>(step) / static_cast<double>(total));
  return lr_min + 0.5 * (lr_init - lr_min) * (1.0 + std::cos(std::numbers::pi * t));
}

}  // namespace hiner::nn

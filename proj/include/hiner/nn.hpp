#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace hiner::nn {

using Matrix = Eigen::MatrixXf;
using Vector = Eigen::VectorXf;

// Channels x (height * width); column index is row * width + col.
struct FeatureMap {
  Matrix data;
  int height = 0;
  int width = 0;

  int channels() const { return static_cast<int>(data.rows()); }
};

// y = weight * x + bias, weight is (out x in).
struct Linear {
  Matrix weight;
  Vector bias;

  int in_features() const { return static_cast<int>(weight.cols()); }
  int out_features() const { return static_cast<int>(weight.rows()); }
};

// Same-padded square convolution. weight is (out x in*k*k) with column
// index ci*k*k + ky*k + kx.
struct Conv2d {
  Matrix weight;
  Vector bias;
  int kernel = 3;

  int in_channels() const { return static_cast<int>(weight.cols()) / (kernel * kernel); }
  int out_channels() const { return static_cast<int>(weight.rows()); }
  std::size_t parameter_count() const {
    return static_cast<std::size_t>(weight.size() + bias.size());
  }
};

Linear zeros_like(const Linear& layer);
Conv2d zeros_like(const Conv2d& layer);

float gelu(float x);
float gelu_derivative(float x);
void gelu_inplace(Matrix& m);
// Multiplies `grad` by GELU'(pre) elementwise.
void gelu_backward_inplace(const Matrix& pre, Matrix& grad);

Matrix im2col(const FeatureMap& x, int kernel);
FeatureMap col2im(const Matrix& cols, int channels, int height, int width, int kernel);

// `cols` receives the unfolded input for the backward pass when non-null.
FeatureMap conv2d(const Conv2d& layer, const FeatureMap& x, Matrix* cols = nullptr);
// Accumulates parameter gradients into `grad` and returns d(loss)/d(input).
FeatureMap conv2d_backward(const Conv2d& layer, const Matrix& cols, int height, int width,
                           const FeatureMap& dy, Conv2d& grad);

// Depth-to-space: channel c*s*s + i*s + j at (y, x) moves to channel c at
// (y*s + i, x*s + j).
FeatureMap pixel_shuffle(const FeatureMap& x, int stride);
FeatureMap pixel_unshuffle(const FeatureMap& x, int stride);

struct CropOffsets {
  int top = 0;
  int left = 0;
};
CropOffsets center_crop_offsets(int height, int width, int target_h, int target_w);
FeatureMap center_crop(const FeatureMap& x, int target_h, int target_w);
FeatureMap center_crop_backward(const FeatureMap& dy, int height, int width);

struct ParamRef {
  std::span<float> value;
  std::span<const float> grad;
  bool decay = true;
};

void add_param(std::vector<ParamRef>& out, Matrix& value, const Matrix& grad, bool decay = true);
void add_param(std::vector<ParamRef>& out, Vector& value, const Vector& grad, bool decay = true);

// Adam with L2 weight decay folded into the gradient.
class Adam {
 public:
  struct Options {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
  };

  explicit Adam(std::span<const ParamRef> params, Options options);
  Adam(std::span<const ParamRef> params) : Adam(params, Options{}) {}

  void step(std::span<const ParamRef> params, double lr);
  std::size_t steps() const { return t_; }

 private:
  Options options_;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
  std::size_t t_ = 0;
};

// Half-cosine decay from lr_init at step 0 to lr_min at step == total.
double cosine_lr(double lr_init, std::size_t step, std::size_t total, double lr_min = 0.0);

}  // namespace hiner::nn

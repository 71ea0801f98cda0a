#include "hiner/codec.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "hiner/error.hpp"
#include "hiner/rng.hpp"

namespace hiner {

void PosEncodingConfig::validate() const {
  if (!(base > 1.0)) throw ConfigError("positional encoding base must exceed 1, got " + std::to_string(base));
  if (levels < 1) throw ConfigError("positional encoding needs at least one level");
}

void DecoderConfig::validate(const EmbedShape& embed) const {
  if (embed.height < 1 || embed.width < 1 || embed.channels < 1) {
    throw ConfigError("embedding shape must be positive");
  }
  if (strides.empty()) throw ConfigError("decoder needs at least one block");
  for (int s : strides) {
    if (s < 1) throw ConfigError("decoder strides must be positive");
  }
  if (channel_widths.size() != strides.size() + 1) {
    throw ConfigError("decoder needs one channel width per block plus the input width");
  }
  for (int w : channel_widths) {
    if (w < 1) throw ConfigError("decoder channel widths must be positive");
  }
  if (channel_widths.front() != embed.channels) {
    throw ConfigError("first decoder width must equal the embedding channel count");
  }
  if (kernel_size < 1 || kernel_size % 2 == 0) throw ConfigError("decoder kernel size must be odd");
  if (target_height < 1 || target_width < 1) throw ConfigError("decoder target size must be positive");
  if (upsampled_height(embed) < target_height || upsampled_width(embed) < target_width) {
    throw ConfigError("decoder upsamples to " + std::to_string(upsampled_height(embed)) + "x" +
                      std::to_string(upsampled_width(embed)) + ", smaller than target " +
                      std::to_string(target_height) + "x" + std::to_string(target_width));
  }
}

int DecoderConfig::upsampled_height(const EmbedShape& embed) const {
  int h = embed.height;
  for (int s : strides) h *= s;
  return h;
}

int DecoderConfig::upsampled_width(const EmbedShape& embed) const {
  int w = embed.width;
  for (int s : strides) w *= s;
  return w;
}

std::size_t HinerModel::decoder_parameter_count() const {
  std::size_t n = head.parameter_count();
  for (const auto& b : blocks) n += b.parameter_count();
  return n;
}

std::size_t HinerModel::encoder_parameter_count() const {
  return static_cast<std::size_t>(encoder.layer.weight.size() + encoder.layer.bias.size());
}

std::vector<float> pos_encode(double lambda, const PosEncodingConfig& cfg) {
  if (!(lambda > 0.0 && lambda < 1.0)) {
    throw DomainError("wavelength " + std::to_string(lambda) + " outside (0, 1)");
  }
  std::vector<float> out(cfg.dimension());
  double freq = std::numbers::pi;
  for (int k = 0; k < cfg.levels; ++k) {
    out[2 * k] = static_cast<float>(std::sin(freq * lambda));
    out[2 * k + 1] = static_cast<float>(std::cos(freq * lambda));
    freq *= cfg.base;
  }
  return out;
}

std::vector<float> encoder_input(double lambda, const HinerModel& model) {
  if (model.encoder.mode == EncoderMode::raw_lambda) {
    if (!(lambda > 0.0 && lambda < 1.0)) {
      throw DomainError("wavelength " + std::to_string(lambda) + " outside (0, 1)");
    }
    return {static_cast<float>(lambda)};
  }
  return pos_encode(lambda, model.pe);
}

namespace {

nn::Vector affine(const nn::Linear& layer, const std::vector<float>& input) {
  if (static_cast<int>(input.size()) != layer.in_features()) {
    throw ShapeMismatch("encoder expects " + std::to_string(layer.in_features()) + " inputs, got " +
                        std::to_string(input.size()));
  }
  const Eigen::Map<const nn::Vector> x(input.data(), static_cast<Eigen::Index>(input.size()));
  return layer.weight * x + layer.bias;
}

nn::FeatureMap embedding_map(std::span<const float> embedding, const EmbedShape& shape) {
  if (embedding.size() != shape.size()) {
    throw ShapeMismatch("embedding has " + std::to_string(embedding.size()) + " entries, expected " +
                        std::to_string(shape.size()));
  }
  nn::FeatureMap x{nn::Matrix(shape.channels, shape.height * shape.width), shape.height, shape.width};
  // FeatureMap is column-major (channel fastest), the embedding is channel-major.
  for (int c = 0; c < shape.channels; ++c) {
    for (int p = 0; p < shape.height * shape.width; ++p) {
      x.data(c, p) = embedding[static_cast<std::size_t>(c) * shape.height * shape.width + p];
    }
  }
  return x;
}

std::vector<float> decode_impl(std::span<const float> embedding, const HinerModel& model,
                               ForwardTrace* trace) {
  const auto& cfg = model.decoder_config;
  nn::FeatureMap x = embedding_map(embedding, model.embed_shape());
  if (trace) trace->blocks.resize(model.blocks.size());
  for (std::size_t k = 0; k < model.blocks.size(); ++k) {
    nn::Matrix* cols = nullptr;
    if (trace) {
      trace->blocks[k].height = x.height;
      trace->blocks[k].width = x.width;
      cols = &trace->blocks[k].cols;
    }
    x = nn::pixel_shuffle(nn::conv2d(model.blocks[k], x, cols), cfg.strides[k]);
    if (trace) trace->blocks[k].pre_activation = x.data;
    nn::gelu_inplace(x.data);
  }
  // The head is pointwise, so cropping first gives the same band.
  x = nn::center_crop(x, cfg.target_height, cfg.target_width);
  if (trace) {
    trace->head_input = x.data;
    trace->head_height = x.height;
    trace->head_width = x.width;
  }
  const nn::FeatureMap y = nn::conv2d(model.head, x);
  return {y.data.data(), y.data.data() + y.data.size()};
}

}  // namespace

SpectralEmbedding encode_wavelength(double lambda, const HinerModel& model) {
  nn::Vector e = affine(model.encoder.layer, encoder_input(lambda, model));
  for (Eigen::Index i = 0; i < e.size(); ++i) e[i] = nn::gelu(e[i]);
  return {e.data(), e.data() + e.size()};
}

std::vector<float> decode_band(std::span<const float> embedding, const HinerModel& model) {
  return decode_impl(embedding, model, nullptr);
}

std::vector<float> forward(double lambda, const HinerModel& model) {
  return decode_band(encode_wavelength(lambda, model), model);
}

std::vector<float> forward_traced(double lambda, const HinerModel& model, ForwardTrace& trace) {
  trace.input = encoder_input(lambda, model);
  const nn::Vector pre = affine(model.encoder.layer, trace.input);
  trace.pre_embedding.assign(pre.data(), pre.data() + pre.size());
  SpectralEmbedding e(trace.pre_embedding.size());
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = nn::gelu(trace.pre_embedding[i]);
  return decode_impl(e, model, &trace);
}

std::vector<SpectralEmbedding> all_embeddings(const HinerModel& model, const WavelengthGrid& grid) {
  std::vector<SpectralEmbedding> out;
  out.reserve(grid.size());
  for (double l : grid.lambdas) out.push_back(encode_wavelength(l, model));
  return out;
}

namespace {

HsiCube assemble(const HinerModel& model, std::size_t bands, int bitdepth, auto&& band_at) {
  const auto& cfg = model.decoder_config;
  HsiCube cube(static_cast<int>(bands), cfg.target_height, cfg.target_width, bitdepth);
  for (std::size_t b = 0; b < bands; ++b) {
    const auto band = band_at(b);
    auto dst = cube.band(static_cast<int>(b));
    for (std::size_t i = 0; i < band.size(); ++i) dst[i] = std::clamp(band[i], 0.0f, 1.0f);
  }
  cube.recompute_band_max();
  return cube;
}

}  // namespace

HsiCube reconstruct_cube(const HinerModel& model, const WavelengthGrid& grid, int source_bitdepth) {
  return assemble(model, grid.size(), source_bitdepth,
                  [&](std::size_t b) { return forward(grid.lambdas[b], model); });
}

HsiCube reconstruct_cube(const HinerModel& model, std::span<const SpectralEmbedding> embeddings,
                         int source_bitdepth) {
  return assemble(model, embeddings.size(), source_bitdepth,
                  [&](std::size_t b) { return decode_band(embeddings[b], model); });
}

std::vector<int> width_schedule(int embed_channels, std::size_t blocks, int first_width, int min_width) {
  std::vector<int> widths{embed_channels};
  double w = first_width;
  for (std::size_t k = 0; k < blocks; ++k) {
    widths.push_back(std::max({min_width, 1, static_cast<int>(std::lround(w))}));
    w /= 2.0;
  }
  return widths;
}

namespace {

std::size_t decoder_params(const std::vector<int>& widths, const std::vector<int>& strides, int kernel) {
  std::size_t n = 0;
  for (std::size_t k = 0; k < strides.size(); ++k) {
    const std::size_t out = static_cast<std::size_t>(widths[k + 1]) * strides[k] * strides[k];
    n += (static_cast<std::size_t>(widths[k]) * kernel * kernel + 1) * out;
  }
  return n + static_cast<std::size_t>(widths.back()) + 1;
}

void fill_uniform(nn::Matrix& m, double bound, Rng& rng) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(rng.uniform(-bound, bound));
}

void fill_uniform(nn::Vector& v, double bound, Rng& rng) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = static_cast<float>(rng.uniform(-bound, bound));
}

nn::Conv2d make_conv(int in, int out, int kernel, Rng& rng) {
  nn::Conv2d conv{nn::Matrix(out, in * kernel * kernel), nn::Vector(out), kernel};
  const double bound = 1.0 / std::sqrt(static_cast<double>(in * kernel * kernel));
  fill_uniform(conv.weight, bound, rng);
  fill_uniform(conv.bias, bound, rng);
  return conv;
}

}  // namespace

HinerModel build_model(const CubeDims& dims, const ModelSpec& spec, std::vector<int> channel_widths,
                       std::uint64_t seed) {
  if (dims.height < 1 || dims.width < 1 || dims.bands < 1) throw ConfigError("cube dims must be positive");
  spec.pe.validate();
  HinerModel model;
  model.pe = spec.pe;
  model.decoder_config = {spec.strides, std::move(channel_widths), spec.kernel_size, dims.height,
                          dims.width, spec.min_width};
  model.decoder_config.validate(spec.embed);

  Rng rng(seed);
  Rng enc_rng = rng.fork(1);
  const int in = spec.encoder_mode == EncoderMode::raw_lambda ? 1 : spec.pe.dimension();
  const int e = static_cast<int>(spec.embed.size());
  model.encoder.mode = spec.encoder_mode;
  model.encoder.shape = spec.embed;
  model.encoder.layer = {nn::Matrix(e, in), nn::Vector(e)};
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  fill_uniform(model.encoder.layer.weight, bound, enc_rng);
  fill_uniform(model.encoder.layer.bias, bound, enc_rng);

  Rng dec_rng = rng.fork(2);
  const auto& w = model.decoder_config.channel_widths;
  for (std::size_t k = 0; k < spec.strides.size(); ++k) {
    model.blocks.push_back(
        make_conv(w[k], w[k + 1] * spec.strides[k] * spec.strides[k], spec.kernel_size, dec_rng));
  }
  model.head = make_conv(w.back(), 1, 1, dec_rng);
  return model;
}

HinerModel init_model(const CubeDims& dims, const ModelSpec& spec, std::size_t target_total_bytes,
                      std::uint64_t seed) {
  if (target_total_bytes == 0) throw SizingError("target size must be positive");
  if (spec.strides.empty()) throw ConfigError("decoder needs at least one block");
  const std::size_t embed_bytes = static_cast<std::size_t>(dims.bands) * spec.embed.size();
  const auto total_for = [&](int first) {
    return decoder_params(width_schedule(spec.embed.channels, spec.strides.size(), first, spec.min_width),
                          spec.strides, spec.kernel_size) +
           embed_bytes;
  };

  int best = std::max(spec.min_width, 1);
  std::size_t best_total = total_for(best);
  auto distance = [&](std::size_t t) {
    return t > target_total_bytes ? t - target_total_bytes : target_total_bytes - t;
  };
  for (int first = best + 1; first < (1 << 16); ++first) {
    const std::size_t t = total_for(first);
    if (distance(t) < distance(best_total)) {
      best = first;
      best_total = t;
    }
    if (t > target_total_bytes) break;
  }
  const double rel = static_cast<double>(distance(best_total)) / static_cast<double>(target_total_bytes);
  if (rel > 0.05) {
    throw SizingError("cannot reach " + std::to_string(target_total_bytes) +
                      " bytes within 5%; closest achievable size is " + std::to_string(best_total) +
                      " bytes");
  }
  return build_model(dims, spec,
                     width_schedule(spec.embed.channels, spec.strides.size(), best, spec.min_width), seed);
}

std::size_t size_bytes(const HinerModel& model, int bitwidth, bool include_embeddings, int bands) {
  if (bitwidth != 8 && bitwidth != 16 && bitwidth != 32) {
    throw ConfigError("size_bytes supports bit-widths 8, 16 and 32, got " + std::to_string(bitwidth));
  }
  std::size_t scalars = model.decoder_parameter_count();
  if (include_embeddings) scalars += static_cast<std::size_t>(bands) * model.embed_shape().size();
  return scalars * static_cast<std::size_t>(bitwidth / 8);
}

HinerGrads::HinerGrads(const HinerModel& model)
    : encoder(nn::zeros_like(model.encoder.layer)), head(nn::zeros_like(model.head)) {
  for (const auto& b : model.blocks) blocks.push_back(nn::zeros_like(b));
}

void HinerGrads::zero() {
  encoder.weight.setZero();
  encoder.bias.setZero();
  for (auto& b : blocks) {
    b.weight.setZero();
    b.bias.setZero();
  }
  head.weight.setZero();
  head.bias.setZero();
}

void backward(const HinerModel& model, const ForwardTrace& trace, std::span<const float> dband,
              HinerGrads& grads) {
  const auto& cfg = model.decoder_config;
  nn::FeatureMap d{Eigen::Map<const nn::Matrix>(dband.data(), 1, static_cast<Eigen::Index>(dband.size())),
                   trace.head_height, trace.head_width};
  grads.head.weight.noalias() += d.data * trace.head_input.transpose();
  grads.head.bias += d.data.rowwise().sum();
  d.data = model.head.weight.transpose() * d.data;

  const int pre_h = cfg.upsampled_height(model.embed_shape());
  const int pre_w = cfg.upsampled_width(model.embed_shape());
  d = nn::center_crop_backward(d, pre_h, pre_w);

  for (std::size_t k = model.blocks.size(); k-- > 0;) {
    const auto& tb = trace.blocks[k];
    nn::gelu_backward_inplace(tb.pre_activation, d.data);
    d = nn::pixel_unshuffle(d, cfg.strides[k]);
    d = nn::conv2d_backward(model.blocks[k], tb.cols, tb.height, tb.width, d, grads.blocks[k]);
  }

  if (!model.encoder.trainable()) return;
  const auto& shape = model.embed_shape();
  const int hw = shape.height * shape.width;
  nn::Vector dpre(static_cast<Eigen::Index>(shape.size()));
  for (int c = 0; c < shape.channels; ++c) {
    for (int p = 0; p < hw; ++p) {
      const std::size_t i = static_cast<std::size_t>(c) * hw + p;
      dpre[static_cast<Eigen::Index>(i)] = d.data(c, p) * nn::gelu_derivative(trace.pre_embedding[i]);
    }
  }
  const Eigen::Map<const nn::Vector> x(trace.input.data(), static_cast<Eigen::Index>(trace.input.size()));
  grads.encoder.weight.noalias() += dpre * x.transpose();
  grads.encoder.bias += dpre;
}

std::vector<nn::ParamRef> trainable_params(HinerModel& model, const HinerGrads& grads) {
  std::vector<nn::ParamRef> out;
  if (model.encoder.trainable()) {
    nn::add_param(out, model.encoder.layer.weight, grads.encoder.weight);
    nn::add_param(out, model.encoder.layer.bias, grads.encoder.bias);
  }
  for (std::size_t k = 0; k < model.blocks.size(); ++k) {
    nn::add_param(out, model.blocks[k].weight, grads.blocks[k].weight);
    nn::add_param(out, model.blocks[k].bias, grads.blocks[k].bias);
  }
  nn::add_param(out, model.head.weight, grads.head.weight);
  nn::add_param(out, model.head.bias, grads.head.bias);
  return out;
}

}  // namespace hiner

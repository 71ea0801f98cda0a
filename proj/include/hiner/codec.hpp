#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hiner/hsi_io.hpp"
#include "hiner/nn.hpp"

namespace hiner {

inline constexpr std::size_t kMegabyte = std::size_t{1} << 20;

struct PosEncodingConfig {
  double base = 1.25;
  int levels = 80;

  int dimension() const { return 2 * levels; }
  void validate() const;
};

struct EmbedShape {
  int height = 3;
  int width = 3;
  int channels = 16;

  std::size_t size() const { return static_cast<std::size_t>(height) * width * channels; }
  friend bool operator==(const EmbedShape&, const EmbedShape&) = default;
};

// How a wavelength reaches the embedding.
enum class EncoderMode : std::uint8_t {
  learned = 0,     // positional encoding -> learned affine -> GELU
  frozen = 1,      // positional encoding -> fixed random affine -> GELU (no-encoder ablation)
  raw_lambda = 2,  // raw wavelength -> learned affine -> GELU (no-PE ablation)
};

struct EncoderParams {
  nn::Linear layer;
  EncoderMode mode = EncoderMode::learned;
  EmbedShape shape;

  bool trainable() const { return mode != EncoderMode::frozen; }
};

struct DecoderConfig {
  std::vector<int> strides;
  // channel_widths[0] is the embedding channel count, then one width per block.
  std::vector<int> channel_widths;
  int kernel_size = 3;
  int target_height = 0;
  int target_width = 0;
  // Lower bound applied by the width schedule in init_model.
  int min_width = 8;

  void validate(const EmbedShape& embed) const;
  // Spatial size before the final crop.
  int upsampled_height(const EmbedShape& embed) const;
  int upsampled_width(const EmbedShape& embed) const;
};

struct HinerModel {
  PosEncodingConfig pe;
  EncoderParams encoder;
  std::vector<nn::Conv2d> blocks;
  nn::Conv2d head;  // 1x1, channel_widths.back() -> 1
  DecoderConfig decoder_config;

  const EmbedShape& embed_shape() const { return encoder.shape; }
  std::size_t decoder_parameter_count() const;
  std::size_t encoder_parameter_count() const;
};

// Flat embedding, layout channel * h0 * w0 + row * w0 + col.
using SpectralEmbedding = std::vector<float>;

// Everything init_model needs besides the cube dimensions.
struct ModelSpec {
  EmbedShape embed;
  std::vector<int> strides;
  int kernel_size = 3;
  int min_width = 8;
  PosEncodingConfig pe;
  EncoderMode encoder_mode = EncoderMode::learned;
};

struct CubeDims {
  int height = 0;
  int width = 0;
  int bands = 0;
};

std::vector<float> pos_encode(double lambda, const PosEncodingConfig& cfg);

// Network input for a wavelength under the model's encoder mode.
std::vector<float> encoder_input(double lambda, const HinerModel& model);

SpectralEmbedding encode_wavelength(double lambda, const HinerModel& model);

// Band of target_height x target_width, row-major.
std::vector<float> decode_band(std::span<const float> embedding, const HinerModel& model);

std::vector<float> forward(double lambda, const HinerModel& model);

// Decodes every wavelength of the grid and clamps to [0, 1].
HsiCube reconstruct_cube(const HinerModel& model, const WavelengthGrid& grid, int source_bitdepth = 16);
HsiCube reconstruct_cube(const HinerModel& model, std::span<const SpectralEmbedding> embeddings,
                         int source_bitdepth = 16);

std::vector<SpectralEmbedding> all_embeddings(const HinerModel& model, const WavelengthGrid& grid);

// Widths for a given first-block width under the geometric schedule.
std::vector<int> width_schedule(int embed_channels, std::size_t blocks, int first_width, int min_width);

// Builds a model with explicit channel widths.
HinerModel build_model(const CubeDims& dims, const ModelSpec& spec, std::vector<int> channel_widths,
                       std::uint64_t seed);

// Chooses channel widths so the 8-bit decoder plus C embeddings lands within
// 5% of target_total_bytes.
HinerModel init_model(const CubeDims& dims, const ModelSpec& spec, std::size_t target_total_bytes,
                      std::uint64_t seed);

std::size_t size_bytes(const HinerModel& model, int bitwidth, bool include_embeddings, int bands);

// Per-forward intermediates kept for back-propagation.
struct ForwardTrace {
  std::vector<float> input;         // encoder input
  std::vector<float> pre_embedding; // encoder affine output
  struct Block {
    nn::Matrix cols;
    int height = 0;
    int width = 0;
    nn::Matrix pre_activation;      // after pixel shuffle
  };
  std::vector<Block> blocks;
  nn::Matrix head_input;
  int head_height = 0;
  int head_width = 0;
};

std::vector<float> forward_traced(double lambda, const HinerModel& model, ForwardTrace& trace);

struct HinerGrads {
  nn::Linear encoder;
  std::vector<nn::Conv2d> blocks;
  nn::Conv2d head;

  explicit HinerGrads(const HinerModel& model);
  void zero();
};

// Back-propagates d(loss)/d(band) through decoder and encoder.
void backward(const HinerModel& model, const ForwardTrace& trace, std::span<const float> dband,
              HinerGrads& grads);

std::vector<nn::ParamRef> trainable_params(HinerModel& model, const HinerGrads& grads);

}  // namespace hiner

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace hiner {

// Per-tensor affine quantizer: code = clip(round((v - min) / scale), 0, 2^b - 1).
struct QuantSpec {
  int bitwidth = 8;
  double min = 0.0;
  double scale = 0.0;  // (max - min) / (2^b - 1); 0 for constant tensors

  std::uint32_t max_code() const { return (std::uint32_t{1} << bitwidth) - 1; }
};

struct QuantizedTensor {
  std::string name;
  std::vector<std::uint32_t> shape;
  QuantSpec spec;
  std::vector<std::uint16_t> codes;

  std::size_t element_count() const;
};

// Ties round half away from zero.
QuantizedTensor quantize_tensor(std::span<const float> values, int bitwidth, std::string name = {},
                                std::vector<std::uint32_t> shape = {});
QuantizedTensor quantize_tensor(std::span<const double> values, int bitwidth, std::string name = {},
                                std::vector<std::uint32_t> shape = {});

std::vector<double> dequantize_tensor(const QuantizedTensor& q);
std::vector<float> dequantize_to_float(const QuantizedTensor& q);

// Rounds min/scale to the f32 precision used by the container, so an
// in-memory tensor dequantizes exactly like its deserialized copy.
QuantSpec storage_precision(const QuantSpec& spec);

}  // namespace hiner

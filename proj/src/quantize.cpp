#include "hiner/quantize.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hiner/error.hpp"

namespace hiner {

std::size_t QuantizedTensor::element_count() const {
  if (shape.empty()) return codes.size();
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, std::uint32_t b) { return a * b; });
}

namespace {

// Kept out of line: GCC 11 at -O3 vectorizes a paired double->float->double
// round trip into a plain copy.
[[gnu::noinline]] double round_to_f32(double v) { return static_cast<float>(v); }

template <class T>
QuantizedTensor quantize_impl(std::span<const T> values, int bitwidth, std::string name,
                              std::vector<std::uint32_t> shape) {
  if (bitwidth < 2 || bitwidth > 16) {
    throw ConfigError("quantization bit-width must lie in [2, 16], got " + std::to_string(bitwidth));
  }
  QuantizedTensor q;
  q.name = std::move(name);
  q.shape = shape.empty() ? std::vector<std::uint32_t>{static_cast<std::uint32_t>(values.size())}
                          : std::move(shape);
  if (q.element_count() != values.size()) {
    throw ShapeMismatch("tensor '" + q.name + "' shape does not match its " +
                        std::to_string(values.size()) + " values");
  }
  q.spec.bitwidth = bitwidth;
  q.codes.assign(values.size(), 0);
  if (values.empty()) return q;

  double lo = INFINITY, hi = -INFINITY;
  for (const T v : values) {
    if (!std::isfinite(v)) throw NonFiniteInput("tensor '" + q.name + "' holds a non-finite value");
    lo = std::min(lo, static_cast<double>(v));
    hi = std::max(hi, static_cast<double>(v));
  }
  // Codes are chosen against the f32 spec the container stores, so a
  // decoded stream meets the half-step bound, not just the in-memory copy.
  q.spec.min = round_to_f32(lo);
  q.spec.scale = round_to_f32((hi - lo) / static_cast<double>(q.spec.max_code()));
  if (q.spec.scale == 0.0) return q;
  const double min = q.spec.min, scale = q.spec.scale;
  const int top = static_cast<int>(q.spec.max_code());
  auto error = [&](int code, double v) { return std::abs(min + code * scale - v); };
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    int code = static_cast<int>(std::clamp(std::round((v - min) / scale), 0.0, static_cast<double>(top)));
    // The quotient is rounded; settle near-ties on the dequantized values.
    // Equal errors keep the larger code (half away from zero).
    if (code > 0 && error(code - 1, v) < error(code, v)) --code;
    if (code < top && error(code + 1, v) <= error(code, v)) ++code;
    q.codes[i] = static_cast<std::uint16_t>(code);
  }
  return q;
}

}  // namespace

QuantizedTensor quantize_tensor(std::span<const float> values, int bitwidth, std::string name,
                                std::vector<std::uint32_t> shape) {
  return quantize_impl(values, bitwidth, std::move(name), std::move(shape));
}

QuantizedTensor quantize_tensor(std::span<const double> values, int bitwidth, std::string name,
                                std::vector<std::uint32_t> shape) {
  return quantize_impl(values, bitwidth, std::move(name), std::move(shape));
}

std::vector<double> dequantize_tensor(const QuantizedTensor& q) {
  std::vector<double> out(q.codes.size());
  for (std::size_t i = 0; i < q.codes.size(); ++i) out[i] = q.spec.min + q.codes[i] * q.spec.scale;
  return out;
}

std::vector<float> dequantize_to_float(const QuantizedTensor& q) {
  std::vector<float> out(q.codes.size());
  for (std::size_t i = 0; i < q.codes.size(); ++i) {
    out[i] = static_cast<float>(q.spec.min + q.codes[i] * q.spec.scale);
  }
  return out;
}

QuantSpec storage_precision(const QuantSpec& spec) {
  QuantSpec out = spec;
  out.min = round_to_f32(spec.min);
  out.scale = round_to_f32(spec.scale);
  return out;
}

}  // namespace hiner

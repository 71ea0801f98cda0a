#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

namespace hiner {

// Band-sequential reflectance cube: data[band * H * W + row * W + col].
struct HsiCube {
  int height = 0;
  int width = 0;
  int bands = 0;
  int source_bitdepth = 16;
  std::vector<float> data;
  std::vector<float> band_max;
  // Optional physical wavelengths (nm), carried through the portable container.
  std::vector<double> wavelengths_nm;

  HsiCube() = default;
  HsiCube(int bands, int height, int width, int source_bitdepth = 16);

  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
  std::size_t size() const { return pixels() * bands; }

  float& at(int band, int row, int col) {
    return data[band * pixels() + static_cast<std::size_t>(row) * width + col];
  }
  float at(int band, int row, int col) const {
    return data[band * pixels() + static_cast<std::size_t>(row) * width + col];
  }

  std::span<float> band(int b) { return {data.data() + b * pixels(), pixels()}; }
  std::span<const float> band(int b) const {
    return {data.data() + b * pixels(), pixels()};
  }

  void recompute_band_max();
  bool same_shape(const HsiCube& other) const {
    return height == other.height && width == other.width && bands == other.bands;
  }
};

// Normalized wavelengths, strictly increasing inside (0, 1).
struct WavelengthGrid {
  std::vector<double> lambdas;
  std::size_t size() const { return lambdas.size(); }
};

struct LabelMap {
  int height = 0;
  int width = 0;
  int class_count = 0;
  std::vector<int> labels;  // 0 = unlabeled, otherwise 1..class_count
  std::vector<std::uint8_t> train_mask;
  std::vector<std::uint8_t> test_mask;

  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
  void validate() const;
};

struct SyntheticSpec {
  int height = 36;
  int width = 36;
  int bands = 20;
  int class_count = 4;
  std::uint64_t seed = 7;
  double noise_sigma = 0.0;
  double signature_smoothness = 1.0;
  double train_fraction = 0.05;
};

enum class CubeFormat { envi_raw, portable_container };

// `path` may name either file of the pair or the common stem.
HsiCube load_cube(const std::filesystem::path& path, CubeFormat format);
void save_cube(const HsiCube& cube, const std::filesystem::path& path, CubeFormat format);

LabelMap load_labels(const std::filesystem::path& path);
void save_labels(const LabelMap& labels, const std::filesystem::path& path);

HsiCube normalize(const HsiCube& cube);

WavelengthGrid wavelength_grid(int bands);

struct ShuffledCube {
  HsiCube cube;
  std::vector<std::size_t> permutation;  // new band i holds old band permutation[i]
};

ShuffledCube shuffle_bands(const HsiCube& cube, std::uint64_t seed);
HsiCube unshuffle_bands(const HsiCube& cube, std::span<const std::size_t> permutation);

std::pair<HsiCube, LabelMap> synth_cube(const SyntheticSpec& spec);

}  // namespace hiner

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hiner/codec.hpp"
#include "hiner/error.hpp"
#include "hiner/hsi_io.hpp"

namespace hiner {

struct LossConfig {
  double gamma = 0.01;       // CAM weight
  double eps_angle = 1e-7;   // cosine clamp margin before arccos

  void validate() const;
};

// Losses return the value and, when `grad` is non-empty, add
// scale * d(loss)/d(recon) into it. L1 is reduced by the mean over pixels;
// CAM is the band angle in degrees.
template <class T>
double l1_loss(std::span<const T> recon, std::span<const T> target, std::span<T> grad = {},
               double scale = 1.0);
template <class T>
double cam_loss(std::span<const T> recon, std::span<const T> target, const LossConfig& cfg,
                std::span<T> grad = {}, double scale = 1.0);
template <class T>
double hiner_loss(std::span<const T> recon, std::span<const T> target, const LossConfig& cfg,
                  std::span<T> grad = {}, double scale = 1.0);

enum class Ablation { none, band_shuffle, no_encoder, l1_only, no_pe };

const char* to_string(Ablation a);
Ablation parse_ablation(const std::string& name);

struct TrainConfig {
  int epochs = 100;
  double lr_init = 1e-3;
  double lr_min = 0.0;
  int batch_bands = 1;
  std::uint64_t seed = 0;
  Ablation ablation = Ablation::none;

  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double mean_psnr = 0.0;
  double lr = 0.0;
};

struct TrainReport {
  std::vector<double> epoch_psnr;   // running PSNR of the bands seen during each epoch
  std::vector<double> epoch_loss;
  std::vector<double> epoch_lr;
  std::vector<double> loss_trace;   // one entry per optimizer step
  std::vector<double> band_psnr;    // final, per band
  double mean_psnr = 0.0;
  double wall_seconds = 0.0;
  std::vector<std::size_t> band_permutation;  // set by the band_shuffle ablation
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int epoch, std::size_t step,
                  std::shared_ptr<const HinerModel> last_good)
      : Error(ErrorCategory::numerical, what), epoch_(epoch), step_(step), last_good_(std::move(last_good)) {}
  const char* kind() const noexcept override { return "divergence"; }
  int epoch() const { return epoch_; }
  std::size_t step() const { return step_; }
  // Model state at the end of the last completed epoch, if any.
  const std::shared_ptr<const HinerModel>& last_good() const { return last_good_; }

 private:
  int epoch_;
  std::size_t step_;
  std::shared_ptr<const HinerModel> last_good_;
};

// Switches the encoder path for the no_encoder / no_pe ablations; other
// ablations leave the model untouched.
HinerModel apply_ablation(HinerModel model, Ablation ablation, std::uint64_t seed);

struct TrainResult {
  HinerModel model;
  TrainReport report;
  HsiCube target;  // the cube actually fitted (band-permuted under band_shuffle)
};

TrainResult train_hiner(const HsiCube& cube, const WavelengthGrid& grid, HinerModel model,
                        const LossConfig& loss_cfg, const TrainConfig& train_cfg,
                        const std::function<void(const EpochLog&)>& on_epoch = {});

inline constexpr double kPsnrCap = 100.0;

struct PsnrResult {
  double mean = 0.0;
  std::vector<double> per_band;
};

// Peak of band i is the reference cube's band_max[i].
PsnrResult evaluate_psnr(const HsiCube& reconstruction, const HsiCube& reference);
PsnrResult evaluate_psnr(const HinerModel& model, const WavelengthGrid& grid, const HsiCube& reference);
double band_psnr(std::span<const float> recon, std::span<const float> target, double peak);

}  // namespace hiner

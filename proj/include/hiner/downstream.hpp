#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "hiner/codec.hpp"
#include "hiner/hsi_io.hpp"
#include "hiner/nn.hpp"
#include "hiner/training.hpp"

namespace hiner {

// Adaptive spectral weighting adapter:
//   d   = per-band spatial mean of the input
//   W   = 1 + fc2(gelu(fc1(d)))              (band weights)
//   P   = input scaled band-wise by W
//   out = P + conv_b(gelu(conv_a(P)))        (1x1 convs mix all bands)
struct AswParams {
  nn::Linear fc1;     // C -> C
  nn::Linear fc2;     // C -> C
  nn::Linear conv_a;  // C -> M
  nn::Linear conv_b;  // M -> C

  int bands() const { return static_cast<int>(fc1.weight.cols()); }
  int hidden() const { return static_cast<int>(conv_a.weight.rows()); }
};

int default_asw_hidden(int bands);

// fc2 and conv_b start at zero, so a fresh adapter is the identity map.
AswParams make_asw(int bands, std::uint64_t seed, int hidden = 0);
// Zero everywhere: unit band weights and no mixing.
AswParams asw_identity(int bands, int hidden = 0);

struct AswTrace {
  nn::Matrix input;     // C x HW
  nn::Vector descriptor;
  nn::Vector hidden_pre;
  nn::Vector weights;
  nn::Matrix weighted;  // P
  nn::Matrix mix_pre;   // conv_a(P) before activation
  nn::Matrix mix;       // gelu(mix_pre)
};

HsiCube asw_forward(const HsiCube& recon, const AswParams& params);
HsiCube asw_forward(const HsiCube& recon, const AswParams& params, AswTrace& trace);

struct AswGrads {
  nn::Linear fc1, fc2, conv_a, conv_b;
  explicit AswGrads(const AswParams& p);
  void zero();
};

// d(loss)/d(output) laid out like HsiCube::data; accumulates into grads.
void asw_backward(const AswParams& params, const AswTrace& trace, std::span<const float> doutput,
                  AswGrads& grads);

std::vector<nn::ParamRef> asw_params(AswParams& params, const AswGrads& grads);

// Band descriptor used by the weight MLP.
std::vector<float> band_means(const HsiCube& cube);

struct IsiConfig {
  double eta = 0.1;          // jitter half-width in normalized wavelength units
  double enable_prob = 0.5;  // probability that a draw is jittered at all

  void validate() const;
};

inline constexpr double kIsiMargin = 1e-4;

struct IsiSample {
  HsiCube cube;
  std::vector<double> lambdas;
  bool jittered = false;
};

IsiSample isi_sample(const HinerModel& model, const WavelengthGrid& grid, const IsiConfig& cfg,
                     std::uint64_t seed);

// C x k x k patch, band-major, zero padded outside the image.
struct Patch {
  int bands = 0;
  int size = 0;
  std::vector<float> values;
};

Patch extract_patch(const HsiCube& cube, int row, int col, int size);
// Adds a patch-shaped gradient back into a cube-shaped buffer.
void scatter_patch_grad(std::span<float> cube_grad, int height, int width, int row, int col,
                        const Patch& dpatch);

// Interface every per-pixel classifier implements.
class PatchClassifier {
 public:
  virtual ~PatchClassifier() = default;

  virtual int class_count() const = 0;
  virtual int bands() const = 0;
  virtual int patch_size() const = 0;

  virtual std::vector<float> forward(const Patch& patch) const = 0;
  // Accumulates parameter gradients for d(loss)/d(logits) and returns d(loss)/d(patch).
  virtual Patch backward(const Patch& patch, std::span<const float> dlogits) = 0;
  virtual std::vector<nn::ParamRef> params() = 0;
  virtual void zero_grad() = 0;
  virtual std::unique_ptr<PatchClassifier> clone() const = 0;
};

std::vector<float> classifier_forward(const Patch& patch, const PatchClassifier& classifier);

struct MixerConfig {
  int group_size = 3;
  int embed_dim = 32;
  int layers = 2;
};

// Groups of adjacent bands become tokens; token-mixing and channel-mixing
// residual layers follow; mean-pooled tokens feed a linear head.
std::unique_ptr<PatchClassifier> make_reference_classifier(int bands, int class_count, int patch_size,
                                                           std::uint64_t seed, const MixerConfig& cfg = {});

struct ClassifierTrainConfig {
  double beta = 2.5;
  double lr = 5e-4;
  double weight_decay = 5e-3;
  int epochs = 300;
  int patch_size = 7;
  std::uint64_t seed = 0;
  bool use_asw = true;
  LossConfig recon_loss;
  MixerConfig mixer;

  void validate() const;
};

// Input to classifier training: the decoded cube plus, for ISI, the
// decoder with its encoder side-channel.
struct ClassifierSource {
  HsiCube cube;
  std::optional<HinerModel> model;
  WavelengthGrid grid;
};

ClassifierSource source_from_cube(HsiCube cube);
ClassifierSource source_from_stream(std::span<const std::uint8_t> bytes, int source_bitdepth = 16);

struct ConfusionMatrix {
  int classes = 0;
  std::vector<std::uint64_t> counts;  // row = truth, col = prediction

  std::uint64_t& at(int truth, int pred) { return counts[static_cast<std::size_t>(truth) * classes + pred]; }
  std::uint64_t at(int truth, int pred) const { return counts[static_cast<std::size_t>(truth) * classes + pred]; }
  std::uint64_t total() const;
};

struct ClassificationMetrics {
  ConfusionMatrix confusion;
  double overall_accuracy = 0.0;
  double average_accuracy = 0.0;
  double kappa = 0.0;
  std::vector<double> per_class_accuracy;  // NaN for classes without test pixels
};

ClassificationMetrics metrics_from_confusion(const ConfusionMatrix& cm);
// `predictions` holds one class id (1..class_count) per pixel; only
// test_mask pixels are scored.
ClassificationMetrics evaluate_classification(std::span<const int> predictions, const LabelMap& truth);

struct ClassifierReport {
  std::vector<double> classification_loss;  // per epoch
  std::vector<double> reconstruction_loss;  // per epoch, before the beta weight
  std::vector<bool> isi_jittered;           // per epoch
};

struct ClassifierResult {
  std::unique_ptr<PatchClassifier> classifier;
  AswParams asw;
  bool asw_enabled = false;
  ClassifierReport report;
};

ClassifierResult train_classifier(const ClassifierSource& source, const LabelMap& labels,
                                  const std::optional<IsiConfig>& isi, const ClassifierTrainConfig& cfg);

// Class ids for every pixel of the cube after the adapter.
std::vector<int> predict(const ClassifierResult& trained, const HsiCube& cube);

// "HCLS" snapshot of the reference classifier and adapter parameters.
std::vector<std::uint8_t> serialize_classifier(ClassifierResult& trained, const MixerConfig& mixer);
ClassifierResult deserialize_classifier(std::span<const std::uint8_t> bytes);

}  // namespace hiner

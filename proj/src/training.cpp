#include "hiner/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>

#include "hiner/rng.hpp"

namespace hiner {

void LossConfig::validate() const {
  if (!(gamma >= 0.0)) throw ConfigError("CAM weight gamma must be nonnegative");
  if (!(eps_angle > 0.0 && eps_angle < 1e-3)) throw ConfigError("eps_angle must lie in (0, 1e-3)");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be positive");
  if (!(lr_init > 0.0)) throw ConfigError("initial learning rate must be positive");
  if (lr_min < 0.0 || lr_min > lr_init) throw ConfigError("lr_min must lie in [0, lr_init]");
  if (batch_bands != 1) throw ConfigError("only one band per step is supported");
}

namespace {

template <class T>
void check_same(std::span<const T> a, std::span<const T> b, std::span<T> grad) {
  if (a.size() != b.size()) {
    throw ShapeMismatch("loss inputs differ in size: " + std::to_string(a.size()) + " vs " +
                        std::to_string(b.size()));
  }
  if (!grad.empty() && grad.size() != a.size()) throw ShapeMismatch("gradient buffer size mismatch");
  if (a.empty()) throw ShapeMismatch("loss inputs are empty");
}

}  // namespace

template <class T>
double l1_loss(std::span<const T> recon, std::span<const T> target, std::span<T> grad, double scale) {
  check_same(recon, target, grad);
  const double inv_n = 1.0 / static_cast<double>(recon.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < recon.size(); ++i) {
    const double d = static_cast<double>(recon[i]) - static_cast<double>(target[i]);
    sum += std::abs(d);
    if (!grad.empty() && d != 0.0) grad[i] += static_cast<T>(scale * inv_n * (d > 0.0 ? 1.0 : -1.0));
  }
  return sum * inv_n;
}

template <class T>
double cam_loss(std::span<const T> recon, std::span<const T> target, const LossConfig& cfg,
                std::span<T> grad, double scale) {
  check_same(recon, target, grad);
  double rr = 0.0, tt = 0.0, rt = 0.0;
  for (std::size_t i = 0; i < recon.size(); ++i) {
    const double r = recon[i], t = target[i];
    rr += r * r;
    tt += t * t;
    rt += r * t;
  }
  if (!(rr > 0.0) || !(tt > 0.0)) throw DegenerateInput("CAM loss is undefined for a zero-norm band");
  const double nr = std::sqrt(rr), nt = std::sqrt(tt);
  const double cos_raw = rt / (nr * nt);
  const double lo = -1.0 + cfg.eps_angle, hi = 1.0 - cfg.eps_angle;
  const double c = std::clamp(cos_raw, lo, hi);
  constexpr double deg = 180.0 / std::numbers::pi;
  const double angle = deg * std::acos(c);
  if (!grad.empty() && cos_raw > lo && cos_raw < hi) {
    const double dangle_dc = -deg / std::sqrt(1.0 - c * c);
    const double a = scale * dangle_dc / (nr * nt);
    const double b = scale * dangle_dc * c / rr;
    for (std::size_t i = 0; i < recon.size(); ++i) {
      grad[i] += static_cast<T>(a * static_cast<double>(target[i]) - b * static_cast<double>(recon[i]));
    }
  }
  return angle;
}

template <class T>
double hiner_loss(std::span<const T> recon, std::span<const T> target, const LossConfig& cfg,
                  std::span<T> grad, double scale) {
  const double l1 = l1_loss(recon, target, grad, scale);
  if (cfg.gamma == 0.0) return l1;
  return l1 + cfg.gamma * cam_loss(recon, target, cfg, grad, scale * cfg.gamma);
}

template double l1_loss<float>(std::span<const float>, std::span<const float>, std::span<float>, double);
template double l1_loss<double>(std::span<const double>, std::span<const double>, std::span<double>, double);
template double cam_loss<float>(std::span<const float>, std::span<const float>, const LossConfig&,
                                std::span<float>, double);
template double cam_loss<double>(std::span<const double>, std::span<const double>, const LossConfig&,
                                 std::span<double>, double);
template double hiner_loss<float>(std::span<const float>, std::span<const float>, const LossConfig&,
                                  std::span<float>, double);
template double hiner_loss<double>(std::span<const double>, std::span<const double>, const LossConfig&,
                                   std::span<double>, double);

const char* to_string(Ablation a) {
  switch (a) {
    case Ablation::none: return "default";
    case Ablation::band_shuffle: return "band_shuffle";
    case Ablation::no_encoder: return "no_encoder";
    case Ablation::l1_only: return "l1_only";
    case Ablation::no_pe: return "no_pe";
  }
  return "?";
}

Ablation parse_ablation(const std::string& name) {
  for (auto a : {Ablation::none, Ablation::band_shuffle, Ablation::no_encoder, Ablation::l1_only,
                 Ablation::no_pe}) {
    if (name == to_string(a)) return a;
  }
  if (name == "none") return Ablation::none;
  throw ConfigError("unknown ablation '" + name + "'");
}

HinerModel apply_ablation(HinerModel model, Ablation ablation, std::uint64_t seed) {
  if (ablation == Ablation::no_encoder) {
    model.encoder.mode = EncoderMode::frozen;
  } else if (ablation == Ablation::no_pe && model.encoder.mode != EncoderMode::raw_lambda) {
    model.encoder.mode = EncoderMode::raw_lambda;
    const auto e = static_cast<Eigen::Index>(model.embed_shape().size());
    model.encoder.layer = {nn::Matrix(e, 1), nn::Vector(e)};
    Rng rng(seed ^ 0x5eedULL);
    for (Eigen::Index i = 0; i < e; ++i) {
      model.encoder.layer.weight(i, 0) = static_cast<float>(rng.uniform(-1.0, 1.0));
      model.encoder.layer.bias[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
    }
  }
  return model;
}

double band_psnr(std::span<const float> recon, std::span<const float> target, double peak) {
  if (recon.size() != target.size() || recon.empty()) throw ShapeMismatch("PSNR inputs differ in size");
  double se = 0.0;
  for (std::size_t i = 0; i < recon.size(); ++i) {
    const double d = static_cast<double>(recon[i]) - static_cast<double>(target[i]);
    se += d * d;
  }
  if (se == 0.0) return kPsnrCap;
  const double mse = se / static_cast<double>(recon.size());
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

PsnrResult evaluate_psnr(const HsiCube& reconstruction, const HsiCube& reference) {
  if (!reconstruction.same_shape(reference)) {
    throw ShapeMismatch("PSNR: reconstruction and reference shapes differ");
  }
  PsnrResult r;
  r.per_band.resize(reference.bands);
  double sum = 0.0;
  for (int b = 0; b < reference.bands; ++b) {
    r.per_band[b] = band_psnr(reconstruction.band(b), reference.band(b), reference.band_max[b]);
    sum += r.per_band[b];
  }
  r.mean = sum / reference.bands;
  return r;
}

PsnrResult evaluate_psnr(const HinerModel& model, const WavelengthGrid& grid, const HsiCube& reference) {
  return evaluate_psnr(reconstruct_cube(model, grid, reference.source_bitdepth), reference);
}

TrainResult train_hiner(const HsiCube& cube, const WavelengthGrid& grid, HinerModel model,
                        const LossConfig& loss_cfg, const TrainConfig& train_cfg,
                        const std::function<void(const EpochLog&)>& on_epoch) {
  loss_cfg.validate();
  train_cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  if (grid.size() != static_cast<std::size_t>(cube.bands)) {
    throw ShapeMismatch("wavelength grid has " + std::to_string(grid.size()) + " entries for " +
                        std::to_string(cube.bands) + " bands");
  }
  const auto& dc = model.decoder_config;
  if (dc.target_height != cube.height || dc.target_width != cube.width) {
    throw ShapeMismatch("model decodes " + std::to_string(dc.target_height) + "x" +
                        std::to_string(dc.target_width) + " bands, cube is " + std::to_string(cube.height) +
                        "x" + std::to_string(cube.width));
  }

  TrainResult result{apply_ablation(std::move(model), train_cfg.ablation, train_cfg.seed), {}, cube};
  LossConfig lc = loss_cfg;
  if (train_cfg.ablation == Ablation::l1_only) lc.gamma = 0.0;
  if (train_cfg.ablation == Ablation::band_shuffle) {
    auto shuffled = shuffle_bands(cube, train_cfg.seed ^ 0xb5ULL);
    result.target = std::move(shuffled.cube);
    result.report.band_permutation = std::move(shuffled.permutation);
  }
  const HsiCube& target = result.target;
  HinerModel& m = result.model;
  auto& report = result.report;

  HinerGrads grads(m);
  const auto params = trainable_params(m, grads);
  nn::Adam adam(params);
  Rng order_rng(train_cfg.seed);
  ForwardTrace trace;
  std::vector<float> dband(target.pixels());
  std::vector<float> clamped(target.pixels());
  const std::size_t total_steps = static_cast<std::size_t>(train_cfg.epochs) * target.bands;
  std::size_t step = 0;
  std::shared_ptr<const HinerModel> last_good;

  for (int epoch = 0; epoch < train_cfg.epochs; ++epoch) {
    const auto order = order_rng.fork(static_cast<std::uint64_t>(epoch)).permutation(target.bands);
    double loss_sum = 0.0, psnr_sum = 0.0, lr = 0.0;
    for (std::size_t band : order) {
      lr = nn::cosine_lr(train_cfg.lr_init, step, total_steps, train_cfg.lr_min);
      const auto recon = forward_traced(grid.lambdas[band], m, trace);
      const auto ref = target.band(static_cast<int>(band));
      std::fill(dband.begin(), dband.end(), 0.0f);
      const double loss = hiner_loss<float>(recon, ref, lc, dband);
      if (!std::isfinite(loss)) {
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ", step " +
                                  std::to_string(step) + " (band " + std::to_string(band) + ")",
                              epoch, step, last_good);
      }
      for (std::size_t i = 0; i < recon.size(); ++i) clamped[i] = std::clamp(recon[i], 0.0f, 1.0f);
      psnr_sum += band_psnr(clamped, ref, target.band_max[band]);
      loss_sum += loss;
      report.loss_trace.push_back(loss);

      grads.zero();
      backward(m, trace, dband, grads);
      adam.step(params, lr);
      ++step;
    }
    EpochLog log{epoch, loss_sum / target.bands, psnr_sum / target.bands, lr};
    report.epoch_loss.push_back(log.loss);
    report.epoch_psnr.push_back(log.mean_psnr);
    report.epoch_lr.push_back(lr);
    if (on_epoch) on_epoch(log);
    last_good = std::make_shared<const HinerModel>(m);
  }

  const auto psnr = evaluate_psnr(m, grid, target);
  report.band_psnr = psnr.per_band;
  report.mean_psnr = psnr.mean;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace hiner

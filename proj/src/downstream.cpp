#include "hiner/downstream.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>

#include "hiner/bitstream.hpp"
#include "hiner/error.hpp"
#include "hiner/rng.hpp"

namespace hiner {

namespace {

void fill_uniform(nn::Matrix& m, Rng& rng, double bound) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(rng.uniform(-bound, bound));
}
void fill_uniform(nn::Vector& v, Rng& rng, double bound) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = static_cast<float>(rng.uniform(-bound, bound));
}

nn::Linear fan_in_linear(int in, int out, Rng& rng) {
  nn::Linear l{nn::Matrix(out, in), nn::Vector(out)};
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  fill_uniform(l.weight, rng, bound);
  fill_uniform(l.bias, rng, bound);
  return l;
}

nn::Linear zero_linear(int in, int out) { return {nn::Matrix::Zero(out, in), nn::Vector::Zero(out)}; }

nn::Matrix gelu_copy(const nn::Matrix& pre) {
  nn::Matrix out = pre;
  nn::gelu_inplace(out);
  return out;
}

nn::Matrix cube_matrix(const HsiCube& cube) {
  nn::Matrix x(cube.bands, static_cast<Eigen::Index>(cube.pixels()));
  for (int b = 0; b < cube.bands; ++b) {
    const auto band = cube.band(b);
    for (std::size_t p = 0; p < band.size(); ++p) x(b, static_cast<Eigen::Index>(p)) = band[p];
  }
  return x;
}

HsiCube matrix_cube(const nn::Matrix& x, const HsiCube& like) {
  HsiCube out(like.bands, like.height, like.width, like.source_bitdepth);
  out.wavelengths_nm = like.wavelengths_nm;
  for (int b = 0; b < like.bands; ++b) {
    auto band = out.band(b);
    for (std::size_t p = 0; p < band.size(); ++p) band[p] = x(b, static_cast<Eigen::Index>(p));
  }
  out.recompute_band_max();
  return out;
}

}  // namespace

int default_asw_hidden(int bands) { return std::max(bands / 2, 4); }

AswParams make_asw(int bands, std::uint64_t seed, int hidden) {
  if (bands < 1) throw ConfigError("adapter needs at least one band");
  if (hidden <= 0) hidden = default_asw_hidden(bands);
  Rng rng(seed);
  AswParams p;
  p.fc1 = fan_in_linear(bands, bands, rng);
  p.fc2 = zero_linear(bands, bands);
  p.conv_a = fan_in_linear(bands, hidden, rng);
  p.conv_b = zero_linear(hidden, bands);
  return p;
}

AswParams asw_identity(int bands, int hidden) {
  if (bands < 1) throw ConfigError("adapter needs at least one band");
  if (hidden <= 0) hidden = default_asw_hidden(bands);
  return {zero_linear(bands, bands), zero_linear(bands, bands), zero_linear(bands, hidden),
          zero_linear(hidden, bands)};
}

std::vector<float> band_means(const HsiCube& cube) {
  std::vector<float> d(cube.bands);
  for (int b = 0; b < cube.bands; ++b) {
    double s = 0.0;
    for (float v : cube.band(b)) s += v;
    d[b] = static_cast<float>(s / static_cast<double>(cube.pixels()));
  }
  return d;
}

HsiCube asw_forward(const HsiCube& recon, const AswParams& params) {
  AswTrace trace;
  return asw_forward(recon, params, trace);
}

HsiCube asw_forward(const HsiCube& recon, const AswParams& params, AswTrace& t) {
  if (recon.bands != params.bands()) {
    throw ShapeMismatch("adapter expects " + std::to_string(params.bands()) + " bands, cube has " +
                        std::to_string(recon.bands));
  }
  t.input = cube_matrix(recon);
  const auto means = band_means(recon);
  t.descriptor = Eigen::Map<const nn::Vector>(means.data(), recon.bands);
  t.hidden_pre = params.fc1.weight * t.descriptor + params.fc1.bias;
  nn::Vector h = t.hidden_pre.unaryExpr([](float v) { return nn::gelu(v); });
  t.weights = (params.fc2.weight * h + params.fc2.bias).array() + 1.0f;
  t.weighted = t.weights.asDiagonal() * t.input;
  t.mix_pre = (params.conv_a.weight * t.weighted).colwise() + params.conv_a.bias;
  t.mix = gelu_copy(t.mix_pre);
  nn::Matrix out = t.weighted + params.conv_b.weight * t.mix;
  out.colwise() += params.conv_b.bias;
  return matrix_cube(out, recon);
}

AswGrads::AswGrads(const AswParams& p)
    : fc1(nn::zeros_like(p.fc1)), fc2(nn::zeros_like(p.fc2)), conv_a(nn::zeros_like(p.conv_a)),
      conv_b(nn::zeros_like(p.conv_b)) {}

void AswGrads::zero() {
  for (auto* l : {&fc1, &fc2, &conv_a, &conv_b}) {
    l->weight.setZero();
    l->bias.setZero();
  }
}

void asw_backward(const AswParams& params, const AswTrace& t, std::span<const float> doutput, AswGrads& g) {
  const auto c = t.input.rows(), n = t.input.cols();
  if (doutput.size() != static_cast<std::size_t>(c * n)) throw ShapeMismatch("adapter gradient size mismatch");
  // doutput is band-major, i.e. an (n x c) column-major block.
  const nn::Matrix dout = Eigen::Map<const nn::Matrix>(doutput.data(), n, c).transpose();

  g.conv_b.weight += dout * t.mix.transpose();
  g.conv_b.bias += dout.rowwise().sum();
  nn::Matrix dmix = params.conv_b.weight.transpose() * dout;
  nn::gelu_backward_inplace(t.mix_pre, dmix);
  g.conv_a.weight += dmix * t.weighted.transpose();
  g.conv_a.bias += dmix.rowwise().sum();
  const nn::Matrix dweighted = dout + params.conv_a.weight.transpose() * dmix;

  const nn::Vector dweights = dweighted.cwiseProduct(t.input).rowwise().sum();
  const nn::Vector h = t.hidden_pre.unaryExpr([](float v) { return nn::gelu(v); });
  g.fc2.weight += dweights * h.transpose();
  g.fc2.bias += dweights;
  nn::Vector dh = params.fc2.weight.transpose() * dweights;
  for (Eigen::Index i = 0; i < dh.size(); ++i) dh[i] *= nn::gelu_derivative(t.hidden_pre[i]);
  g.fc1.weight += dh * t.descriptor.transpose();
  g.fc1.bias += dh;
}

std::vector<nn::ParamRef> asw_params(AswParams& p, const AswGrads& g) {
  std::vector<nn::ParamRef> out;
  nn::add_param(out, p.fc1.weight, g.fc1.weight);
  nn::add_param(out, p.fc1.bias, g.fc1.bias, false);
  nn::add_param(out, p.fc2.weight, g.fc2.weight);
  nn::add_param(out, p.fc2.bias, g.fc2.bias, false);
  nn::add_param(out, p.conv_a.weight, g.conv_a.weight);
  nn::add_param(out, p.conv_a.bias, g.conv_a.bias, false);
  nn::add_param(out, p.conv_b.weight, g.conv_b.weight);
  nn::add_param(out, p.conv_b.bias, g.conv_b.bias, false);
  return out;
}

void IsiConfig::validate() const {
  if (!(eta >= 0.0 && eta < 0.5)) throw ConfigError("ISI eta must lie in [0, 0.5)");
  if (!(enable_prob >= 0.0 && enable_prob <= 1.0)) throw ConfigError("ISI probability must lie in [0, 1]");
}

IsiSample isi_sample(const HinerModel& model, const WavelengthGrid& grid, const IsiConfig& cfg,
                     std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  IsiSample s;
  s.lambdas = grid.lambdas;
  s.jittered = cfg.eta > 0.0 && rng.bernoulli(cfg.enable_prob);
  if (!s.jittered) {
    s.cube = reconstruct_cube(model, grid);
    return s;
  }
  for (double& l : s.lambdas) {
    l = std::clamp(l + rng.uniform(-cfg.eta, cfg.eta), kIsiMargin, 1.0 - kIsiMargin);
  }
  s.cube = reconstruct_cube(model, WavelengthGrid{s.lambdas});
  return s;
}

Patch extract_patch(const HsiCube& cube, int row, int col, int size) {
  if (size < 1 || size % 2 == 0) throw ConfigError("patch size must be odd and positive");
  if (row < 0 || row >= cube.height || col < 0 || col >= cube.width) throw ShapeMismatch("patch centre outside cube");
  Patch p{cube.bands, size, std::vector<float>(static_cast<std::size_t>(cube.bands) * size * size, 0.0f)};
  const int r = size / 2;
  for (int b = 0; b < cube.bands; ++b) {
    for (int dy = 0; dy < size; ++dy) {
      const int y = row + dy - r;
      if (y < 0 || y >= cube.height) continue;
      for (int dx = 0; dx < size; ++dx) {
        const int x = col + dx - r;
        if (x < 0 || x >= cube.width) continue;
        p.values[(static_cast<std::size_t>(b) * size + dy) * size + dx] = cube.at(b, y, x);
      }
    }
  }
  return p;
}

void scatter_patch_grad(std::span<float> cube_grad, int height, int width, int row, int col, const Patch& dp) {
  const std::size_t hw = static_cast<std::size_t>(height) * width;
  if (cube_grad.size() != hw * dp.bands) throw ShapeMismatch("patch gradient does not match cube buffer");
  const int r = dp.size / 2;
  for (int b = 0; b < dp.bands; ++b) {
    for (int dy = 0; dy < dp.size; ++dy) {
      const int y = row + dy - r;
      if (y < 0 || y >= height) continue;
      for (int dx = 0; dx < dp.size; ++dx) {
        const int x = col + dx - r;
        if (x < 0 || x >= width) continue;
        cube_grad[b * hw + static_cast<std::size_t>(y) * width + x] +=
            dp.values[(static_cast<std::size_t>(b) * dp.size + dy) * dp.size + dx];
      }
    }
  }
}

std::vector<float> classifier_forward(const Patch& patch, const PatchClassifier& classifier) {
  if (patch.bands != classifier.bands() || patch.size != classifier.patch_size()) {
    throw ShapeMismatch("patch is " + std::to_string(patch.bands) + "x" + std::to_string(patch.size) +
                        ", classifier expects " + std::to_string(classifier.bands()) + "x" +
                        std::to_string(classifier.patch_size()));
  }
  return classifier.forward(patch);
}

namespace {

struct MixerLayer {
  nn::Matrix token;        // G x G
  nn::Vector token_bias;   // G
  nn::Linear channel_in;   // D -> 2D
  nn::Linear channel_out;  // 2D -> D
};

struct MixerWeights {
  nn::Linear embed;  // F -> D
  nn::Matrix pos;    // D x G
  std::vector<MixerLayer> layers;
  nn::Linear head;   // D -> K
};

MixerWeights zeros_like(const MixerWeights& w) {
  MixerWeights z{nn::zeros_like(w.embed), nn::Matrix::Zero(w.pos.rows(), w.pos.cols()), {}, nn::zeros_like(w.head)};
  for (const auto& l : w.layers) {
    z.layers.push_back({nn::Matrix::Zero(l.token.rows(), l.token.cols()), nn::Vector::Zero(l.token_bias.size()),
                        nn::zeros_like(l.channel_in), nn::zeros_like(l.channel_out)});
  }
  return z;
}

struct MixerTrace {
  nn::Matrix tokens;  // F x G
  std::vector<nn::Matrix> x;         // input to each layer, then the final output
  std::vector<nn::Matrix> token_pre;
  std::vector<nn::Matrix> mid;       // after token mixing
  std::vector<nn::Matrix> channel_pre;
  nn::Vector pooled;
};

class MixerClassifier final : public PatchClassifier {
 public:
  MixerClassifier(int bands, int classes, int patch, std::uint64_t seed, const MixerConfig& cfg)
      : bands_(bands), classes_(classes), patch_(patch), cfg_(cfg) {
    if (bands < 1 || classes < 2) throw ConfigError("classifier needs at least one band and two classes");
    if (patch < 1 || patch % 2 == 0) throw ConfigError("patch size must be odd and positive");
    if (cfg.group_size < 1 || cfg.embed_dim < 1 || cfg.layers < 0) throw ConfigError("invalid mixer configuration");
    groups_ = (bands + cfg.group_size - 1) / cfg.group_size;
    const int f = features(), d = cfg.embed_dim;
    Rng rng(seed);
    w_.embed = fan_in_linear(f, d, rng);
    w_.pos = nn::Matrix(d, groups_);
    fill_uniform(w_.pos, rng, 0.02);
    for (int i = 0; i < cfg.layers; ++i) {
      MixerLayer l;
      const double tb = 1.0 / std::sqrt(static_cast<double>(groups_));
      l.token = nn::Matrix(groups_, groups_);
      fill_uniform(l.token, rng, tb);
      l.token_bias = nn::Vector(groups_);
      fill_uniform(l.token_bias, rng, tb);
      l.channel_in = fan_in_linear(d, 2 * d, rng);
      l.channel_out = fan_in_linear(2 * d, d, rng);
      w_.layers.push_back(std::move(l));
    }
    w_.head = fan_in_linear(d, classes, rng);
    g_ = zeros_like(w_);
  }

  int class_count() const override { return classes_; }
  int bands() const override { return bands_; }
  int patch_size() const override { return patch_; }

  std::vector<float> forward(const Patch& patch) const override {
    MixerTrace t;
    const nn::Vector logits = run(patch, t);
    return {logits.data(), logits.data() + logits.size()};
  }

  Patch backward(const Patch& patch, std::span<const float> dlogits) override {
    if (dlogits.size() != static_cast<std::size_t>(classes_)) throw ShapeMismatch("logit gradient size mismatch");
    MixerTrace t;
    run(patch, t);
    const nn::Vector dl = Eigen::Map<const nn::Vector>(dlogits.data(), classes_);
    g_.head.weight += dl * t.pooled.transpose();
    g_.head.bias += dl;
    const nn::Vector dpool = w_.head.weight.transpose() * dl;
    nn::Matrix dx = (dpool / static_cast<float>(groups_)).replicate(1, groups_);

    for (int i = static_cast<int>(w_.layers.size()) - 1; i >= 0; --i) {
      const auto& l = w_.layers[i];
      auto& gl = g_.layers[i];
      nn::Matrix h = gelu_copy(t.channel_pre[i]);
      gl.channel_out.weight += dx * h.transpose();
      gl.channel_out.bias += dx.rowwise().sum();
      nn::Matrix dh = l.channel_out.weight.transpose() * dx;
      nn::gelu_backward_inplace(t.channel_pre[i], dh);
      gl.channel_in.weight += dh * t.mid[i].transpose();
      gl.channel_in.bias += dh.rowwise().sum();
      const nn::Matrix dmid = dx + l.channel_in.weight.transpose() * dh;

      nn::Matrix dy = dmid;
      nn::gelu_backward_inplace(t.token_pre[i], dy);
      gl.token += dy.transpose() * t.x[i];
      gl.token_bias += dy.colwise().sum().transpose();
      dx = dmid + dy * l.token;
    }

    g_.pos += dx;
    g_.embed.weight += dx * t.tokens.transpose();
    g_.embed.bias += dx.rowwise().sum();
    const nn::Matrix dtokens = w_.embed.weight.transpose() * dx;
    Patch dp{bands_, patch_, std::vector<float>(patch.values.size(), 0.0f)};
    const int kk = patch_ * patch_;
    for (int b = 0; b < bands_; ++b) {
      const int grp = b / cfg_.group_size, j = b % cfg_.group_size;
      for (int p = 0; p < kk; ++p) dp.values[static_cast<std::size_t>(b) * kk + p] = dtokens(j * kk + p, grp);
    }
    return dp;
  }

  std::vector<nn::ParamRef> params() override {
    std::vector<nn::ParamRef> out;
    nn::add_param(out, w_.embed.weight, g_.embed.weight);
    nn::add_param(out, w_.embed.bias, g_.embed.bias, false);
    nn::add_param(out, w_.pos, g_.pos, false);
    for (std::size_t i = 0; i < w_.layers.size(); ++i) {
      auto& l = w_.layers[i];
      auto& gl = g_.layers[i];
      nn::add_param(out, l.token, gl.token);
      nn::add_param(out, l.token_bias, gl.token_bias, false);
      nn::add_param(out, l.channel_in.weight, gl.channel_in.weight);
      nn::add_param(out, l.channel_in.bias, gl.channel_in.bias, false);
      nn::add_param(out, l.channel_out.weight, gl.channel_out.weight);
      nn::add_param(out, l.channel_out.bias, gl.channel_out.bias, false);
    }
    nn::add_param(out, w_.head.weight, g_.head.weight);
    nn::add_param(out, w_.head.bias, g_.head.bias, false);
    return out;
  }

  // In place: ParamRef spans point into these buffers.
  void zero_grad() override {
    for (auto* l : {&g_.embed, &g_.head}) {
      l->weight.setZero();
      l->bias.setZero();
    }
    g_.pos.setZero();
    for (auto& l : g_.layers) {
      l.token.setZero();
      l.token_bias.setZero();
      for (auto* c : {&l.channel_in, &l.channel_out}) {
        c->weight.setZero();
        c->bias.setZero();
      }
    }
  }

  std::unique_ptr<PatchClassifier> clone() const override { return std::make_unique<MixerClassifier>(*this); }

 private:
  int features() const { return cfg_.group_size * patch_ * patch_; }

  nn::Vector run(const Patch& patch, MixerTrace& t) const {
    if (patch.bands != bands_ || patch.size != patch_ ||
        patch.values.size() != static_cast<std::size_t>(bands_) * patch_ * patch_) {
      throw ShapeMismatch("patch shape does not match the classifier");
    }
    const int kk = patch_ * patch_;
    t.tokens = nn::Matrix::Zero(features(), groups_);
    for (int b = 0; b < bands_; ++b) {
      const int grp = b / cfg_.group_size, j = b % cfg_.group_size;
      for (int p = 0; p < kk; ++p) t.tokens(j * kk + p, grp) = patch.values[static_cast<std::size_t>(b) * kk + p];
    }
    nn::Matrix x = (w_.embed.weight * t.tokens).colwise() + w_.embed.bias;
    x += w_.pos;
    for (const auto& l : w_.layers) {
      t.x.push_back(x);
      nn::Matrix pre = x * l.token.transpose();
      pre.rowwise() += l.token_bias.transpose();
      t.token_pre.push_back(pre);
      nn::Matrix mid = x + gelu_copy(pre);
      t.mid.push_back(mid);
      nn::Matrix cpre = (l.channel_in.weight * mid).colwise() + l.channel_in.bias;
      t.channel_pre.push_back(cpre);
      x = mid + ((l.channel_out.weight * gelu_copy(cpre)).colwise() + l.channel_out.bias);
    }
    t.x.push_back(x);
    t.pooled = x.rowwise().mean();
    return w_.head.weight * t.pooled + w_.head.bias;
  }

  int bands_, classes_, patch_, groups_ = 0;
  MixerConfig cfg_;
  MixerWeights w_;
  MixerWeights g_;
};

}  // namespace

std::unique_ptr<PatchClassifier> make_reference_classifier(int bands, int class_count, int patch_size,
                                                           std::uint64_t seed, const MixerConfig& cfg) {
  return std::make_unique<MixerClassifier>(bands, class_count, patch_size, seed, cfg);
}

void ClassifierTrainConfig::validate() const {
  if (!(beta >= 0.0)) throw ConfigError("beta must be nonnegative");
  if (!(lr > 0.0)) throw ConfigError("classifier learning rate must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be nonnegative");
  if (epochs < 1) throw ConfigError("classifier epochs must be positive");
  if (patch_size < 1 || patch_size % 2 == 0) throw ConfigError("patch size must be odd and positive");
  recon_loss.validate();
}

ClassifierSource source_from_cube(HsiCube cube) {
  const int bands = cube.bands;
  return {std::move(cube), std::nullopt, wavelength_grid(bands)};
}

ClassifierSource source_from_stream(std::span<const std::uint8_t> bytes, int source_bitdepth) {
  auto decoded = deserialize(bytes);
  ClassifierSource s;
  s.cube = reconstruct_cube(decoded.model, decoded.embeddings, source_bitdepth);
  s.grid = wavelength_grid(decoded.header.dims.bands);
  if (decoded.header.encoder_present) s.model = std::move(decoded.model);
  return s;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

ClassificationMetrics metrics_from_confusion(const ConfusionMatrix& cm) {
  const auto n = cm.total();
  if (n == 0) throw DegenerateInput("no test pixels to score");
  ClassificationMetrics m;
  m.confusion = cm;
  m.per_class_accuracy.assign(cm.classes, std::numeric_limits<double>::quiet_NaN());
  double correct = 0.0, chance = 0.0, aa_sum = 0.0;
  int scored = 0;
  for (int k = 0; k < cm.classes; ++k) {
    double row = 0.0, col = 0.0;
    for (int j = 0; j < cm.classes; ++j) {
      row += static_cast<double>(cm.at(k, j));
      col += static_cast<double>(cm.at(j, k));
    }
    correct += static_cast<double>(cm.at(k, k));
    chance += row * col;
    if (row > 0.0) {
      m.per_class_accuracy[k] = static_cast<double>(cm.at(k, k)) / row;
      aa_sum += m.per_class_accuracy[k];
      ++scored;
    }
  }
  const double total = static_cast<double>(n);
  m.overall_accuracy = correct / total;
  m.average_accuracy = aa_sum / scored;
  const double pe = chance / (total * total);
  m.kappa = pe >= 1.0 ? 1.0 : (m.overall_accuracy - pe) / (1.0 - pe);
  return m;
}

ClassificationMetrics evaluate_classification(std::span<const int> predictions, const LabelMap& truth) {
  truth.validate();
  if (predictions.size() != truth.pixels()) {
    throw ShapeMismatch("prediction count " + std::to_string(predictions.size()) + " != pixel count " +
                        std::to_string(truth.pixels()));
  }
  if (truth.test_mask.empty()) throw DegenerateInput("label map has no test mask");
  ConfusionMatrix cm{truth.class_count,
                     std::vector<std::uint64_t>(static_cast<std::size_t>(truth.class_count) * truth.class_count)};
  for (std::size_t i = 0; i < truth.pixels(); ++i) {
    if (!truth.test_mask[i]) continue;
    const int t = truth.labels[i], p = predictions[i];
    if (p < 1 || p > truth.class_count) throw ShapeMismatch("prediction " + std::to_string(p) + " out of range");
    ++cm.at(t - 1, p - 1);
  }
  return metrics_from_confusion(cm);
}

ClassifierResult train_classifier(const ClassifierSource& source, const LabelMap& labels,
                                  const std::optional<IsiConfig>& isi, const ClassifierTrainConfig& cfg) {
  cfg.validate();
  labels.validate();
  const HsiCube& base = source.cube;
  if (labels.height != base.height || labels.width != base.width) {
    throw ShapeMismatch("label map is " + std::to_string(labels.height) + "x" + std::to_string(labels.width) +
                        ", cube is " + std::to_string(base.height) + "x" + std::to_string(base.width));
  }
  if (isi) {
    isi->validate();
    if (!source.model) throw ConfigError("ISI needs the decoder and encoder side-channel; the source has none");
  }
  std::vector<std::size_t> train;
  for (std::size_t i = 0; i < labels.pixels(); ++i) {
    if (labels.train_mask[i]) train.push_back(i);
  }
  if (train.empty()) throw DegenerateInput("label map has no training pixels");

  Rng rng(cfg.seed);
  ClassifierResult r;
  r.classifier = make_reference_classifier(base.bands, labels.class_count, cfg.patch_size, rng.next_u64(), cfg.mixer);
  r.asw_enabled = cfg.use_asw;
  r.asw = cfg.use_asw ? make_asw(base.bands, rng.next_u64()) : asw_identity(base.bands);
  AswGrads asw_grads(r.asw);
  auto params = r.classifier->params();
  if (cfg.use_asw) {
    const auto extra = asw_params(r.asw, asw_grads);
    params.insert(params.end(), extra.begin(), extra.end());
  }
  nn::Adam adam(params, {.weight_decay = cfg.weight_decay});
  Rng isi_rng = rng.fork(3);

  std::vector<float> dcube(base.size());
  std::vector<float> probs(labels.class_count);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    HsiCube jittered;
    bool was_jittered = false;
    if (isi) {
      auto s = isi_sample(*source.model, source.grid, *isi, isi_rng.next_u64());
      was_jittered = s.jittered;
      jittered = std::move(s.cube);
    }
    const HsiCube& input = isi ? jittered : base;
    AswTrace trace;
    HsiCube adapted = cfg.use_asw ? asw_forward(input, r.asw, trace) : HsiCube{};
    const HsiCube& features = cfg.use_asw ? adapted : input;

    r.classifier->zero_grad();
    asw_grads.zero();
    std::fill(dcube.begin(), dcube.end(), 0.0f);
    double ce = 0.0;
    const double inv_n = 1.0 / static_cast<double>(train.size());
    for (std::size_t idx : train) {
      const int row = static_cast<int>(idx / base.width), col = static_cast<int>(idx % base.width);
      const Patch patch = extract_patch(features, row, col, cfg.patch_size);
      const auto logits = r.classifier->forward(patch);
      const float mx = *std::max_element(logits.begin(), logits.end());
      double z = 0.0;
      for (int k = 0; k < labels.class_count; ++k) z += std::exp(static_cast<double>(logits[k] - mx));
      const int y = labels.labels[idx] - 1;
      for (int k = 0; k < labels.class_count; ++k) {
        const double p = std::exp(static_cast<double>(logits[k] - mx)) / z;
        probs[k] = static_cast<float>(inv_n * (p - (k == y ? 1.0 : 0.0)));
      }
      ce -= inv_n * (static_cast<double>(logits[y] - mx) - std::log(z));
      const Patch dp = r.classifier->backward(patch, probs);
      if (cfg.use_asw) scatter_patch_grad(dcube, base.height, base.width, row, col, dp);
    }
    if (!std::isfinite(ce)) throw NonFiniteInput("classification loss became non-finite at epoch " + std::to_string(epoch));

    double recon = 0.0;
    if (cfg.use_asw) {
      for (int b = 0; b < base.bands; ++b) {
        std::span<float> g;
        if (cfg.beta > 0.0) g = {dcube.data() + b * base.pixels(), base.pixels()};
        recon += hiner_loss<float>(features.band(b), input.band(b), cfg.recon_loss, g, cfg.beta);
      }
      asw_backward(r.asw, trace, dcube, asw_grads);
    }
    adam.step(params, cfg.lr);
    r.report.classification_loss.push_back(ce);
    r.report.reconstruction_loss.push_back(recon);
    r.report.isi_jittered.push_back(was_jittered);
  }
  return r;
}

std::vector<int> predict(const ClassifierResult& trained, const HsiCube& cube) {
  const HsiCube adapted = trained.asw_enabled ? asw_forward(cube, trained.asw) : HsiCube{};
  const HsiCube& features = trained.asw_enabled ? adapted : cube;
  std::vector<int> out(cube.pixels());
  const int k = trained.classifier->patch_size();
  for (int row = 0; row < cube.height; ++row) {
    for (int col = 0; col < cube.width; ++col) {
      const auto logits = classifier_forward(extract_patch(features, row, col, k), *trained.classifier);
      out[static_cast<std::size_t>(row) * cube.width + col] =
          static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin()) + 1;
    }
  }
  return out;
}

namespace {

constexpr char kClassifierMagic[4] = {'H', 'C', 'L', 'S'};
constexpr std::uint8_t kClassifierVersion = 1;

template <class T>
void put(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <class T>
T get(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  if (bytes.size() - pos < sizeof(T)) throw TruncatedStream("classifier checkpoint ends early");
  T v;
  std::memcpy(&v, bytes.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

std::vector<std::uint8_t> serialize_classifier(ClassifierResult& trained, const MixerConfig& mixer) {
  auto& c = *trained.classifier;
  std::vector<std::uint8_t> out(kClassifierMagic, kClassifierMagic + 4);
  put<std::uint8_t>(out, kClassifierVersion);
  put<std::uint8_t>(out, trained.asw_enabled ? 1 : 0);
  for (int v : {c.bands(), c.class_count(), c.patch_size(), mixer.group_size, mixer.embed_dim, mixer.layers,
                trained.asw.hidden()}) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(v));
  }
  AswGrads unused(trained.asw);
  auto params = c.params();
  const auto extra = asw_params(trained.asw, unused);
  params.insert(params.end(), extra.begin(), extra.end());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.size()));
    const auto* raw = reinterpret_cast<const std::uint8_t*>(p.value.data());
    out.insert(out.end(), raw, raw + p.value.size_bytes());
  }
  return out;
}

ClassifierResult deserialize_classifier(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kClassifierMagic, 4) != 0) {
    throw BadMagic("not a classifier checkpoint");
  }
  std::size_t pos = 4;
  if (get<std::uint8_t>(bytes, pos) != kClassifierVersion) throw VersionMismatch("unsupported classifier checkpoint version");
  ClassifierResult r;
  r.asw_enabled = get<std::uint8_t>(bytes, pos) != 0;
  int v[7];
  for (int& x : v) x = static_cast<int>(get<std::uint32_t>(bytes, pos));
  r.classifier = make_reference_classifier(v[0], v[1], v[2], 0, MixerConfig{v[3], v[4], v[5]});
  r.asw = asw_identity(v[0], v[6]);
  AswGrads unused(r.asw);
  auto params = r.classifier->params();
  const auto extra = asw_params(r.asw, unused);
  params.insert(params.end(), extra.begin(), extra.end());
  if (get<std::uint32_t>(bytes, pos) != params.size()) throw CorruptStream("classifier checkpoint tensor count mismatch");
  for (auto& p : params) {
    if (get<std::uint32_t>(bytes, pos) != p.value.size()) throw CorruptStream("classifier checkpoint tensor size mismatch");
    if (bytes.size() - pos < p.value.size_bytes()) throw TruncatedStream("classifier checkpoint ends early");
    std::memcpy(p.value.data(), bytes.data() + pos, p.value.size_bytes());
    pos += p.value.size_bytes();
  }
  if (pos != bytes.size()) throw CorruptStream("trailing bytes after classifier checkpoint");
  return r;
}

}  // namespace hiner

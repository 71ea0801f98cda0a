#include "hiner/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hiner/bitstream.hpp"
#include "hiner/codec.hpp"
#include "hiner/downstream.hpp"
#include "hiner/error.hpp"
#include "hiner/hsi_io.hpp"
#include "hiner/training.hpp"

namespace hiner {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct CubeOptions {
  std::string path;
  std::string format = "auto";
};

CubeFormat resolve_format(const std::string& path, const std::string& format) {
  if (format == "envi") return CubeFormat::envi_raw;
  if (format == "portable") return CubeFormat::portable_container;
  if (format != "auto") throw ConfigError("unknown cube format '" + format + "' (envi, portable, auto)");
  const auto ext = fs::path(path).extension().string();
  if (ext == ".hdr" || ext == ".raw") return CubeFormat::envi_raw;
  if (ext == ".json" || ext == ".hsrb") return CubeFormat::portable_container;
  fs::path hdr = path;
  hdr += ".hdr";
  return fs::exists(hdr) ? CubeFormat::envi_raw : CubeFormat::portable_container;
}

HsiCube load_normalized(const CubeOptions& o) {
  return normalize(load_cube(o.path, resolve_format(o.path, o.format)));
}

struct ModelOptions {
  std::vector<int> embed{3, 3, 16};
  std::vector<int> strides{3, 2, 2};
  std::vector<int> widths;  // explicit widths bypass the budget search
  int min_width = 8;
  int kernel = 3;
  double pe_base = 1.25;
  int pe_levels = 80;
  double budget_mb = 0.2;
  double gamma = 0.01;
  int epochs = 100;
  double lr = 1e-3;
  int bitwidth = 8;
  bool side_channel = true;
};

void add_model_options(CLI::App* sub, ModelOptions& m) {
  sub->add_option("--embed", m.embed, "Embedding h0,w0,c0")->delimiter(',')->expected(3)->capture_default_str();
  sub->add_option("--strides", m.strides, "Decoder upsampling strides")->delimiter(',')->capture_default_str();
  sub->add_option("--widths", m.widths, "Explicit channel widths c0,w1..wK (skips the budget search)")
      ->delimiter(',');
  sub->add_option("--min-width", m.min_width, "Width floor of the budget search")->capture_default_str();
  sub->add_option("--kernel", m.kernel, "Decoder kernel size")->capture_default_str();
  sub->add_option("--pe-base", m.pe_base, "Positional encoding base b")->capture_default_str();
  sub->add_option("--pe-levels", m.pe_levels, "Positional encoding levels l")->capture_default_str();
  sub->add_option("--budget-mb", m.budget_mb, "Model budget in MB (2^20 bytes, one byte per scalar, embeddings included)")
      ->capture_default_str();
  sub->add_option("--gamma", m.gamma, "CAM loss weight")->capture_default_str();
  sub->add_option("--epochs", m.epochs, "Training epochs")->capture_default_str();
  sub->add_option("--lr", m.lr, "Initial learning rate")->capture_default_str();
  sub->add_option("--bitwidth", m.bitwidth, "Quantization bit-width (2..8)")->capture_default_str();
  sub->add_flag("--side-channel,!--no-side-channel", m.side_channel,
                "Store the encoder as an uncounted side-channel")
      ->default_str(m.side_channel ? "true" : "false");
}

ModelSpec model_spec(const ModelOptions& m, EmbedShape embed) {
  ModelSpec s;
  s.embed = embed;
  s.strides = m.strides;
  s.kernel_size = m.kernel;
  s.min_width = m.min_width;
  s.pe = {m.pe_base, m.pe_levels};
  return s;
}

HinerModel make_model(const ModelOptions& m, const HsiCube& cube, EmbedShape embed, std::uint64_t seed) {
  if (m.bitwidth < 2 || m.bitwidth > 8) throw ConfigError("bitwidth must lie in 2..8");
  if (!(m.budget_mb > 0.0)) throw ConfigError("budget must be positive");
  const CubeDims dims{cube.height, cube.width, cube.bands};
  const auto spec = model_spec(m, embed);
  if (!m.widths.empty()) return build_model(dims, spec, m.widths, seed);
  return init_model(dims, spec, static_cast<std::size_t>(m.budget_mb * static_cast<double>(kMegabyte)), seed);
}

EmbedShape embed_from(const std::vector<int>& v) {
  if (v.size() != 3) throw ConfigError("embedding shape needs three values");
  return {v[0], v[1], v[2]};
}

json resolved_config(const CLI::App* sub) {
  json cfg = json::object();
  cfg["subcommand"] = sub->get_name();
  for (const CLI::Option* opt : sub->get_options()) {
    const auto name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config") continue;
    if (opt->count() > 0) {
      const auto& r = opt->results();
      if (r.size() == 1) {
        cfg[name] = r.front();
      } else {
        cfg[name] = r;
      }
    } else {
      cfg[name] = opt->get_default_str();
    }
  }
  return cfg;
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write " + path);
  f << text;
  if (!f) throw IoError("short write to " + path);
}

json psnr_json(const PsnrResult& p) { return {{"mean", p.mean}, {"per_band", p.per_band}}; }

json nan_safe(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string json_error(const std::string& kind, const std::string& category, const std::string& message) {
  json e = {{"error", {{"kind", kind}, {"category", category}, {"message", message}}}};
  return e.dump() + "\n";
}

const char* category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::config: return "config";
    case ErrorCategory::data: return "data";
    case ErrorCategory::numerical: return "numerical";
  }
  return "unknown";
}

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::config: return kExitConfig;
    case ErrorCategory::data: return kExitData;
    case ErrorCategory::numerical: return kExitNumerical;
  }
  return kExitInternal;
}

// ---- synth ------------------------------------------------------------

struct SynthOptions {
  SyntheticSpec spec;
  std::string out;
  std::string format = "portable";
};

void cmd_synth(const SynthOptions& o, std::ostream& out) {
  if (o.out.empty()) throw ConfigError("synth needs --out <stem>");
  auto [cube, labels] = synth_cube(o.spec);
  const auto fmt = resolve_format(o.out, o.format);
  if (fmt == CubeFormat::envi_raw) {
    for (auto& v : cube.data) v = std::round(v * 65535.0f);
    cube.recompute_band_max();
  }
  save_cube(cube, o.out, fmt);
  const auto label_stem = fs::path(o.out).replace_extension().string() + "_labels";
  save_labels(labels, label_stem);
  json r = {{"cube", o.out},
            {"labels", label_stem},
            {"height", cube.height},
            {"width", cube.width},
            {"bands", cube.bands},
            {"class_count", labels.class_count}};
  out << r.dump(2) << "\n";
}

// ---- convert ----------------------------------------------------------

struct ConvertOptions {
  CubeOptions input;
  std::string out;
  std::string out_format = "auto";
};

void cmd_convert(const ConvertOptions& o, std::ostream& out) {
  if (o.out.empty()) throw ConfigError("convert needs --out");
  const auto cube = load_cube(o.input.path, resolve_format(o.input.path, o.input.format));
  save_cube(cube, o.out, resolve_format(o.out, o.out_format));
  json r = {{"input", o.input.path}, {"output", o.out}, {"height", cube.height}, {"width", cube.width},
            {"bands", cube.bands}};
  out << r.dump(2) << "\n";
}

// ---- encode -----------------------------------------------------------

struct EncodeOptions {
  CubeOptions input;
  ModelOptions model;
  std::string ablation = "default";
  std::string out;
  std::string report;
  std::string log;
  std::string checkpoint;
};

void cmd_encode(const EncodeOptions& o, std::uint64_t seed, const json& config, std::ostream& out) {
  if (o.out.empty()) throw ConfigError("encode needs --out <stream.hinr>");
  const auto ablation = parse_ablation(o.ablation);
  if (o.model.epochs < 1) throw ConfigError("epochs must be positive");
  const HsiCube cube = load_normalized(o.input);
  const auto grid = wavelength_grid(cube.bands);
  auto model = make_model(o.model, cube, embed_from(o.model.embed), seed);

  const auto log_path = o.log.empty() ? o.out + ".train.csv" : o.log;
  std::ofstream log(log_path, std::ios::trunc);
  if (!log) throw IoError("cannot write " + log_path);
  log << "epoch,loss,mean_psnr,lr\n";
  log.precision(10);
  TrainConfig tc;
  tc.epochs = o.model.epochs;
  tc.lr_init = o.model.lr;
  tc.seed = seed;
  tc.ablation = ablation;
  LossConfig lc;
  lc.gamma = o.model.gamma;
  auto result = train_hiner(cube, grid, std::move(model), lc, tc, [&](const EpochLog& e) {
    log << e.epoch << ',' << e.loss << ',' << e.mean_psnr << ',' << e.lr << '\n';
  });

  const auto ckpt = o.checkpoint.empty() ? o.out + ".ckpt" : o.checkpoint;
  write_file(ckpt, serialize_checkpoint(result.model));
  const auto embeddings = all_embeddings(result.model, grid);
  const auto bytes = serialize(result.model, embeddings, o.model.bitwidth, o.model.side_channel);
  write_file(o.out, bytes);

  const CubeDims dims{cube.height, cube.width, cube.bands};
  const auto decoded = reconstruct_from_bitstream(bytes, dims, cube.source_bitdepth);
  const auto psnr_q = evaluate_psnr(decoded, result.target);
  const auto rate = rate_breakdown(bytes);
  const double bp = bpppb(rate.rate_payload_bytes, dims);

  json r;
  r["stream"] = o.out;
  r["checkpoint"] = ckpt;
  r["log"] = log_path;
  r["height"] = cube.height;
  r["width"] = cube.width;
  r["bands"] = cube.bands;
  r["channel_widths"] = result.model.decoder_config.channel_widths;
  r["decoder_parameters"] = result.model.decoder_parameter_count();
  r["encoder_parameters"] = result.model.encoder_parameter_count();
  r["rate_payload_bytes"] = rate.rate_payload_bytes;
  r["side_payload_bytes"] = rate.side_payload_bytes;
  r["overhead_bytes"] = rate.overhead_bytes;
  r["file_bytes"] = rate.file_bytes;
  r["bpppb"] = bp;
  r["file_bpppb"] = bpppb(rate.file_bytes, dims);
  r["compression_ratio"] = compression_ratio(cube.source_bitdepth, bp);
  r["psnr_float"] = psnr_json({result.report.mean_psnr, result.report.band_psnr});
  r["psnr_quantized"] = psnr_json(psnr_q);
  r["wall_seconds"] = result.report.wall_seconds;
  if (!result.report.band_permutation.empty()) r["band_permutation"] = result.report.band_permutation;
  r["config"] = config;
  emit(r.dump(2) + "\n", o.report, out);
}

// ---- decode / eval ----------------------------------------------------

struct DecodeOptions {
  std::string stream;
  std::string out;
  CubeOptions reference;
  std::string report;
};

void cmd_decode(const DecodeOptions& o, const json& config, std::ostream& out) {
  if (o.out.empty()) throw ConfigError("decode needs --out <cube stem>");
  const auto bytes = read_file(o.stream);
  const auto stream = deserialize(bytes);
  const auto cube = reconstruct_cube(stream.model, stream.embeddings);
  save_cube(cube, o.out, CubeFormat::portable_container);
  const auto& d = stream.header.dims;
  json r;
  r["stream"] = o.stream;
  r["output"] = o.out;
  r["height"] = d.height;
  r["width"] = d.width;
  r["bands"] = d.bands;
  r["bpppb"] = bpppb(stream.rate.rate_payload_bytes, d);
  if (!o.reference.path.empty()) {
    const auto ref = load_normalized(o.reference);
    r["psnr"] = psnr_json(evaluate_psnr(cube, ref));
  }
  r["config"] = config;
  emit(r.dump(2) + "\n", o.report, out);
}

struct EvalOptions {
  CubeOptions input;
  std::string stream;
  CubeOptions reference;
  std::string report;
};

void cmd_eval(const EvalOptions& o, const json& config, std::ostream& out) {
  if (o.reference.path.empty()) throw ConfigError("eval needs --reference");
  if (o.input.path.empty() == o.stream.empty()) throw ConfigError("eval needs exactly one of --input, --stream");
  const auto ref = load_normalized(o.reference);
  json r;
  HsiCube cube;
  if (!o.stream.empty()) {
    const auto bytes = read_file(o.stream);
    cube = reconstruct_from_bitstream(bytes, {ref.height, ref.width, ref.bands});
    const auto rate = rate_breakdown(bytes);
    const double bp = bpppb(rate.rate_payload_bytes, {ref.height, ref.width, ref.bands});
    r["bpppb"] = bp;
    r["compression_ratio"] = compression_ratio(ref.source_bitdepth, bp);
  } else {
    cube = load_cube(o.input.path, resolve_format(o.input.path, o.input.format));
  }
  r["psnr"] = psnr_json(evaluate_psnr(cube, ref));
  r["config"] = config;
  emit(r.dump(2) + "\n", o.report, out);
}

// ---- ablate -----------------------------------------------------------

struct AblateOptions {
  CubeOptions input;
  ModelOptions model;
  std::vector<std::string> variants{"default", "band_shuffle", "no_encoder", "l1_only", "no_pe"};
  std::vector<std::string> embed_sweep;
  std::string out;
};

EmbedShape parse_embed(const std::string& s) {
  EmbedShape e;
  char x1 = 0, x2 = 0;
  std::istringstream in(s);
  if (!(in >> e.height >> x1 >> e.width >> x2 >> e.channels) || x1 != 'x' || x2 != 'x' || !in.eof()) {
    throw ConfigError("embedding size '" + s + "' is not of the form HxWxC");
  }
  return e;
}

std::string csv_number(double v) {
  if (!std::isfinite(v)) return "nan";
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

int cmd_ablate(const AblateOptions& o, std::uint64_t seed, std::ostream& out, std::ostream& err) {
  if (o.variants.empty() && o.embed_sweep.empty()) throw ConfigError("ablate needs at least one variant");
  const HsiCube cube = load_normalized(o.input);
  const auto grid = wavelength_grid(cube.bands);
  const CubeDims dims{cube.height, cube.width, cube.bands};

  struct Job {
    std::string name;
    std::string ablation;
    std::string embed;
  };
  std::vector<Job> jobs;
  for (const auto& v : o.variants) jobs.push_back({v, v, ""});
  for (const auto& s : o.embed_sweep) jobs.push_back({"embed_" + s, "default", s});

  std::ostringstream csv;
  csv << "variant,bpppb,psnr_float,psnr_q8\n";
  int failures = 0, last_code = kExitOk;
  for (const auto& job : jobs) {
    try {
      const auto embed = job.embed.empty() ? embed_from(o.model.embed) : parse_embed(job.embed);
      auto model = make_model(o.model, cube, embed, seed);
      TrainConfig tc;
      tc.epochs = o.model.epochs;
      tc.lr_init = o.model.lr;
      tc.seed = seed;
      tc.ablation = parse_ablation(job.ablation);
      LossConfig lc;
      lc.gamma = o.model.gamma;
      auto result = train_hiner(cube, grid, std::move(model), lc, tc);
      const auto bytes = serialize(result.model, all_embeddings(result.model, grid), o.model.bitwidth, false);
      const auto q = evaluate_psnr(reconstruct_from_bitstream(bytes, dims), result.target);
      csv << job.name << ',' << csv_number(bpppb(rate_breakdown(bytes).rate_payload_bytes, dims)) << ','
          << csv_number(result.report.mean_psnr) << ',' << csv_number(q.mean) << '\n';
    } catch (const Error& e) {
      ++failures;
      last_code = exit_code(e.category());
      err << json_error(e.kind(), category_name(e.category()), job.name + ": " + e.what());
      csv << job.name << ",nan,nan,nan\n";
    }
  }
  emit(csv.str(), o.out, out);
  return failures == static_cast<int>(jobs.size()) ? last_code : kExitOk;
}

// ---- classify ---------------------------------------------------------

struct ClassifyOptions {
  std::string stream;
  std::string labels;
  std::vector<std::string> variants{"plain", "asw", "asw_isi"};
  double beta = 2.5;
  double eta = 0.1;
  double isi_prob = 0.5;
  double lr = 5e-4;
  double weight_decay = 5e-3;
  int epochs = 300;
  int patch = 7;
  std::string out;
  std::string checkpoint;
};

json metrics_json(const ClassificationMetrics& m) {
  json per_class = json::array();
  for (double a : m.per_class_accuracy) per_class.push_back(nan_safe(a));
  json confusion = json::array();
  for (int t = 0; t < m.confusion.classes; ++t) {
    json row = json::array();
    for (int p = 0; p < m.confusion.classes; ++p) row.push_back(m.confusion.at(t, p));
    confusion.push_back(row);
  }
  return {{"overall_accuracy", m.overall_accuracy},
          {"average_accuracy", m.average_accuracy},
          {"kappa", m.kappa},
          {"per_class_accuracy", per_class},
          {"confusion", confusion}};
}

void cmd_classify(const ClassifyOptions& o, std::uint64_t seed, const json& config, std::ostream& out) {
  if (o.labels.empty()) throw ConfigError("classify needs --labels");
  fs::path side = o.labels;
  side.replace_extension(".json");
  if (!fs::exists(side)) throw ConfigError("label file " + side.string() + " does not exist");
  if (o.variants.empty()) throw ConfigError("classify needs at least one variant");
  const auto labels = load_labels(o.labels);
  const auto bytes = read_file(o.stream);
  const auto source = source_from_stream(bytes);
  const CubeDims dims{source.cube.height, source.cube.width, source.cube.bands};
  const double bp = bpppb(rate_breakdown(bytes).rate_payload_bytes, dims);

  json r;
  r["stream"] = o.stream;
  r["bpppb"] = bp;
  r["compression_ratio"] = compression_ratio(source.cube.source_bitdepth, bp);
  r["variants"] = json::object();
  for (const auto& v : o.variants) {
    ClassifierTrainConfig cfg;
    cfg.beta = o.beta;
    cfg.lr = o.lr;
    cfg.weight_decay = o.weight_decay;
    cfg.epochs = o.epochs;
    cfg.patch_size = o.patch;
    cfg.seed = seed;
    std::optional<IsiConfig> isi;
    if (v == "plain") {
      cfg.use_asw = false;
    } else if (v == "asw") {
    } else if (v == "asw_isi") {
      isi = IsiConfig{o.eta, o.isi_prob};
    } else if (v == "asw_beta0") {
      cfg.beta = 0.0;
    } else {
      throw ConfigError("unknown classification variant '" + v + "' (plain, asw, asw_isi, asw_beta0)");
    }
    auto trained = train_classifier(source, labels, isi, cfg);
    const auto metrics = evaluate_classification(predict(trained, source.cube), labels);
    json entry = metrics_json(metrics);
    entry["final_classification_loss"] = trained.report.classification_loss.back();
    if (!o.checkpoint.empty()) {
      const auto path = o.checkpoint + "." + v + ".hcls";
      write_file(path, serialize_classifier(trained, cfg.mixer));
      entry["checkpoint"] = path;
    }
    r["variants"][v] = entry;
  }
  r["config"] = config;
  emit(r.dump(2) + "\n", o.out, out);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hyperspectral neural codec"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML-style config file; command-line flags override it");
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Random seed")->capture_default_str();

  SynthOptions synth;
  auto* s_synth = app.add_subcommand("synth", "Write the synthetic fixture cube and labels");
  s_synth->add_option("--height", synth.spec.height)->capture_default_str();
  s_synth->add_option("--width", synth.spec.width)->capture_default_str();
  s_synth->add_option("--bands", synth.spec.bands)->capture_default_str();
  s_synth->add_option("--classes", synth.spec.class_count)->capture_default_str();
  s_synth->add_option("--noise", synth.spec.noise_sigma)->capture_default_str();
  s_synth->add_option("--smoothness", synth.spec.signature_smoothness)->capture_default_str();
  s_synth->add_option("--train-fraction", synth.spec.train_fraction)->capture_default_str();
  s_synth->add_option("--fixture-seed", synth.spec.seed, "Seed of the fixture itself")->capture_default_str();
  s_synth->add_option("--format", synth.format, "portable or envi")->capture_default_str();
  s_synth->add_option("--out", synth.out, "Output stem");

  ConvertOptions conv;
  auto* s_conv = app.add_subcommand("convert", "Convert between ENVI raw and the portable container");
  s_conv->add_option("--input", conv.input.path)->required();
  s_conv->add_option("--input-format", conv.input.format)->capture_default_str();
  s_conv->add_option("--out", conv.out);
  s_conv->add_option("--format", conv.out_format, "Output format")->capture_default_str();

  EncodeOptions enc;
  auto* s_enc = app.add_subcommand("encode", "Fit the codec to a cube and write a .hinr stream");
  s_enc->add_option("--input", enc.input.path)->required();
  s_enc->add_option("--input-format", enc.input.format)->capture_default_str();
  add_model_options(s_enc, enc.model);
  s_enc->add_option("--ablation", enc.ablation)->capture_default_str();
  s_enc->add_option("--out", enc.out, "Output stream");
  s_enc->add_option("--report", enc.report, "JSON report path (stdout when empty)");
  s_enc->add_option("--log", enc.log, "Per-epoch CSV log (default <out>.train.csv)");
  s_enc->add_option("--checkpoint", enc.checkpoint, "Float checkpoint (default <out>.ckpt)");

  DecodeOptions dec;
  auto* s_dec = app.add_subcommand("decode", "Decode a .hinr stream to a portable cube");
  s_dec->add_option("--input", dec.stream)->required();
  s_dec->add_option("--out", dec.out, "Output cube stem");
  s_dec->add_option("--reference", dec.reference.path, "Reference cube for PSNR");
  s_dec->add_option("--reference-format", dec.reference.format)->capture_default_str();
  s_dec->add_option("--report", dec.report);

  EvalOptions ev;
  auto* s_eval = app.add_subcommand("eval", "PSNR of a cube or stream against a reference");
  s_eval->add_option("--input", ev.input.path);
  s_eval->add_option("--input-format", ev.input.format)->capture_default_str();
  s_eval->add_option("--stream", ev.stream);
  s_eval->add_option("--reference", ev.reference.path);
  s_eval->add_option("--reference-format", ev.reference.format)->capture_default_str();
  s_eval->add_option("--out", ev.report);

  AblateOptions abl;
  auto* s_abl = app.add_subcommand("ablate", "Run ablation variants and write a CSV");
  s_abl->add_option("--input", abl.input.path)->required();
  s_abl->add_option("--input-format", abl.input.format)->capture_default_str();
  add_model_options(s_abl, abl.model);
  s_abl->add_option("--variants", abl.variants)->delimiter(',')->capture_default_str();
  s_abl->add_option("--embed-sweep", abl.embed_sweep, "Embedding sizes HxWxC")->delimiter(',');
  s_abl->add_option("--out", abl.out, "CSV path (stdout when empty)");

  ClassifyOptions cls;
  auto* s_cls = app.add_subcommand("classify", "Train classifiers on a decoded stream");
  s_cls->add_option("--input", cls.stream, "Input .hinr stream")->required();
  s_cls->add_option("--labels", cls.labels);
  s_cls->add_option("--variants", cls.variants)->delimiter(',')->capture_default_str();
  s_cls->add_option("--beta", cls.beta)->capture_default_str();
  s_cls->add_option("--eta", cls.eta)->capture_default_str();
  s_cls->add_option("--isi-prob", cls.isi_prob)->capture_default_str();
  s_cls->add_option("--lr", cls.lr)->capture_default_str();
  s_cls->add_option("--weight-decay", cls.weight_decay)->capture_default_str();
  s_cls->add_option("--epochs", cls.epochs)->capture_default_str();
  s_cls->add_option("--patch", cls.patch)->capture_default_str();
  s_cls->add_option("--out", cls.out, "JSON report path (stdout when empty)");
  s_cls->add_option("--checkpoint", cls.checkpoint, "Checkpoint prefix; one file per variant");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    if (!rev.empty()) rev.pop_back();
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << json_error("usage", "config", e.what());
    return kExitConfig;
  }

  try {
    auto* sub = app.get_subcommands().front();
    auto config = resolved_config(sub);
    config["seed"] = seed;
    if (sub == s_synth) {
      cmd_synth(synth, out);
    } else if (sub == s_conv) {
      cmd_convert(conv, out);
    } else if (sub == s_enc) {
      cmd_encode(enc, seed, config, out);
    } else if (sub == s_dec) {
      cmd_decode(dec, config, out);
    } else if (sub == s_eval) {
      cmd_eval(ev, config, out);
    } else if (sub == s_abl) {
      return cmd_ablate(abl, seed, out, err);
    } else if (sub == s_cls) {
      cmd_classify(cls, seed, config, out);
    }
  } catch (const Error& e) {
    err << json_error(e.kind(), category_name(e.category()), e.what());
    return exit_code(e.category());
  } catch (const std::exception& e) {
    err << json_error("internal", "internal", e.what());
    return kExitInternal;
  }
  return kExitOk;
}

}  // namespace hiner

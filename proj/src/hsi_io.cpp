#include "hiner/hsi_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <numbers>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "hiner/error.hpp"
#include "hiner/rng.hpp"

namespace hiner {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "container formats are little-endian; add byte swapping for this host");

HsiCube::HsiCube(int bands_, int height_, int width_, int source_bitdepth_)
    : height(height_), width(width_), bands(bands_), source_bitdepth(source_bitdepth_) {
  if (bands_ < 1 || height_ < 1 || width_ < 1) {
    throw ConfigError("cube dimensions must be positive, got C=" + std::to_string(bands_) +
                      " H=" + std::to_string(height_) + " W=" + std::to_string(width_));
  }
  data.assign(size(), 0.0f);
  band_max.assign(bands_, 0.0f);
}

void HsiCube::recompute_band_max() {
  band_max.assign(bands, 0.0f);
  for (int b = 0; b < bands; ++b) {
    const auto v = band(b);
    band_max[b] = v.empty() ? 0.0f : *std::max_element(v.begin(), v.end());
  }
}

void LabelMap::validate() const {
  if (height < 1 || width < 1 || class_count < 1) throw ConfigError("label map has empty dimensions");
  if (labels.size() != pixels() || train_mask.size() != pixels() || test_mask.size() != pixels()) {
    throw ShapeMismatch("label map arrays do not match " + std::to_string(height) + "x" +
                        std::to_string(width));
  }
  for (std::size_t i = 0; i < pixels(); ++i) {
    if (labels[i] < 0 || labels[i] > class_count) {
      throw ConfigError("label " + std::to_string(labels[i]) + " outside [0, " +
                        std::to_string(class_count) + "]");
    }
    if (train_mask[i] && test_mask[i]) throw ConfigError("train and test masks overlap");
    if ((train_mask[i] || test_mask[i]) && labels[i] == 0) {
      throw ConfigError("unlabeled pixel selected by a mask");
    }
  }
}

namespace {

fs::path with_ext(const fs::path& path, const char* ext) {
  fs::path p = path;
  const auto e = p.extension().string();
  if (e == ".raw" || e == ".hdr" || e == ".hsrb" || e == ".json" || e == ".lab") p.replace_extension();
  p += ext;
  return p;
}

std::vector<char> read_all(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_all(const fs::path& path, const void* bytes, std::size_t n) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(static_cast<const char*>(bytes), static_cast<std::streamsize>(n));
  if (!out) throw IoError("short write to " + path.string());
}

std::string lower_trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::map<std::string, std::string> parse_envi_header(const fs::path& hdr) {
  std::ifstream in(hdr);
  if (!in) throw IoError("cannot open " + hdr.string());
  std::string line;
  if (!std::getline(in, line) || lower_trim(line) != "envi") {
    throw MalformedHeader(hdr.string() + ": missing ENVI signature line");
  }
  std::map<std::string, std::string> fields;
  while (std::getline(in, line)) {
    if (lower_trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw MalformedHeader(hdr.string() + ": bad line '" + line + "'");
    std::string key = lower_trim(line.substr(0, eq));
    std::string value = line.substr(eq + 1);
    if (value.find('{') != std::string::npos) {
      while (value.find('}') == std::string::npos) {
        std::string more;
        if (!std::getline(in, more)) throw MalformedHeader(hdr.string() + ": unterminated '{' in " + key);
        value += " " + more;
      }
    }
    fields[key] = lower_trim(value);
  }
  return fields;
}

long long header_int(const std::map<std::string, std::string>& fields, const std::string& key,
                     const fs::path& hdr, bool required = true, long long fallback = 0) {
  const auto it = fields.find(key);
  if (it == fields.end()) {
    if (required) throw MalformedHeader(hdr.string() + ": missing '" + key + "'");
    return fallback;
  }
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(it->second, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != it->second.size()) {
    throw MalformedHeader(hdr.string() + ": '" + key + "' is not an integer: " + it->second);
  }
  return v;
}

std::vector<double> parse_brace_list(const std::string& value) {
  std::string body = value;
  body.erase(std::remove(body.begin(), body.end(), '{'), body.end());
  body.erase(std::remove(body.begin(), body.end(), '}'), body.end());
  std::replace(body.begin(), body.end(), ',', ' ');
  std::istringstream ss(body);
  std::vector<double> out;
  double v;
  while (ss >> v) out.push_back(v);
  return out;
}

void check_dims(long long h, long long w, long long c, const std::string& where) {
  if (h < 1 || w < 1 || c < 1 || h > (1 << 20) || w > (1 << 20) || c > (1 << 16)) {
    throw MalformedHeader(where + ": invalid dimensions H=" + std::to_string(h) + " W=" +
                          std::to_string(w) + " C=" + std::to_string(c));
  }
}

void check_payload(std::size_t have, std::size_t want, const std::string& where) {
  if (have < want) {
    throw TruncatedPayload(where + ": payload holds " + std::to_string(have) + " bytes, expected " +
                           std::to_string(want));
  }
  if (have > want) {
    throw DimensionMismatch(where + ": payload holds " + std::to_string(have) +
                            " bytes, header dimensions imply " + std::to_string(want));
  }
}

HsiCube load_envi(const fs::path& stem) {
  const auto hdr = with_ext(stem, ".hdr");
  const auto fields = parse_envi_header(hdr);
  const auto w = header_int(fields, "samples", hdr);
  const auto h = header_int(fields, "lines", hdr);
  const auto c = header_int(fields, "bands", hdr);
  check_dims(h, w, c, hdr.string());
  const auto type = header_int(fields, "data type", hdr);
  if (type != 12) {
    throw MalformedHeader(hdr.string() + ": only data type 12 (uint16) is supported, got " +
                          std::to_string(type));
  }
  if (header_int(fields, "byte order", hdr, false, 0) != 0) {
    throw MalformedHeader(hdr.string() + ": only little-endian (byte order = 0) is supported");
  }
  const auto il = fields.find("interleave");
  if (il != fields.end() && il->second != "bsq") {
    throw MalformedHeader(hdr.string() + ": only bsq interleave is supported, got " + il->second);
  }
  const auto offset = header_int(fields, "header offset", hdr, false, 0);
  if (offset < 0) throw MalformedHeader(hdr.string() + ": negative header offset");

  HsiCube cube(static_cast<int>(c), static_cast<int>(h), static_cast<int>(w), 16);
  const auto raw = read_all(with_ext(stem, ".raw"));
  const std::size_t want = static_cast<std::size_t>(offset) + cube.size() * sizeof(std::uint16_t);
  check_payload(raw.size(), want, with_ext(stem, ".raw").string());
  for (std::size_t i = 0; i < cube.size(); ++i) {
    std::uint16_t v;
    std::memcpy(&v, raw.data() + offset + 2 * i, 2);
    cube.data[i] = static_cast<float>(v);
  }
  if (const auto wl = fields.find("wavelength"); wl != fields.end()) {
    cube.wavelengths_nm = parse_brace_list(wl->second);
    if (cube.wavelengths_nm.size() != static_cast<std::size_t>(c)) {
      throw MalformedHeader(hdr.string() + ": wavelength list length does not match bands");
    }
  }
  cube.recompute_band_max();
  return cube;
}

void save_envi(const HsiCube& cube, const fs::path& stem) {
  std::vector<std::uint16_t> raw(cube.size());
  for (std::size_t i = 0; i < cube.size(); ++i) {
    const float v = cube.data[i];
    if (!(v >= 0.0f && v <= 65535.0f) || std::nearbyint(v) != v) {
      throw IoError("ENVI uint16 output needs integral values in [0, 65535]; element " +
                    std::to_string(i) + " is " + std::to_string(v));
    }
    raw[i] = static_cast<std::uint16_t>(v);
  }
  std::ostringstream hdr;
  hdr << "ENVI\n"
      << "description = {hiner cube}\n"
      << "samples = " << cube.width << "\n"
      << "lines = " << cube.height << "\n"
      << "bands = " << cube.bands << "\n"
      << "header offset = 0\n"
      << "file type = ENVI Standard\n"
      << "data type = 12\n"
      << "interleave = bsq\n"
      << "byte order = 0\n";
  if (!cube.wavelengths_nm.empty()) {
    hdr.precision(17);
    hdr << "wavelength = {";
    for (std::size_t i = 0; i < cube.wavelengths_nm.size(); ++i) {
      hdr << (i ? ", " : "") << cube.wavelengths_nm[i];
    }
    hdr << "}\n";
  }
  const auto text = hdr.str();
  write_all(with_ext(stem, ".hdr"), text.data(), text.size());
  write_all(with_ext(stem, ".raw"), raw.data(), raw.size() * sizeof(std::uint16_t));
}

HsiCube load_container(const fs::path& stem) {
  const auto side = with_ext(stem, ".json");
  json meta;
  {
    std::ifstream in(side);
    if (!in) throw IoError("cannot open " + side.string());
    try {
      meta = json::parse(in);
    } catch (const json::exception& e) {
      throw MalformedHeader(side.string() + ": " + e.what());
    }
  }
  long long h = 0, w = 0, c = 0;
  int bitdepth = 16;
  try {
    h = meta.at("height").get<long long>();
    w = meta.at("width").get<long long>();
    c = meta.at("bands").get<long long>();
    bitdepth = meta.value("source_bitdepth", 16);
  } catch (const json::exception& e) {
    throw MalformedHeader(side.string() + ": " + e.what());
  }
  check_dims(h, w, c, side.string());
  HsiCube cube(static_cast<int>(c), static_cast<int>(h), static_cast<int>(w), bitdepth);
  const auto raw = read_all(with_ext(stem, ".hsrb"));
  check_payload(raw.size(), cube.size() * sizeof(float), with_ext(stem, ".hsrb").string());
  std::memcpy(cube.data.data(), raw.data(), raw.size());
  if (meta.contains("wavelengths_nm")) {
    cube.wavelengths_nm = meta["wavelengths_nm"].get<std::vector<double>>();
    if (cube.wavelengths_nm.size() != static_cast<std::size_t>(c)) {
      throw MalformedHeader(side.string() + ": wavelength list length does not match bands");
    }
  }
  cube.recompute_band_max();
  return cube;
}

void save_container(const HsiCube& cube, const fs::path& stem) {
  json meta = {{"format", "hsrb"},
               {"dtype", "float32"},
               {"byte_order", "little"},
               {"interleave", "bsq"},
               {"height", cube.height},
               {"width", cube.width},
               {"bands", cube.bands},
               {"source_bitdepth", cube.source_bitdepth}};
  if (!cube.wavelengths_nm.empty()) meta["wavelengths_nm"] = cube.wavelengths_nm;
  const auto text = meta.dump(2) + "\n";
  write_all(with_ext(stem, ".json"), text.data(), text.size());
  write_all(with_ext(stem, ".hsrb"), cube.data.data(), cube.data.size() * sizeof(float));
}

}  // namespace

HsiCube load_cube(const fs::path& path, CubeFormat format) {
  return format == CubeFormat::envi_raw ? load_envi(path) : load_container(path);
}

void save_cube(const HsiCube& cube, const fs::path& path, CubeFormat format) {
  if (cube.data.size() != cube.size()) throw ShapeMismatch("cube data length does not match dims");
  if (format == CubeFormat::envi_raw) {
    save_envi(cube, path);
  } else {
    save_container(cube, path);
  }
}

// Labels: `<stem>.lab` holds H*W little-endian int32 class ids, `<stem>.json`
// holds dims, class count and the training pixel indices. Test pixels are the
// remaining labeled pixels unless an explicit list is given.
LabelMap load_labels(const fs::path& path) {
  const auto side = with_ext(path, ".json");
  json meta;
  {
    std::ifstream in(side);
    if (!in) throw IoError("cannot open " + side.string());
    try {
      meta = json::parse(in);
    } catch (const json::exception& e) {
      throw MalformedHeader(side.string() + ": " + e.what());
    }
  }
  LabelMap lm;
  std::vector<std::size_t> train, test;
  try {
    lm.height = meta.at("height").get<int>();
    lm.width = meta.at("width").get<int>();
    lm.class_count = meta.at("class_count").get<int>();
    train = meta.at("train_indices").get<std::vector<std::size_t>>();
    if (meta.contains("test_indices")) test = meta["test_indices"].get<std::vector<std::size_t>>();
  } catch (const json::exception& e) {
    throw MalformedHeader(side.string() + ": " + e.what());
  }
  check_dims(lm.height, lm.width, 1, side.string());
  const auto raw = read_all(with_ext(path, ".lab"));
  check_payload(raw.size(), lm.pixels() * sizeof(std::int32_t), with_ext(path, ".lab").string());
  lm.labels.resize(lm.pixels());
  for (std::size_t i = 0; i < lm.pixels(); ++i) {
    std::int32_t v;
    std::memcpy(&v, raw.data() + 4 * i, 4);
    lm.labels[i] = v;
  }
  lm.train_mask.assign(lm.pixels(), 0);
  lm.test_mask.assign(lm.pixels(), 0);
  for (auto i : train) {
    if (i >= lm.pixels()) throw MalformedHeader(side.string() + ": train index out of range");
    lm.train_mask[i] = 1;
  }
  if (meta.contains("test_indices")) {
    for (auto i : test) {
      if (i >= lm.pixels()) throw MalformedHeader(side.string() + ": test index out of range");
      lm.test_mask[i] = 1;
    }
  } else {
    for (std::size_t i = 0; i < lm.pixels(); ++i) {
      lm.test_mask[i] = lm.labels[i] != 0 && !lm.train_mask[i];
    }
  }
  lm.validate();
  return lm;
}

void save_labels(const LabelMap& lm, const fs::path& path) {
  lm.validate();
  std::vector<std::int32_t> raw(lm.labels.begin(), lm.labels.end());
  std::vector<std::size_t> train, test;
  bool default_test = true;
  for (std::size_t i = 0; i < lm.pixels(); ++i) {
    if (lm.train_mask[i]) train.push_back(i);
    if (lm.test_mask[i]) test.push_back(i);
    const bool implied = lm.labels[i] != 0 && !lm.train_mask[i];
    if (implied != static_cast<bool>(lm.test_mask[i])) default_test = false;
  }
  json meta = {{"height", lm.height},
               {"width", lm.width},
               {"class_count", lm.class_count},
               {"train_indices", train}};
  if (!default_test) meta["test_indices"] = test;
  const auto text = meta.dump() + "\n";
  write_all(with_ext(path, ".json"), text.data(), text.size());
  write_all(with_ext(path, ".lab"), raw.data(), raw.size() * sizeof(std::int32_t));
}

HsiCube normalize(const HsiCube& cube) {
  if (cube.data.empty()) throw DegenerateInput("cannot normalize an empty cube");
  const float peak = *std::max_element(cube.data.begin(), cube.data.end());
  if (!(peak > 0.0f) || !std::isfinite(peak)) {
    throw DegenerateInput("cannot normalize: cube maximum is " + std::to_string(peak));
  }
  HsiCube out = cube;
  if (peak != 1.0f) {
    for (auto& v : out.data) v /= peak;
  }
  out.recompute_band_max();
  return out;
}

WavelengthGrid wavelength_grid(int bands) {
  if (bands < 1) throw ConfigError("wavelength grid needs at least one band, got " + std::to_string(bands));
  WavelengthGrid g;
  g.lambdas.resize(bands);
  for (int i = 0; i < bands; ++i) g.lambdas[i] = static_cast<double>(i + 1) / (bands + 1);
  return g;
}

ShuffledCube shuffle_bands(const HsiCube& cube, std::uint64_t seed) {
  Rng rng(seed);
  ShuffledCube out{cube, rng.permutation(static_cast<std::size_t>(cube.bands))};
  for (int b = 0; b < cube.bands; ++b) {
    const auto src = cube.band(static_cast<int>(out.permutation[b]));
    std::copy(src.begin(), src.end(), out.cube.band(b).begin());
  }
  out.cube.recompute_band_max();
  return out;
}

HsiCube unshuffle_bands(const HsiCube& cube, std::span<const std::size_t> permutation) {
  if (permutation.size() != static_cast<std::size_t>(cube.bands)) {
    throw ShapeMismatch("permutation length does not match band count");
  }
  HsiCube out = cube;
  for (int b = 0; b < cube.bands; ++b) {
    const auto src = cube.band(b);
    std::copy(src.begin(), src.end(), out.band(static_cast<int>(permutation[b])).begin());
  }
  out.recompute_band_max();
  return out;
}

std::pair<HsiCube, LabelMap> synth_cube(const SyntheticSpec& spec) {
  if (spec.class_count < 2) throw ConfigError("synthetic cube needs at least two classes");
  if (spec.noise_sigma < 0.0) throw ConfigError("noise_sigma must be nonnegative");
  if (!(spec.signature_smoothness > 0.0)) throw ConfigError("signature_smoothness must be positive");
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw ConfigError("train_fraction must lie in (0, 1)");
  }
  HsiCube cube(spec.bands, spec.height, spec.width, 16);
  const auto grid = wavelength_grid(spec.bands);
  Rng rng(spec.seed);

  // Per-class spectral signatures: an offset plus three low-frequency sinusoids.
  const int k = spec.class_count;
  std::vector<std::vector<double>> signature(k, std::vector<double>(spec.bands));
  for (int c = 0; c < k; ++c) {
    const double offset = rng.uniform(0.3, 0.7);
    double amp[3], freq[3], phase[3];
    for (int j = 0; j < 3; ++j) {
      amp[j] = rng.uniform(0.05, 0.18);
      freq[j] = rng.uniform(0.5, 2.0) / spec.signature_smoothness;
      phase[j] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }
    for (int b = 0; b < spec.bands; ++b) {
      double v = offset;
      for (int j = 0; j < 3; ++j) {
        v += amp[j] * std::sin(2.0 * std::numbers::pi * freq[j] * grid.lambdas[b] + phase[j]);
      }
      signature[c][b] = std::clamp(v, 0.02, 0.98);
    }
  }

  // Voronoi partition; site i belongs to class (i mod k) + 1.
  const int sites = 3 * k;
  std::vector<double> sy(sites), sx(sites);
  for (int i = 0; i < sites; ++i) {
    sy[i] = rng.uniform(0.0, spec.height);
    sx[i] = rng.uniform(0.0, spec.width);
  }
  LabelMap lm;
  lm.height = spec.height;
  lm.width = spec.width;
  lm.class_count = k;
  lm.labels.resize(lm.pixels());
  for (int r = 0; r < spec.height; ++r) {
    for (int c = 0; c < spec.width; ++c) {
      int best = 0;
      double best_d = INFINITY;
      for (int i = 0; i < sites; ++i) {
        const double dy = r + 0.5 - sy[i], dx = c + 0.5 - sx[i];
        const double d = dy * dy + dx * dx;
        if (d < best_d) {
          best_d = d;
          best = i;
        }
      }
      lm.labels[static_cast<std::size_t>(r) * spec.width + c] = best % k + 1;
    }
  }

  Rng noise = rng.fork(1);
  for (int b = 0; b < spec.bands; ++b) {
    auto band = cube.band(b);
    for (std::size_t p = 0; p < cube.pixels(); ++p) {
      double v = signature[lm.labels[p] - 1][b];
      if (spec.noise_sigma > 0.0) v += spec.noise_sigma * noise.normal();
      band[p] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  cube.recompute_band_max();

  // Stratified split.
  Rng split = rng.fork(2);
  lm.train_mask.assign(lm.pixels(), 0);
  lm.test_mask.assign(lm.pixels(), 0);
  for (int cls = 1; cls <= k; ++cls) {
    std::vector<std::size_t> members;
    for (std::size_t p = 0; p < lm.pixels(); ++p) {
      if (lm.labels[p] == cls) members.push_back(p);
    }
    if (members.empty()) continue;
    const auto order = split.permutation(members.size());
    std::size_t n_train = static_cast<std::size_t>(std::lround(spec.train_fraction * members.size()));
    n_train = std::clamp<std::size_t>(n_train, 1, members.size() > 1 ? members.size() - 1 : 1);
    for (std::size_t i = 0; i < members.size(); ++i) {
      (i < n_train ? lm.train_mask : lm.test_mask)[members[order[i]]] = 1;
    }
  }
  return {std::move(cube), std::move(lm)};
}

}  // namespace hiner

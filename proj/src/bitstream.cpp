#include "hiner/bitstream.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "hiner/error.hpp"

namespace hiner {

static_assert(std::endian::native == std::endian::little, "stream layout assumes a little-endian host");

namespace {

constexpr std::size_t kTableBytes = 256;

class ByteWriter {
 public:
  template <class T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_bytes(std::span<const std::uint8_t> b) { bytes_.insert(bytes_.end(), b.begin(), b.end()); }
  std::size_t size() const { return bytes_.size(); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::span<const std::uint8_t> get_bytes(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t position() const { return pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (n > bytes_.size() - pos_) {
      throw TruncatedStream("stream truncated at byte " + std::to_string(pos_) + " (needed " +
                            std::to_string(n) + " more, " + std::to_string(bytes_.size() - pos_) +
                            " available)");
    }
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

template <class T>
T narrow(long long v, const char* what) {
  if (v < 0 || v > static_cast<long long>(std::numeric_limits<T>::max())) {
    throw ConfigError(std::string(what) + " value " + std::to_string(v) + " does not fit the stream field");
  }
  return static_cast<T>(v);
}

std::vector<float> flatten(const nn::Matrix& m) {
  std::vector<float> out(static_cast<std::size_t>(m.size()));
  std::size_t i = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out[i++] = m(r, c);
  }
  return out;
}

void unflatten(std::span<const float> v, nn::Matrix& m) {
  std::size_t i = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = v[i++];
  }
}

struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> shape;
  std::vector<float> values;
  bool rate_counted = true;
};

std::string block_name(std::size_t k, const char* leaf) {
  return "decoder.block" + std::to_string(k) + "." + leaf;
}

std::vector<NamedTensor> model_tensors(const HinerModel& model, std::span<const SpectralEmbedding> embeddings,
                                       bool include_embeddings, bool include_encoder) {
  std::vector<NamedTensor> out;
  const auto& es = model.embed_shape();
  if (include_embeddings) {
    NamedTensor e{"embeddings",
                  {static_cast<std::uint32_t>(embeddings.size()), static_cast<std::uint32_t>(es.channels),
                   static_cast<std::uint32_t>(es.height), static_cast<std::uint32_t>(es.width)},
                  {},
                  true};
    for (const auto& emb : embeddings) {
      if (emb.size() != es.size()) throw ShapeMismatch("embedding size does not match the model");
      e.values.insert(e.values.end(), emb.begin(), emb.end());
    }
    out.push_back(std::move(e));
  }
  auto conv = [&](const nn::Conv2d& c, std::string wname, std::string bname) {
    out.push_back({std::move(wname),
                   {static_cast<std::uint32_t>(c.out_channels()), static_cast<std::uint32_t>(c.in_channels()),
                    static_cast<std::uint32_t>(c.kernel), static_cast<std::uint32_t>(c.kernel)},
                   flatten(c.weight),
                   true});
    out.push_back({std::move(bname),
                   {static_cast<std::uint32_t>(c.bias.size())},
                   {c.bias.data(), c.bias.data() + c.bias.size()},
                   true});
  };
  for (std::size_t k = 0; k < model.blocks.size(); ++k) {
    conv(model.blocks[k], block_name(k, "weight"), block_name(k, "bias"));
  }
  conv(model.head, "decoder.head.weight", "decoder.head.bias");
  if (include_encoder) {
    const auto& l = model.encoder.layer;
    out.push_back({"encoder.weight",
                   {static_cast<std::uint32_t>(l.weight.rows()), static_cast<std::uint32_t>(l.weight.cols())},
                   flatten(l.weight),
                   false});
    out.push_back({"encoder.bias",
                   {static_cast<std::uint32_t>(l.bias.size())},
                   {l.bias.data(), l.bias.data() + l.bias.size()},
                   false});
  }
  return out;
}

void write_header(ByteWriter& w, const char magic[4], const HinerModel& model, int bands, int bitwidth,
                  bool encoder_present, std::size_t tensor_count) {
  for (int i = 0; i < 4; ++i) w.put<char>(magic[i]);
  w.put<std::uint8_t>(kStreamVersion);
  std::uint8_t flags = encoder_present ? kFlagEncoderPresent : 0;
  flags |= static_cast<std::uint8_t>(static_cast<std::uint8_t>(model.encoder.mode) << 1);
  w.put<std::uint8_t>(flags);
  const auto& dc = model.decoder_config;
  w.put<std::uint32_t>(narrow<std::uint32_t>(dc.target_height, "height"));
  w.put<std::uint32_t>(narrow<std::uint32_t>(dc.target_width, "width"));
  w.put<std::uint32_t>(narrow<std::uint32_t>(bands, "bands"));
  w.put<float>(static_cast<float>(model.pe.base));
  w.put<std::uint16_t>(narrow<std::uint16_t>(model.pe.levels, "PE levels"));
  w.put<std::uint8_t>(narrow<std::uint8_t>(static_cast<long long>(dc.strides.size()), "stride count"));
  for (int s : dc.strides) w.put<std::uint8_t>(narrow<std::uint8_t>(s, "stride"));
  const auto& es = model.embed_shape();
  w.put<std::uint16_t>(narrow<std::uint16_t>(es.height, "embed height"));
  w.put<std::uint16_t>(narrow<std::uint16_t>(es.width, "embed width"));
  w.put<std::uint16_t>(narrow<std::uint16_t>(es.channels, "embed channels"));
  w.put<std::uint8_t>(narrow<std::uint8_t>(static_cast<long long>(dc.channel_widths.size()), "width count"));
  for (int c : dc.channel_widths) w.put<std::uint16_t>(narrow<std::uint16_t>(c, "channel width"));
  w.put<std::uint8_t>(narrow<std::uint8_t>(bitwidth, "bitwidth"));
  w.put<std::uint16_t>(narrow<std::uint16_t>(static_cast<long long>(tensor_count), "tensor count"));
}

void write_name_shape(ByteWriter& w, const std::string& name, const std::vector<std::uint32_t>& shape) {
  w.put<std::uint8_t>(narrow<std::uint8_t>(static_cast<long long>(name.size()), "name length"));
  w.put_bytes({reinterpret_cast<const std::uint8_t*>(name.data()), name.size()});
  w.put<std::uint8_t>(narrow<std::uint8_t>(static_cast<long long>(shape.size()), "rank"));
  for (auto d : shape) w.put<std::uint32_t>(d);
}

StreamHeader read_header(ByteReader& r, const char magic[4]) {
  char m[4];
  for (char& c : m) c = r.get<char>();
  if (std::memcmp(m, magic, 4) != 0) {
    throw BadMagic("bad magic '" + std::string(m, 4) + "', expected '" + std::string(magic, 4) + "'");
  }
  const auto version = r.get<std::uint8_t>();
  if (version != kStreamVersion) {
    throw VersionMismatch("stream version " + std::to_string(version) + ", this build reads version " +
                          std::to_string(kStreamVersion));
  }
  StreamHeader h;
  const auto flags = r.get<std::uint8_t>();
  h.encoder_present = flags & kFlagEncoderPresent;
  const int mode = (flags >> 1) & 0x3;
  if (mode > static_cast<int>(EncoderMode::raw_lambda)) throw CorruptStream("unknown encoder mode flag");
  h.encoder_mode = static_cast<EncoderMode>(mode);
  h.dims.height = static_cast<int>(r.get<std::uint32_t>());
  h.dims.width = static_cast<int>(r.get<std::uint32_t>());
  h.dims.bands = static_cast<int>(r.get<std::uint32_t>());
  h.pe.base = r.get<float>();
  h.pe.levels = r.get<std::uint16_t>();
  const auto ns = r.get<std::uint8_t>();
  for (int i = 0; i < ns; ++i) h.strides.push_back(r.get<std::uint8_t>());
  h.embed.height = r.get<std::uint16_t>();
  h.embed.width = r.get<std::uint16_t>();
  h.embed.channels = r.get<std::uint16_t>();
  const auto nw = r.get<std::uint8_t>();
  for (int i = 0; i < nw; ++i) h.channel_widths.push_back(r.get<std::uint16_t>());
  h.bitwidth = r.get<std::uint8_t>();
  h.tensor_count = r.get<std::uint16_t>();
  // Checkpoints carry no embeddings and record zero bands.
  const bool stream = std::memcmp(magic, kStreamMagic, 4) == 0;
  if (h.dims.height < 1 || h.dims.width < 1 || (stream && h.dims.bands < 1)) {
    throw CorruptStream("header dims are zero");
  }
  return h;
}

std::pair<std::string, std::vector<std::uint32_t>> read_name_shape(ByteReader& r) {
  const auto len = r.get<std::uint8_t>();
  const auto name_bytes = r.get_bytes(len);
  std::string name(name_bytes.begin(), name_bytes.end());
  const auto rank = r.get<std::uint8_t>();
  std::vector<std::uint32_t> shape(rank);
  for (auto& d : shape) d = r.get<std::uint32_t>();
  return {std::move(name), std::move(shape)};
}

std::size_t element_count(const std::vector<std::uint32_t>& shape) {
  std::size_t n = 1;
  for (auto d : shape) {
    if (d != 0 && n > (std::size_t{1} << 40) / d) throw CorruptStream("tensor shape is implausibly large");
    n *= d;
  }
  return n;
}

// Skeleton model from the header; weights are filled from the tensors.
HinerModel model_from_header(const StreamHeader& h, int kernel) {
  HinerModel m;
  m.pe = h.pe;
  m.encoder.mode = h.encoder_mode;
  m.encoder.shape = h.embed;
  m.decoder_config = {h.strides, h.channel_widths, kernel, h.dims.height, h.dims.width, 1};
  try {
    m.decoder_config.validate(h.embed);
  } catch (const ConfigError& e) {
    throw CorruptStream(std::string("inconsistent decoder header: ") + e.what());
  }
  const auto& w = h.channel_widths;
  for (std::size_t k = 0; k < h.strides.size(); ++k) {
    const int out = w[k + 1] * h.strides[k] * h.strides[k];
    m.blocks.push_back({nn::Matrix(out, w[k] * kernel * kernel), nn::Vector(out), kernel});
  }
  m.head = {nn::Matrix(1, w.back()), nn::Vector(1), 1};
  if (h.encoder_present) {
    const int in = h.encoder_mode == EncoderMode::raw_lambda ? 1 : h.pe.dimension();
    const auto e = static_cast<Eigen::Index>(h.embed.size());
    m.encoder.layer = {nn::Matrix(e, in), nn::Vector(e)};
  }
  return m;
}

// Assigns a named tensor into the model skeleton, checking its shape.
void assign_tensor(HinerModel& m, std::vector<SpectralEmbedding>& embeddings, const StreamHeader& h,
                   const std::string& name, const std::vector<std::uint32_t>& shape,
                   std::span<const float> values) {
  auto expect = [&](std::vector<std::uint32_t> want) {
    if (shape != want) throw CorruptStream("tensor '" + name + "' has an unexpected shape");
  };
  auto conv = [&](nn::Conv2d& c, bool weight) {
    if (weight) {
      expect({static_cast<std::uint32_t>(c.out_channels()), static_cast<std::uint32_t>(c.in_channels()),
              static_cast<std::uint32_t>(c.kernel), static_cast<std::uint32_t>(c.kernel)});
      unflatten(values, c.weight);
    } else {
      expect({static_cast<std::uint32_t>(c.bias.size())});
      std::copy(values.begin(), values.end(), c.bias.data());
    }
  };
  if (name == "embeddings") {
    const auto& es = h.embed;
    expect({static_cast<std::uint32_t>(h.dims.bands), static_cast<std::uint32_t>(es.channels),
            static_cast<std::uint32_t>(es.height), static_cast<std::uint32_t>(es.width)});
    embeddings.assign(h.dims.bands, SpectralEmbedding(es.size()));
    for (int b = 0; b < h.dims.bands; ++b) {
      std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(b * es.size()), es.size(), embeddings[b].begin());
    }
  } else if (name == "decoder.head.weight") {
    conv(m.head, true);
  } else if (name == "decoder.head.bias") {
    conv(m.head, false);
  } else if (name == "encoder.weight" && h.encoder_present) {
    expect({static_cast<std::uint32_t>(m.encoder.layer.weight.rows()),
            static_cast<std::uint32_t>(m.encoder.layer.weight.cols())});
    unflatten(values, m.encoder.layer.weight);
  } else if (name == "encoder.bias" && h.encoder_present) {
    expect({static_cast<std::uint32_t>(m.encoder.layer.bias.size())});
    std::copy(values.begin(), values.end(), m.encoder.layer.bias.data());
  } else {
    for (std::size_t k = 0; k < m.blocks.size(); ++k) {
      if (name == block_name(k, "weight")) return conv(m.blocks[k], true);
      if (name == block_name(k, "bias")) return conv(m.blocks[k], false);
    }
    throw CorruptStream("unexpected tensor '" + name + "'");
  }
}

std::vector<std::string> expected_names(const StreamHeader& h, bool with_embeddings) {
  std::vector<std::string> names;
  if (with_embeddings) names.push_back("embeddings");
  for (std::size_t k = 0; k < h.strides.size(); ++k) {
    names.push_back(block_name(k, "weight"));
    names.push_back(block_name(k, "bias"));
  }
  names.push_back("decoder.head.weight");
  names.push_back("decoder.head.bias");
  if (h.encoder_present) {
    names.push_back("encoder.weight");
    names.push_back("encoder.bias");
  }
  return names;
}

int kernel_from_first_block(const std::vector<std::uint32_t>& shape) {
  if (shape.size() != 4 || shape[2] != shape[3] || shape[2] == 0 || shape[2] % 2 == 0) {
    throw CorruptStream("first decoder block has an invalid kernel shape");
  }
  return static_cast<int>(shape[2]);
}

// Parses a stream. With decode == false only the rate accounting is filled.
DecodedStream parse_stream(std::span<const std::uint8_t> bytes, bool decode) {
  ByteReader r(bytes);
  DecodedStream out;
  out.header = read_header(r, kStreamMagic);
  const auto& h = out.header;
  if (h.bitwidth < 2 || h.bitwidth > 8) throw CorruptStream("unsupported bit-width " + std::to_string(h.bitwidth));
  const auto names = expected_names(h, true);
  if (h.tensor_count != names.size()) {
    throw CorruptStream("stream lists " + std::to_string(h.tensor_count) + " tensors, header implies " +
                        std::to_string(names.size()));
  }
  std::size_t payload_total = 0, side_total = 0;
  for (std::size_t t = 0; t < h.tensor_count; ++t) {
    auto [name, shape] = read_name_shape(r);
    if (name != names[t]) throw CorruptStream("expected tensor '" + names[t] + "', found '" + name + "'");
    TensorRecord rec;
    rec.tensor.name = name;
    rec.tensor.shape = shape;
    rec.tensor.spec.bitwidth = h.bitwidth;
    rec.tensor.spec.min = r.get<float>();
    rec.tensor.spec.scale = r.get<float>();
    const auto table = r.get_bytes(kTableBytes);
    rec.table.lengths.assign(table.begin(), table.begin() + (std::size_t{1} << h.bitwidth));
    if (std::any_of(table.begin() + (std::size_t{1} << h.bitwidth), table.end(), [](auto v) { return v != 0; })) {
      throw CorruptStream("tensor '" + name + "' codes symbols beyond its bit-width");
    }
    rec.payload.bit_length = r.get<std::uint64_t>();
    if (rec.payload.bit_length > std::uint64_t{1} << 50) throw CorruptStream("implausible payload length");
    const auto payload = r.get_bytes(static_cast<std::size_t>((rec.payload.bit_length + 7) / 8));
    rec.payload.bytes.assign(payload.begin(), payload.end());
    rec.rate_counted = name.rfind("encoder.", 0) != 0;
    (rec.rate_counted ? payload_total : side_total) += payload.size();
    if (decode) rec.tensor.codes = huffman_decode(rec.table, rec.payload, element_count(shape));
    out.records.push_back(std::move(rec));
  }
  if (!r.done()) throw CorruptStream("trailing bytes after the last tensor");
  out.rate.rate_payload_bytes = payload_total;
  out.rate.side_payload_bytes = side_total;
  out.rate.file_bytes = bytes.size();
  out.rate.overhead_bytes = bytes.size() - payload_total - side_total;
  if (!decode) return out;

  out.model = model_from_header(h, kernel_from_first_block(out.records[1].tensor.shape));
  for (const auto& rec : out.records) {
    const auto values = dequantize_to_float(rec.tensor);
    assign_tensor(out.model, out.embeddings, h, rec.tensor.name, rec.tensor.shape, values);
  }
  return out;
}

}  // namespace

std::vector<TensorRecord> build_records(const HinerModel& model, std::span<const SpectralEmbedding> embeddings,
                                        int bitwidth, bool include_encoder) {
  if (bitwidth < 2 || bitwidth > 8) {
    throw ConfigError("the stream's 256-entry code tables support bit-widths 2..8, got " +
                      std::to_string(bitwidth));
  }
  if (include_encoder && model.encoder.layer.weight.size() == 0) {
    throw ConfigError("model has no encoder to include");
  }
  std::vector<TensorRecord> records;
  for (auto& t : model_tensors(model, embeddings, true, include_encoder)) {
    TensorRecord rec;
    rec.tensor = quantize_tensor(std::span<const float>(t.values), bitwidth, t.name, t.shape);
    rec.tensor.spec = storage_precision(rec.tensor.spec);
    auto enc = huffman_encode(rec.tensor.codes, std::size_t{1} << bitwidth);
    rec.table = std::move(enc.table);
    rec.payload = std::move(enc.payload);
    rec.rate_counted = t.rate_counted;
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<std::uint8_t> serialize(const HinerModel& model, std::span<const SpectralEmbedding> embeddings,
                                    int bitwidth, bool include_encoder) {
  const auto records = build_records(model, embeddings, bitwidth, include_encoder);
  ByteWriter w;
  write_header(w, kStreamMagic, model, static_cast<int>(embeddings.size()), bitwidth, include_encoder,
               records.size());
  for (const auto& rec : records) {
    write_name_shape(w, rec.tensor.name, rec.tensor.shape);
    w.put<float>(static_cast<float>(rec.tensor.spec.min));
    w.put<float>(static_cast<float>(rec.tensor.spec.scale));
    std::uint8_t table[kTableBytes] = {};
    std::copy(rec.table.lengths.begin(), rec.table.lengths.end(), table);
    w.put_bytes(table);
    w.put<std::uint64_t>(rec.payload.bit_length);
    w.put_bytes(rec.payload.bytes);
  }
  return w.take();
}

DecodedStream deserialize(std::span<const std::uint8_t> bytes) { return parse_stream(bytes, true); }

RateBreakdown rate_breakdown(std::span<const std::uint8_t> bytes) { return parse_stream(bytes, false).rate; }

QuantizedModel quantize_model(const HinerModel& model, std::span<const SpectralEmbedding> embeddings,
                              int bitwidth, bool include_encoder) {
  const auto records = build_records(model, embeddings, bitwidth, include_encoder);
  StreamHeader h;
  h.dims = {model.decoder_config.target_height, model.decoder_config.target_width,
            static_cast<int>(embeddings.size())};
  h.pe = model.pe;
  h.strides = model.decoder_config.strides;
  h.embed = model.embed_shape();
  h.channel_widths = model.decoder_config.channel_widths;
  h.bitwidth = bitwidth;
  h.encoder_present = include_encoder;
  h.encoder_mode = model.encoder.mode;
  QuantizedModel out{model_from_header(h, model.decoder_config.kernel_size), {}};
  out.model.pe.base = static_cast<float>(model.pe.base);
  for (const auto& rec : records) {
    assign_tensor(out.model, out.embeddings, h, rec.tensor.name, rec.tensor.shape,
                  dequantize_to_float(rec.tensor));
  }
  return out;
}

HsiCube reconstruct_from_bitstream(std::span<const std::uint8_t> bytes, const CubeDims& expected,
                                   int source_bitdepth) {
  const auto stream = deserialize(bytes);
  const auto& d = stream.header.dims;
  if (d.height != expected.height || d.width != expected.width || d.bands != expected.bands) {
    throw DimensionMismatch("stream holds a " + std::to_string(d.height) + "x" + std::to_string(d.width) + "x" +
                            std::to_string(d.bands) + " cube, expected " + std::to_string(expected.height) +
                            "x" + std::to_string(expected.width) + "x" + std::to_string(expected.bands));
  }
  return reconstruct_cube(stream.model, stream.embeddings, source_bitdepth);
}

double bpppb(std::size_t rate_bytes, const CubeDims& dims) {
  if (dims.height < 1 || dims.width < 1 || dims.bands < 1) throw ConfigError("bpppb needs positive dims");
  const double samples = static_cast<double>(static_cast<std::size_t>(dims.height) * dims.width * dims.bands);
  return 8.0 * static_cast<double>(rate_bytes) / samples;
}

double compression_ratio(int source_bitdepth, double rate_bpppb) {
  if (rate_bpppb <= 0.0) return std::numeric_limits<double>::infinity();
  return static_cast<double>(source_bitdepth) / rate_bpppb;
}

std::vector<std::uint8_t> serialize_checkpoint(const HinerModel& model) {
  const auto tensors = model_tensors(model, {}, false, true);
  ByteWriter w;
  write_header(w, kCheckpointMagic, model, 0, 32, true, tensors.size());
  for (const auto& t : tensors) {
    write_name_shape(w, t.name, t.shape);
    w.put_bytes({reinterpret_cast<const std::uint8_t*>(t.values.data()), t.values.size() * sizeof(float)});
  }
  return w.take();
}

HinerModel deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  auto h = read_header(r, kCheckpointMagic);
  h.dims.bands = 1;  // not recorded in checkpoints
  if (!h.encoder_present) throw CorruptStream("checkpoint lacks an encoder");
  const auto names = expected_names(h, false);
  if (h.tensor_count != names.size()) throw CorruptStream("checkpoint tensor count mismatch");
  HinerModel m;
  std::vector<SpectralEmbedding> unused;
  for (std::size_t t = 0; t < names.size(); ++t) {
    auto [name, shape] = read_name_shape(r);
    if (name != names[t]) throw CorruptStream("expected tensor '" + names[t] + "', found '" + name + "'");
    if (t == 0) m = model_from_header(h, kernel_from_first_block(shape));
    const auto n = element_count(shape);
    const auto raw = r.get_bytes(n * sizeof(float));
    std::vector<float> values(n);
    std::memcpy(values.data(), raw.data(), raw.size());
    assign_tensor(m, unused, h, name, shape, values);
  }
  if (!r.done()) throw CorruptStream("trailing bytes after the last tensor");
  return m;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

}  // namespace hiner

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hiner/codec.hpp"
#include "hiner/huffman.hpp"
#include "hiner/quantize.hpp"

namespace hiner {

inline constexpr char kStreamMagic[4] = {'H', 'I', 'N', 'R'};
inline constexpr char kCheckpointMagic[4] = {'H', 'I', 'N', 'F'};
inline constexpr std::uint8_t kStreamVersion = 1;

// Bit 0 of the header flags; bits 1-2 carry the EncoderMode.
inline constexpr std::uint8_t kFlagEncoderPresent = 0x01;

struct StreamHeader {
  CubeDims dims;
  PosEncodingConfig pe;
  std::vector<int> strides;
  EmbedShape embed;
  std::vector<int> channel_widths;
  int bitwidth = 8;
  bool encoder_present = false;
  EncoderMode encoder_mode = EncoderMode::learned;
  std::size_t tensor_count = 0;
};

struct TensorRecord {
  QuantizedTensor tensor;
  HuffmanTable table;
  BitPayload payload;
  // Embeddings and decoder tensors count toward the rate; the encoder
  // side-channel does not.
  bool rate_counted = true;
};

struct RateBreakdown {
  std::size_t rate_payload_bytes = 0;  // sum of ceil(bits / 8) over rate-counted records
  std::size_t side_payload_bytes = 0;  // encoder side-channel payloads
  std::size_t overhead_bytes = 0;      // header, names, dims, spec, tables, bit lengths
  std::size_t file_bytes = 0;
};

struct DecodedStream {
  StreamHeader header;
  HinerModel model;  // dequantized; encoder populated only when present in the stream
  std::vector<SpectralEmbedding> embeddings;
  std::vector<TensorRecord> records;
  RateBreakdown rate;
};

// Quantized records in stream order: embeddings, decoder blocks, head, then
// the encoder when requested.
std::vector<TensorRecord> build_records(const HinerModel& model,
                                        std::span<const SpectralEmbedding> embeddings, int bitwidth,
                                        bool include_encoder);

std::vector<std::uint8_t> serialize(const HinerModel& model, std::span<const SpectralEmbedding> embeddings,
                                    int bitwidth, bool include_encoder);
DecodedStream deserialize(std::span<const std::uint8_t> bytes);

// The model and embeddings a decoder would see, without going through bytes.
struct QuantizedModel {
  HinerModel model;
  std::vector<SpectralEmbedding> embeddings;
};
QuantizedModel quantize_model(const HinerModel& model, std::span<const SpectralEmbedding> embeddings,
                              int bitwidth, bool include_encoder);

// Decodes every stored band and clamps to [0, 1]. Throws DimensionMismatch
// when the header dims differ from `expected`.
HsiCube reconstruct_from_bitstream(std::span<const std::uint8_t> bytes, const CubeDims& expected,
                                   int source_bitdepth = 16);

RateBreakdown rate_breakdown(std::span<const std::uint8_t> bytes);

double bpppb(std::size_t rate_bytes, const CubeDims& dims);
double compression_ratio(int source_bitdepth, double bpppb);

struct RdPoint {
  double bpppb = 0.0;
  double file_bpppb = 0.0;
  double mean_psnr = 0.0;
  double compression_ratio = 0.0;
  std::string label;
};

// Unquantized model snapshot: same header as the stream, raw f32 tensors.
std::vector<std::uint8_t> serialize_checkpoint(const HinerModel& model);
HinerModel deserialize_checkpoint(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace hiner

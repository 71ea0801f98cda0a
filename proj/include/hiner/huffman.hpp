#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace hiner {

// Canonical Huffman code described only by per-symbol code lengths.
// Length 0 marks an absent symbol.
struct HuffmanTable {
  std::vector<std::uint8_t> lengths;

  std::size_t alphabet_size() const { return lengths.size(); }
  bool empty() const;
  // Sum of 2^-len over present symbols.
  double kraft_sum() const;
  // Canonical codewords (MSB-first, right-aligned), 0 for absent symbols.
  std::vector<std::uint64_t> codewords() const;
};

struct BitPayload {
  std::vector<std::uint8_t> bytes;  // MSB-first, zero padded to a byte boundary
  std::uint64_t bit_length = 0;
};

// Optimal code lengths for a histogram. A lone present symbol gets length 1.
HuffmanTable build_huffman_table(std::span<const std::uint64_t> histogram);

struct HuffmanEncoded {
  HuffmanTable table;
  BitPayload payload;
};

HuffmanEncoded huffman_encode(std::span<const std::uint16_t> symbols, std::size_t alphabet_size);

// Throws CorruptStream when the payload does not decode to exactly `count`
// symbols using all `bit_length` bits.
std::vector<std::uint16_t> huffman_decode(const HuffmanTable& table, const BitPayload& payload,
                                          std::size_t count);

}  // namespace hiner

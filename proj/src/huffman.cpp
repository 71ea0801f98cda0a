#include "hiner/huffman.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <string>

#include "hiner/error.hpp"

namespace hiner {

namespace {

constexpr int kMaxCodeLength = 64;

struct CanonicalOrder {
  std::vector<std::uint16_t> symbols;  // sorted by (length, symbol)
  std::vector<std::uint64_t> count;    // per length
  std::vector<std::uint64_t> first;    // first codeword per length
  std::vector<std::uint64_t> offset;   // index into symbols per length
  int max_length = 0;
};

CanonicalOrder canonical(const HuffmanTable& table) {
  CanonicalOrder c;
  for (std::size_t s = 0; s < table.lengths.size(); ++s) {
    if (table.lengths[s] == 0) continue;
    if (table.lengths[s] > kMaxCodeLength) {
      throw CorruptStream("Huffman code length " + std::to_string(table.lengths[s]) + " exceeds " +
                          std::to_string(kMaxCodeLength));
    }
    c.symbols.push_back(static_cast<std::uint16_t>(s));
    c.max_length = std::max<int>(c.max_length, table.lengths[s]);
  }
  std::stable_sort(c.symbols.begin(), c.symbols.end(), [&](std::uint16_t a, std::uint16_t b) {
    return table.lengths[a] < table.lengths[b];
  });
  c.count.assign(c.max_length + 1, 0);
  for (auto s : c.symbols) ++c.count[table.lengths[s]];
  c.first.assign(c.max_length + 1, 0);
  c.offset.assign(c.max_length + 1, 0);
  std::uint64_t code = 0, index = 0;
  for (int len = 1; len <= c.max_length; ++len) {
    c.first[len] = code;
    c.offset[len] = index;
    code = (code + c.count[len]) << 1;
    index += c.count[len];
  }
  return c;
}

}  // namespace

bool HuffmanTable::empty() const {
  return std::all_of(lengths.begin(), lengths.end(), [](std::uint8_t l) { return l == 0; });
}

double HuffmanTable::kraft_sum() const {
  double sum = 0.0;
  for (auto l : lengths) {
    if (l) sum += std::ldexp(1.0, -static_cast<int>(l));
  }
  return sum;
}

std::vector<std::uint64_t> HuffmanTable::codewords() const {
  const auto c = canonical(*this);
  std::vector<std::uint64_t> out(lengths.size(), 0);
  for (int len = 1; len <= c.max_length; ++len) {
    for (std::uint64_t i = 0; i < c.count[len]; ++i) out[c.symbols[c.offset[len] + i]] = c.first[len] + i;
  }
  return out;
}

HuffmanTable build_huffman_table(std::span<const std::uint64_t> histogram) {
  HuffmanTable table{std::vector<std::uint8_t>(histogram.size(), 0)};
  struct Node {
    std::uint64_t weight;
    std::size_t id;
  };
  auto heavier = [](const Node& a, const Node& b) {
    return a.weight != b.weight ? a.weight > b.weight : a.id > b.id;
  };
  std::priority_queue<Node, std::vector<Node>, decltype(heavier)> heap(heavier);
  for (std::size_t s = 0; s < histogram.size(); ++s) {
    if (histogram[s]) heap.push({histogram[s], s});
  }
  if (heap.empty()) return table;
  if (heap.size() == 1) {
    table.lengths[heap.top().id] = 1;
    return table;
  }
  // parent[id] for leaves (id < n) and internal nodes (id >= n).
  const std::size_t n = histogram.size();
  std::vector<std::size_t> parent(n, SIZE_MAX);
  std::size_t next_id = n;
  while (heap.size() > 1) {
    const Node a = heap.top();
    heap.pop();
    const Node b = heap.top();
    heap.pop();
    parent.push_back(SIZE_MAX);
    parent[a.id] = next_id;
    parent[b.id] = next_id;
    heap.push({a.weight + b.weight, next_id++});
  }
  // Internal nodes are created after their children, so depths resolve top-down.
  std::vector<int> depth(parent.size(), 0);
  for (std::size_t id = parent.size(); id-- > 0;) {
    if (parent[id] != SIZE_MAX) depth[id] = depth[parent[id]] + 1;
  }
  for (std::size_t s = 0; s < n; ++s) {
    if (!histogram[s]) continue;
    if (depth[s] > kMaxCodeLength) throw Error(ErrorCategory::data, "Huffman code exceeds 64 bits");
    table.lengths[s] = static_cast<std::uint8_t>(depth[s]);
  }
  return table;
}

HuffmanEncoded huffman_encode(std::span<const std::uint16_t> symbols, std::size_t alphabet_size) {
  std::vector<std::uint64_t> histogram(alphabet_size, 0);
  for (auto s : symbols) {
    if (s >= alphabet_size) {
      throw ConfigError("symbol " + std::to_string(s) + " outside alphabet of " + std::to_string(alphabet_size));
    }
    ++histogram[s];
  }
  HuffmanEncoded out{build_huffman_table(histogram), {}};
  const auto words = out.table.codewords();
  std::uint64_t bits = 0;
  for (auto s : symbols) bits += out.table.lengths[s];
  out.payload.bit_length = bits;
  out.payload.bytes.assign((bits + 7) / 8, 0);
  std::uint64_t pos = 0;
  for (auto s : symbols) {
    const int len = out.table.lengths[s];
    const std::uint64_t w = words[s];
    for (int k = len - 1; k >= 0; --k, ++pos) {
      if ((w >> k) & 1U) out.payload.bytes[pos >> 3] |= static_cast<std::uint8_t>(0x80U >> (pos & 7));
    }
  }
  return out;
}

std::vector<std::uint16_t> huffman_decode(const HuffmanTable& table, const BitPayload& payload,
                                          std::size_t count) {
  if (payload.bytes.size() != (payload.bit_length + 7) / 8) {
    throw CorruptStream("Huffman payload is " + std::to_string(payload.bytes.size()) + " bytes for " +
                        std::to_string(payload.bit_length) + " bits");
  }
  std::vector<std::uint16_t> out;
  if (count == 0) {
    if (payload.bit_length != 0) throw CorruptStream("Huffman payload has bits but no symbols");
    return out;
  }
  const auto c = canonical(table);
  if (c.symbols.empty()) throw CorruptStream("Huffman table is empty but symbols were expected");
  unsigned __int128 kraft = 0;
  for (auto s : c.symbols) kraft += static_cast<unsigned __int128>(1) << (kMaxCodeLength - table.lengths[s]);
  if (kraft > (static_cast<unsigned __int128>(1) << kMaxCodeLength)) {
    throw CorruptStream("Huffman code lengths violate the Kraft inequality");
  }
  out.reserve(count);
  std::uint64_t pos = 0;
  while (out.size() < count) {
    std::uint64_t code = 0;
    int len = 0;
    for (;;) {
      if (pos >= payload.bit_length) {
        throw CorruptStream("Huffman payload underrun after " + std::to_string(out.size()) + " of " +
                            std::to_string(count) + " symbols");
      }
      const unsigned bit = (payload.bytes[pos >> 3] >> (7 - (pos & 7))) & 1U;
      ++pos;
      code = (code << 1) | bit;
      if (++len > c.max_length) throw CorruptStream("invalid Huffman codeword");
      const std::uint64_t rel = code - c.first[len];
      if (c.count[len] && code >= c.first[len] && rel < c.count[len]) {
        out.push_back(c.symbols[c.offset[len] + rel]);
        break;
      }
    }
  }
  if (pos != payload.bit_length) {
    throw CorruptStream("Huffman payload overrun: " + std::to_string(payload.bit_length - pos) +
                        " trailing bits");
  }
  return out;
}

}  // namespace hiner

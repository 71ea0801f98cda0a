#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "hiner/error.hpp"
#include "hiner/huffman.hpp"
#include "hiner/rng.hpp"

using namespace hiner;

namespace {

// Minimum total bits over every prefix-free length assignment (Kraft <= 1).
std::uint64_t brute_optimal_bits(const std::vector<std::uint64_t>& freq) {
  const std::size_t n = freq.size();
  const int max_len = static_cast<int>(n);
  std::vector<int> len(n, 1);
  std::uint64_t best = std::numeric_limits<std::uint64_t>::max();
  while (true) {
    double kraft = 0;
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < n; ++i) {
      kraft += std::ldexp(1.0, -len[i]);
      bits += freq[i] * len[i];
    }
    if (kraft <= 1.0) best = std::min(best, bits);
    std::size_t k = 0;
    while (k < n && len[k] == max_len) len[k++] = 1;
    if (k == n) break;
    ++len[k];
  }
  return best;
}

std::vector<std::uint16_t> symbols_from(const std::vector<std::uint64_t>& hist) {
  std::vector<std::uint16_t> out;
  for (std::size_t s = 0; s < hist.size(); ++s) out.insert(out.end(), hist[s], static_cast<std::uint16_t>(s));
  return out;
}

}  // namespace

TEST_CASE("single symbol gets one bit") {
  const std::vector<std::uint16_t> sym{5, 5, 5, 5};
  const auto enc = huffman_encode(sym, 256);
  CHECK(enc.table.lengths[5] == 1);
  CHECK(enc.payload.bit_length == 4);
  CHECK(huffman_decode(enc.table, enc.payload, 4) == sym);
}

TEST_CASE("three symbols match the brute-force optimum") {
  const std::vector<std::uint64_t> hist{2, 1, 1};
  const auto table = build_huffman_table(hist);
  CHECK(table.lengths == std::vector<std::uint8_t>{1, 2, 2});
  const auto sym = symbols_from(hist);
  const auto enc = huffman_encode(sym, 3);
  CHECK(enc.payload.bit_length == 6);
  CHECK(brute_optimal_bits(hist) == 6);
  CHECK(huffman_decode(enc.table, enc.payload, sym.size()) == sym);
}

TEST_CASE("uniform histogram is balanced") {
  std::vector<std::uint16_t> sym;
  for (int r = 0; r < 3; ++r) {
    for (int s = 0; s < 256; ++s) sym.push_back(static_cast<std::uint16_t>(s));
  }
  const auto enc = huffman_encode(sym, 256);
  CHECK(std::all_of(enc.table.lengths.begin(), enc.table.lengths.end(), [](auto l) { return l == 8; }));
  CHECK(enc.payload.bit_length == 8 * sym.size());
  CHECK(huffman_decode(enc.table, enc.payload, sym.size()) == sym);
}

TEST_CASE("empty input") {
  const auto enc = huffman_encode({}, 256);
  CHECK(enc.payload.bit_length == 0);
  CHECK(enc.payload.bytes.empty());
  CHECK(enc.table.empty());
  CHECK(huffman_decode(enc.table, enc.payload, 0).empty());
}

TEST_CASE("random small histograms are optimal and canonical") {
  Rng rng(17);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 2 + rng.below(4);
    std::vector<std::uint64_t> hist(n);
    for (auto& h : hist) h = 1 + rng.below(20);
    const auto table = build_huffman_table(hist);
    std::uint64_t bits = 0;
    for (std::size_t s = 0; s < n; ++s) bits += hist[s] * table.lengths[s];
    CHECK(bits == brute_optimal_bits(hist));
    CHECK(table.kraft_sum() <= 1.0);

    // Canonical: no codeword is a prefix of another.
    const auto cw = table.codewords();
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) {
        if (a == b || table.lengths[a] > table.lengths[b]) continue;
        CHECK((cw[b] >> (table.lengths[b] - table.lengths[a])) != cw[a]);
      }
    }
  }
}

TEST_CASE("corrupt payloads are rejected") {
  const std::vector<std::uint64_t> hist{2, 1, 1};
  const auto sym = symbols_from(hist);
  const auto enc = huffman_encode(sym, 3);

  auto shorter = enc.payload;
  shorter.bit_length -= 1;
  CHECK_THROWS_AS(huffman_decode(enc.table, shorter, sym.size()), CorruptStream);

  auto longer = enc.payload;
  longer.bit_length += 2;
  CHECK_THROWS_AS(huffman_decode(enc.table, longer, sym.size()), CorruptStream);

  CHECK_THROWS_AS(huffman_decode(enc.table, enc.payload, sym.size() + 1), CorruptStream);
  CHECK_THROWS_AS(huffman_decode(enc.table, enc.payload, sym.size() - 1), CorruptStream);

  auto oversubscribed = enc.table;
  oversubscribed.lengths = {1, 1, 1};
  CHECK_THROWS_AS(huffman_decode(oversubscribed, enc.payload, sym.size()), CorruptStream);
}

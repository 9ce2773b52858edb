// Copyright 2026 The ocec-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ocec/error.hpp"

namespace ocec {

using Bytes = std::vector<std::uint8_t>;

template <std::size_t N>
using Block = std::array<std::uint8_t, N>;

using Block16 = Block<16>;
using Block32 = Block<32>;

inline std::string to_hex(std::span<const std::uint8_t> data) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (std::uint8_t b : data) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0x0f]);
  }
  return out;
}

inline Bytes from_hex(std::string_view hex) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  if (hex.size() % 2 != 0) throw Error(Errc::structural, "odd-length hex string");
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    int hi = nibble(hex[2 * i]);
    int lo = nibble(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw Error(Errc::structural, "non-hex character");
    out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return out;
}

template <std::size_t N>
Block<N> block_from(std::span<const std::uint8_t> data) {
  if (data.size() != N) {
    throw Error(Errc::structural,
                "expected " + std::to_string(N) + " bytes, got " + std::to_string(data.size()));
  }
  Block<N> out{};
  std::copy(data.begin(), data.end(), out.begin());
  return out;
}

template <std::size_t N>
Block<N> block_from_hex(std::string_view hex) {
  return block_from<N>(from_hex(hex));
}

template <std::size_t N>
Block<N> operator^(const Block<N>& a, const Block<N>& b) {
  Block<N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = a[i] ^ b[i];
  return out;
}

template <std::size_t N>
Block<2 * N> concat(const Block<N>& left, const Block<N>& right) {
  Block<2 * N> out{};
  std::copy(left.begin(), left.end(), out.begin());
  std::copy(right.begin(), right.end(), out.begin() + N);
  return out;
}

template <std::size_t N>
Block<N / 2> left_half(const Block<N>& b) {
  static_assert(N % 2 == 0);
  Block<N / 2> out{};
  std::copy(b.begin(), b.begin() + N / 2, out.begin());
  return out;
}

template <std::size_t N>
Block<N / 2> right_half(const Block<N>& b) {
  static_assert(N % 2 == 0);
  Block<N / 2> out{};
  std::copy(b.begin() + N / 2, b.end(), out.begin());
  return out;
}

// Overwrites a buffer in a way the optimizer may not elide.
inline void secure_wipe(std::span<std::uint8_t> data) {
  volatile std::uint8_t* p = data.data();
  for (std::size_t i = 0; i < data.size(); ++i) p[i] = 0;
}

// True iff `needle` occurs as a contiguous run inside `haystack`.
inline bool contains_bytes(std::span<const std::uint8_t> haystack,
                           std::span<const std::uint8_t> needle) {
  if (needle.empty()) return true;
  return std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end()) !=
         haystack.end();
}

}  // namespace ocec

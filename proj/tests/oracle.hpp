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

// Reference models used only by the tests. They share no code with the
// library beyond the byte types: delays are propagated as two explicit
// signals, sub-challenges come from OpenSSL's one-shot SHA256(), and the
// OCEC response is read off an exhaustive table.

#include <openssl/sha.h>

#include <cstdint>
#include <optional>
#include <vector>

#include "ocec/bytes.hpp"

namespace oracle {

/// Two edges race through the MUX chain. A straight stage delays the upper
/// edge by w/2 more than the lower one; a crossed stage swaps the edges
/// first and then delays the (new) lower edge by w/2 more. The final weight
/// is the arbiter's own skew.
inline double race_delta(const std::vector<double>& w, const std::vector<std::uint8_t>& c) {
  double upper = 0.0, lower = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (c[i] == 0) {
      upper += w[i] / 2;
      lower -= w[i] / 2;
    } else {
      const double u = upper, l = lower;
      upper = l - w[i] / 2;
      lower = u + w[i] / 2;
    }
  }
  return upper - lower + w[c.size()];
}

inline std::vector<std::uint8_t> bits_of(std::uint32_t x, int n) {
  std::vector<std::uint8_t> b(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) b[i] = (x >> (n - 1 - i)) & 1u;
  return b;
}

/// Sub-challenge t of `challenge` as an n-bit integer (first bit = MSB).
inline std::uint32_t sub_challenge_value(const ocec::Block32& challenge, std::uint32_t t, int n) {
  unsigned char buf[36];
  for (int i = 0; i < 32; ++i) buf[i] = challenge[i];
  buf[32] = static_cast<unsigned char>(t >> 24);
  buf[33] = static_cast<unsigned char>(t >> 16);
  buf[34] = static_cast<unsigned char>(t >> 8);
  buf[35] = static_cast<unsigned char>(t);
  unsigned char d[SHA256_DIGEST_LENGTH];
  SHA256(buf, sizeof buf, d);
  std::uint64_t head = 0;
  for (int i = 0; i < 8; ++i) head = (head << 8) | d[i];
  return static_cast<std::uint32_t>(head >> (64 - n));
}

struct TableEntry {
  bool stable = false;
  std::uint8_t bit = 0;
};

/// Noise-free classification of all 2^n sub-challenges: both races agree
/// exactly when dd + D and dd - D have the same sign.
inline std::vector<TableEntry> exhaustive_table(const std::vector<double>& w, double margin) {
  const int n = static_cast<int>(w.size()) - 1;
  std::vector<TableEntry> table(std::size_t{1} << n);
  for (std::uint32_t x = 0; x < table.size(); ++x) {
    const double dd = race_delta(w, bits_of(x, n));
    const bool r = !(dd + margin > 0.0);
    const bool r2 = !(dd - margin > 0.0);
    table[x] = TableEntry{r == r2, static_cast<std::uint8_t>(r)};
  }
  return table;
}

struct Response {
  std::vector<std::uint8_t> bits;
  std::vector<std::uint32_t> indices;
};

/// nullopt when t_max is reached first.
inline std::optional<Response> ocec_response(const std::vector<double>& w, double margin,
                                             const ocec::Block32& challenge, int response_len,
                                             int t_max) {
  const int n = static_cast<int>(w.size()) - 1;
  const auto table = exhaustive_table(w, margin);
  Response r;
  for (int t = 0; t < t_max; ++t) {
    const auto& e = table[sub_challenge_value(challenge, static_cast<std::uint32_t>(t), n)];
    if (!e.stable) continue;
    r.bits.push_back(e.bit);
    r.indices.push_back(static_cast<std::uint32_t>(t));
    if (static_cast<int>(r.bits.size()) == response_len) return r;
  }
  return std::nullopt;
}

}  // namespace oracle

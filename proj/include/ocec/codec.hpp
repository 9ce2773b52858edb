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

// Wire layout of the three protocol packets. All fields are fixed width and
// transmitted in the order listed, as raw byte strings.
//
//   Msg1 = ID(32) || N(16)                 48 bytes, SM -> NG
//   Msg2 = C(32)  || V_NG(32) || E_NG(32)  96 bytes, NG -> SM
//   Msg3 = F(32)  || E(32)    || V(32)     96 bytes, SM -> NG

#include <cstddef>
#include <span>

#include "ocec/bytes.hpp"

namespace ocec {

struct FieldSizes {
  static constexpr std::size_t kHash = 32;
  static constexpr std::size_t kId = 32;
  static constexpr std::size_t kChallenge = 32;
  static constexpr std::size_t kKey = 32;
  static constexpr std::size_t kVerifier = 32;
  static constexpr std::size_t kF = 32;
  static constexpr std::size_t kE = 32;
  static constexpr std::size_t kNonce = 16;
  static constexpr std::size_t kRand = 16;
  static constexpr std::size_t kMsg = 16;
  static constexpr std::size_t kResponse = 16;  // 128 reliable bits

  static constexpr std::size_t kMsg1 = kId + kNonce;
  static constexpr std::size_t kMsg2 = kChallenge + kVerifier + kE;
  static constexpr std::size_t kMsg3 = kF + kE + kVerifier;
};

static_assert(FieldSizes::kE == 2 * FieldSizes::kRand);
static_assert(FieldSizes::kKey == FieldSizes::kE);
static_assert(FieldSizes::kMsg2 + FieldSizes::kMsg3 == 192);

struct Msg1 {
  Block32 id{};
  Block16 nonce{};
  friend bool operator==(const Msg1&, const Msg1&) = default;
};

struct Msg2 {
  Block32 challenge{};
  Block32 v_ng{};
  Block32 e_ng{};
  friend bool operator==(const Msg2&, const Msg2&) = default;
};

struct Msg3 {
  Block32 f{};
  Block32 e{};
  Block32 v{};
  friend bool operator==(const Msg3&, const Msg3&) = default;
};

namespace detail {

template <std::size_t N>
void append(Bytes& out, const Block<N>& b) {
  out.insert(out.end(), b.begin(), b.end());
}

template <std::size_t N>
Block<N> take(std::span<const std::uint8_t>& in) {
  Block<N> b{};
  std::copy(in.begin(), in.begin() + N, b.begin());
  in = in.subspan(N);
  return b;
}

inline void require_length(std::span<const std::uint8_t> buf, std::size_t want, const char* what) {
  if (buf.size() != want) {
    throw Error(Errc::bad_length, std::string(what) + " needs " + std::to_string(want) +
                                      " bytes, got " + std::to_string(buf.size()));
  }
}

}  // namespace detail

inline Bytes encode_msg1(const Msg1& m) {
  Bytes out;
  out.reserve(FieldSizes::kMsg1);
  detail::append(out, m.id);
  detail::append(out, m.nonce);
  return out;
}

inline Bytes encode_msg2(const Msg2& m) {
  Bytes out;
  out.reserve(FieldSizes::kMsg2);
  detail::append(out, m.challenge);
  detail::append(out, m.v_ng);
  detail::append(out, m.e_ng);
  return out;
}

inline Bytes encode_msg3(const Msg3& m) {
  Bytes out;
  out.reserve(FieldSizes::kMsg3);
  detail::append(out, m.f);
  detail::append(out, m.e);
  detail::append(out, m.v);
  return out;
}

inline Msg1 decode_msg1(std::span<const std::uint8_t> buf) {
  detail::require_length(buf, FieldSizes::kMsg1, "Msg1");
  Msg1 m;
  m.id = detail::take<32>(buf);
  m.nonce = detail::take<16>(buf);
  return m;
}

inline Msg2 decode_msg2(std::span<const std::uint8_t> buf) {
  detail::require_length(buf, FieldSizes::kMsg2, "Msg2");
  Msg2 m;
  m.challenge = detail::take<32>(buf);
  m.v_ng = detail::take<32>(buf);
  m.e_ng = detail::take<32>(buf);
  return m;
}

inline Msg3 decode_msg3(std::span<const std::uint8_t> buf) {
  detail::require_length(buf, FieldSizes::kMsg3, "Msg3");
  Msg3 m;
  m.f = detail::take<32>(buf);
  m.e = detail::take<32>(buf);
  m.v = detail::take<32>(buf);
  return m;
}

}  // namespace ocec

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

#include <gtest/gtest.h>

#include "ocec/codec.hpp"
#include "ocec/crypto.hpp"

using namespace ocec;

namespace {

template <typename F>
void expect_bad_length(F&& f) {
  try {
    f();
    FAIL() << "no throw";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::bad_length);
  }
}

}  // namespace

TEST(Codec, PacketSizes) {
  EXPECT_EQ(encode_msg1(Msg1{}).size(), 48u);
  EXPECT_EQ(encode_msg2(Msg2{}).size(), 96u);
  EXPECT_EQ(encode_msg3(Msg3{}).size(), 96u);
  EXPECT_EQ(FieldSizes::kMsg2 + FieldSizes::kMsg3, 192u);
}

TEST(Codec, RoundTripRandomPackets) {
  Prng rng(1);
  for (int i = 0; i < 2000; ++i) {
    const Msg1 m1{rng.block<32>(), rng.block<16>()};
    const Msg2 m2{rng.block<32>(), rng.block<32>(), rng.block<32>()};
    const Msg3 m3{rng.block<32>(), rng.block<32>(), rng.block<32>()};
    EXPECT_EQ(decode_msg1(encode_msg1(m1)), m1);
    EXPECT_EQ(decode_msg2(encode_msg2(m2)), m2);
    EXPECT_EQ(decode_msg3(encode_msg3(m3)), m3);
    const Bytes raw = rng.bytes(96);
    EXPECT_EQ(encode_msg2(decode_msg2(raw)), raw);
  }
}

TEST(Codec, FieldOrder) {
  Msg2 m;
  m.challenge.fill(1);
  m.v_ng.fill(2);
  m.e_ng.fill(3);
  const Bytes w = encode_msg2(m);
  EXPECT_EQ(w[0], 1);
  EXPECT_EQ(w[32], 2);
  EXPECT_EQ(w[64], 3);
  Msg1 a;
  a.id.fill(7);
  a.nonce.fill(9);
  const Bytes w1 = encode_msg1(a);
  EXPECT_EQ(w1[31], 7);
  EXPECT_EQ(w1[32], 9);
}

TEST(Codec, WrongLengthsRejected) {
  expect_bad_length([] { decode_msg2(Bytes(95, 0)); });
  expect_bad_length([] { decode_msg2(Bytes(97, 0)); });
  expect_bad_length([] { decode_msg3(Bytes(0, 0)); });
  expect_bad_length([] { decode_msg1(Bytes(96, 0)); });
}

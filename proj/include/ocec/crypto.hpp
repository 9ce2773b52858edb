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

// Fixed-width primitives shared by the meter and the gateway: SHA-256 over
// concatenated fixed-width fields, XOR pads, a seedable byte generator and
// the Gaussian draw source used for arbiter jitter.

#include <openssl/evp.h>
#include <openssl/rand.h>

#include <cmath>
#include <concepts>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "ocec/bytes.hpp"

namespace ocec {

inline constexpr std::size_t kHashLen = 32;

using Digest = Block32;

namespace detail {

struct MdCtxDeleter {
  void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};

inline EVP_MD_CTX* thread_md_ctx() {
  thread_local std::unique_ptr<EVP_MD_CTX, MdCtxDeleter> ctx(EVP_MD_CTX_new());
  if (!ctx) throw Error(Errc::io, "EVP_MD_CTX_new failed");
  return ctx.get();
}

}  // namespace detail

/// SHA-256 of the concatenation of `parts`.
inline Digest sha256(std::initializer_list<std::span<const std::uint8_t>> parts) {
  EVP_MD_CTX* ctx = detail::thread_md_ctx();
  if (EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    throw Error(Errc::io, "EVP_DigestInit_ex failed");
  }
  for (auto part : parts) {
    if (!part.empty() && EVP_DigestUpdate(ctx, part.data(), part.size()) != 1) {
      throw Error(Errc::io, "EVP_DigestUpdate failed");
    }
  }
  Digest out{};
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(ctx, out.data(), &len) != 1 || len != out.size()) {
    throw Error(Errc::io, "EVP_DigestFinal_ex failed");
  }
  return out;
}

inline Digest sha256(std::span<const std::uint8_t> data) { return sha256({data}); }

/// A field of a hash input together with the width the protocol declares for it.
struct HashField {
  std::span<const std::uint8_t> bytes;
  std::size_t width;
};

/// h(f1, f2, ...) = SHA-256(f1 || f2 || ...). Every field must have its
/// declared width; that is what makes the plain concatenation unambiguous.
inline Digest hash_fields(std::span<const HashField> fields) {
  EVP_MD_CTX* ctx = detail::thread_md_ctx();
  for (const auto& f : fields) {
    if (f.bytes.size() != f.width) {
      throw Error(Errc::structural, "hash field of " + std::to_string(f.bytes.size()) +
                                        " bytes, declared " + std::to_string(f.width));
    }
  }
  if (EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    throw Error(Errc::io, "EVP_DigestInit_ex failed");
  }
  for (const auto& f : fields) {
    if (!f.bytes.empty() && EVP_DigestUpdate(ctx, f.bytes.data(), f.bytes.size()) != 1) {
      throw Error(Errc::io, "EVP_DigestUpdate failed");
    }
  }
  Digest out{};
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(ctx, out.data(), &len) != 1) {
    throw Error(Errc::io, "EVP_DigestFinal_ex failed");
  }
  return out;
}

/// Statically sized form; widths come from the array types.
template <std::size_t... N>
Digest hash_fields(const Block<N>&... fields) {
  const HashField list[] = {HashField{std::span<const std::uint8_t>(fields), N}...};
  return hash_fields(std::span<const HashField>(list, sizeof...(N)));
}

inline Digest hash_fields() { return hash_fields(std::span<const HashField>{}); }

inline Bytes xor_stream(std::span<const std::uint8_t> data, std::span<const std::uint8_t> pad) {
  if (data.size() != pad.size()) {
    throw Error(Errc::bad_length, "xor_stream operands differ in length (" +
                                      std::to_string(data.size()) + " vs " +
                                      std::to_string(pad.size()) + ")");
  }
  Bytes out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out[i] = data[i] ^ pad[i];
  return out;
}

/// Byte generator owned by one protocol party. Seeded instances replay the
/// same stream; default-constructed ones draw from the OS via OpenSSL.
class Prng {
 public:
  Prng() = default;
  explicit Prng(std::uint64_t seed) : engine_(std::mt19937_64(seed)) {}

  bool seeded() const { return engine_.has_value(); }

  void fill(std::span<std::uint8_t> out) {
    if (!engine_) {
      if (!out.empty() && RAND_bytes(out.data(), static_cast<int>(out.size())) != 1) {
        throw Error(Errc::io, "RAND_bytes failed");
      }
      return;
    }
    std::size_t i = 0;
    while (i < out.size()) {
      std::uint64_t word = (*engine_)();
      for (int b = 0; b < 8 && i < out.size(); ++b, ++i) {
        out[i] = static_cast<std::uint8_t>(word >> (8 * b));
      }
    }
  }

  Bytes bytes(std::size_t n) {
    Bytes out(n);
    fill(out);
    return out;
  }

  template <std::size_t N>
  Block<N> block() {
    Block<N> out{};
    fill(out);
    return out;
  }

  std::uint64_t next_u64() {
    Block<8> b = block<8>();
    std::uint64_t v = 0;
    for (std::uint8_t x : b) v = (v << 8) | x;
    return v;
  }

 private:
  std::optional<std::mt19937_64> engine_;
};

/// Anything that can hand out standard-normal draws.
template <typename T>
concept NoiseSource = requires(T& n) {
  { n.gaussian() } -> std::convertible_to<double>;
};

/// Standard-normal draws via the Marsaglia polar method over mt19937_64.
/// Used instead of std::normal_distribution so a seed means the same draws
/// under every standard library.
class GaussianNoise {
 public:
  explicit GaussianNoise(std::uint64_t seed) : engine_(seed) {}

  double gaussian() {
    if (spare_) {
      double v = *spare_;
      spare_.reset();
      return v;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double scale = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * scale;
    return u * scale;
  }

  // [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

/// Noise disabled: every draw is exactly zero.
struct NoNoise {
  double gaussian() const { return 0.0; }
};

/// splitmix64 step; derives independent child seeds from one master seed.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace ocec

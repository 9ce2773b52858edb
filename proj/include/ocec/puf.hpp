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

// Simulated on-chip-error-correcting arbiter PUF.
//
// A challenge selects a path through n_stages MUX stages; the arbiter sees
// the delay difference dd = d_upper - d_lower of the two racing signals and
// outputs 0 when dd > 0. dd follows the additive linear model
//
//   dd(c) = sum_i w_i * phi_i(c) + w_n,   phi_i(c) = prod_{j>=i} (1 - 2 c_j)
//
// The delay generator inserts a line of n_not_gates inverters (margin D)
// first on the upper path, then on the lower path. The reliability test bit
// is the XOR of the two races and is 0 exactly when both agree, i.e. when
// |dd| clears D. Only those bits are kept.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "ocec/bytes.hpp"
#include "ocec/crypto.hpp"

namespace ocec {

struct PufCalibration {
  int n_stages = 32;
  int n_not_gates = 4;
  double delta_not = 0.25;      // stage-delay std devs per inverter
  double noise_sigma0 = 0.05;   // arbiter jitter at temp_ref_c
  double noise_alpha = 0.04;    // jitter growth per degree C
  double temp_ref_c = 25.0;
  int response_len = 128;
  int t_max = 4096;

  static constexpr double kMinTempC = -20.0;
  static constexpr double kMaxTempC = 100.0;

  void validate() const {
    if (n_stages < 1 || n_stages > 256) {
      throw Error(Errc::structural, "n_stages must be in [1, 256]");
    }
    if (n_not_gates < 0 || n_not_gates > 8) {
      throw Error(Errc::structural, "n_not_gates must be in [0, 8]");
    }
    if (!(delta_not > 0.0)) throw Error(Errc::structural, "delta_not must be > 0");
    if (noise_sigma0 < 0.0 || noise_alpha < 0.0) {
      throw Error(Errc::structural, "noise parameters must be >= 0");
    }
    if (response_len < 1) throw Error(Errc::structural, "response_len must be positive");
    if (t_max < 1) throw Error(Errc::structural, "t_max must be positive");
  }
};

class SubChallenge {
 public:
  SubChallenge() = default;
  explicit SubChallenge(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
    for (auto b : bits_) {
      if (b > 1) throw Error(Errc::structural, "sub-challenge bits must be 0 or 1");
    }
  }

  /// Bits of `value`, most significant of the n low bits first.
  static SubChallenge from_integer(std::uint64_t value, int n) {
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) bits[i] = (value >> (n - 1 - i)) & 1u;
    return SubChallenge(std::move(bits));
  }

  std::size_t size() const { return bits_.size(); }
  std::uint8_t operator[](std::size_t i) const { return bits_[i]; }
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  friend bool operator==(const SubChallenge&, const SubChallenge&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

struct OcecBit {
  std::uint8_t response;     // R, latched in the first race
  std::uint8_t reliability;  // R_T = R xor R'
};

struct OcecResponse {
  std::vector<std::uint8_t> bits;            // one 0/1 entry per response bit
  std::vector<std::uint32_t> source_indices; // sub-challenge index t of each bit

  /// Bits packed MSB-first, zero-padded to whole bytes.
  Bytes packed() const { return pack_bits(bits); }

  static Bytes pack_bits(std::span<const std::uint8_t> bits) {
    Bytes out((bits.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < bits.size(); ++i) {
      if (bits[i]) out[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
    }
    return out;
  }

  friend bool operator==(const OcecResponse&, const OcecResponse&) = default;
};

using Challenge = Block32;

class PufInstance {
 public:
  /// Weights drawn i.i.d. N(0, 1) from `instance_seed`.
  PufInstance(std::uint64_t instance_seed, PufCalibration cal)
      : cal_(cal), seed_(instance_seed) {
    cal_.validate();
    GaussianNoise draw(instance_seed);
    weights_.resize(static_cast<std::size_t>(cal_.n_stages) + 1);
    for (double& w : weights_) w = draw.gaussian();
  }

  explicit PufInstance(std::uint64_t instance_seed)
      : PufInstance(instance_seed, PufCalibration{}) {}

  /// Explicit weights; n_stages is taken from the weight count.
  PufInstance(std::vector<double> weights, PufCalibration cal)
      : cal_(cal), seed_(0), weights_(std::move(weights)) {
    if (weights_.size() < 2) throw Error(Errc::structural, "need at least n_stages + 1 = 2 weights");
    cal_.n_stages = static_cast<int>(weights_.size()) - 1;
    cal_.validate();
  }

  const PufCalibration& calibration() const { return cal_; }
  std::uint64_t instance_seed() const { return seed_; }
  int n_stages() const { return cal_.n_stages; }
  const std::vector<double>& stage_weights() const { return weights_; }

  /// Same silicon, different delay line.
  PufInstance with_not_gates(int n_not_gates) const {
    PufInstance copy = *this;
    copy.cal_.n_not_gates = n_not_gates;
    copy.cal_.validate();
    return copy;
  }

  double delay_margin() const { return cal_.n_not_gates * cal_.delta_not; }

  double sigma_at(double temp_c) const {
    return cal_.noise_sigma0 * (1.0 + cal_.noise_alpha * std::abs(temp_c - cal_.temp_ref_c));
  }

  /// Noise-free delay difference d_upper - d_lower.
  double delta_d(const SubChallenge& c) const {
    check_length(c);
    const std::size_t n = c.size();
    double sum = weights_[n];
    double phi = 1.0;
    for (std::size_t i = n; i-- > 0;) {
      phi *= c[i] ? -1.0 : 1.0;
      sum += weights_[i] * phi;
    }
    return sum;
  }

  /// Two races: upper path delayed by D, then lower path delayed by D.
  template <NoiseSource Noise>
  OcecBit evaluate_ocec_bit(const SubChallenge& c, double temp_c, Noise& noise) const {
    check_temperature(temp_c);
    const double dd = delta_d(c);
    const double margin = delay_margin();
    const double sigma = sigma_at(temp_c);
    const double eps0 = sigma * noise.gaussian();
    const double eps1 = sigma * noise.gaussian();
    const std::uint8_t r = (dd + margin + eps0 > 0.0) ? 0 : 1;
    const std::uint8_t r_prime = (dd - margin + eps1 > 0.0) ? 0 : 1;
    return OcecBit{r, static_cast<std::uint8_t>(r ^ r_prime)};
  }

  /// Sub-challenge t: first ceil(n/8) bytes of SHA-256(challenge || be32(t)),
  /// read MSB-first and truncated to n bits.
  SubChallenge derive_sub_challenge(const Challenge& challenge, std::uint32_t t) const {
    const Block<4> counter{static_cast<std::uint8_t>(t >> 24), static_cast<std::uint8_t>(t >> 16),
                           static_cast<std::uint8_t>(t >> 8), static_cast<std::uint8_t>(t)};
    const Digest d = sha256({challenge, counter});
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(cal_.n_stages));
    for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = (d[i / 8] >> (7 - i % 8)) & 1u;
    return SubChallenge(std::move(bits));
  }

  /// Walks sub-challenges t = 0, 1, ... and keeps R for every R_T = 0 until
  /// response_len bits are collected. Throws YieldExhausted at t_max.
  template <NoiseSource Noise>
  OcecResponse ocec_response(const Challenge& challenge, double temp_c, Noise& noise) const {
    check_temperature(temp_c);
    const auto want = static_cast<std::size_t>(cal_.response_len);
    OcecResponse out;
    out.bits.reserve(want);
    out.source_indices.reserve(want);
    for (std::uint32_t t = 0; t < static_cast<std::uint32_t>(cal_.t_max); ++t) {
      const OcecBit bit = evaluate_ocec_bit(derive_sub_challenge(challenge, t), temp_c, noise);
      if (bit.reliability != 0) continue;
      out.bits.push_back(bit.response);
      out.source_indices.push_back(t);
      if (out.bits.size() == want) return out;
    }
    throw Error(Errc::yield_exhausted,
                "only " + std::to_string(out.bits.size()) + " of " + std::to_string(want) +
                    " stable bits within t_max = " + std::to_string(cal_.t_max));
  }

  /// Plain arbiter: no delay line, no filtering, sub-challenges 0..response_len-1.
  template <NoiseSource Noise>
  std::vector<std::uint8_t> raw_response(const Challenge& challenge, double temp_c,
                                         Noise& noise) const {
    check_temperature(temp_c);
    const double sigma = sigma_at(temp_c);
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(cal_.response_len));
    for (std::size_t t = 0; t < bits.size(); ++t) {
      const double dd = delta_d(derive_sub_challenge(challenge, static_cast<std::uint32_t>(t)));
      bits[t] = (dd + sigma * noise.gaussian() > 0.0) ? 0 : 1;
    }
    return bits;
  }

 private:
  void check_length(const SubChallenge& c) const {
    if (c.size() != static_cast<std::size_t>(cal_.n_stages)) {
      throw Error(Errc::structural, "sub-challenge has " + std::to_string(c.size()) +
                                        " bits, PUF has " + std::to_string(cal_.n_stages) +
                                        " stages");
    }
  }

  static void check_temperature(double temp_c) {
    if (!(temp_c >= PufCalibration::kMinTempC && temp_c <= PufCalibration::kMaxTempC)) {
      throw Error(Errc::structural, "temperature outside simulated range [-20, 100] C");
    }
  }

  PufCalibration cal_;
  std::uint64_t seed_;
  std::vector<double> weights_;
};

}  // namespace ocec

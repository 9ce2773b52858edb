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

// Measurements behind the CLI: PUF quality rows, per-session cost rows and a
// statistical look at session keys. Every routine is a pure function of its
// inputs and seed, so CSV output is byte-for-byte reproducible.

#include <boost/math/distributions/chi_squared.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ocec/netlab.hpp"

namespace ocec::analytics {

// ---------------------------------------------------------------------------
// key=value configuration files

class Config {
 public:
  Config() = default;

  static Config parse(const std::string& text) {
    Config c;
    std::istringstream in(text);
    int lineno = 0;
    for (std::string line; std::getline(in, line);) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw Error(Errc::config, "line " + std::to_string(lineno) + ": expected key=value");
      }
      const std::string key = trim(line.substr(0, eq));
      if (key.empty()) throw Error(Errc::config, "line " + std::to_string(lineno) + ": empty key");
      c.values_[key] = trim(line.substr(eq + 1));
    }
    return c;
  }

  static Config load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io, "cannot read config " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
  }

  bool has(const std::string& key) const {
    used_[key] = true;
    return values_.count(key) != 0;
  }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  std::string get(const std::string& key, const std::string& fallback) const {
    used_[key] = true;
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const std::string v = get(key, "");
    try {
      std::size_t pos = 0;
      const auto out = std::stoull(v, &pos);
      if (pos != v.size() || v.front() == '-') throw std::invalid_argument(v);
      return out;
    } catch (const std::exception&) {
      throw Error(Errc::config, key + ": not an unsigned integer: '" + v + "'");
    }
  }

  int get_int(const std::string& key, int fallback) const {
    if (!has(key)) return fallback;
    const std::string v = get(key, "");
    try {
      std::size_t pos = 0;
      const int out = std::stoi(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return out;
    } catch (const std::exception&) {
      throw Error(Errc::config, key + ": not an integer: '" + v + "'");
    }
  }

  double get_double(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const std::string v = get(key, "");
    try {
      std::size_t pos = 0;
      const double out = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return out;
    } catch (const std::exception&) {
      throw Error(Errc::config, key + ": not a number: '" + v + "'");
    }
  }

  bool get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = get(key, "");
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw Error(Errc::config, key + ": not a boolean: '" + v + "'");
  }

  std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback) const {
    if (!has(key)) return fallback;
    std::vector<double> out;
    std::istringstream in(get(key, ""));
    for (std::string item; std::getline(in, item, ',');) {
      item = trim(item);
      try {
        std::size_t pos = 0;
        out.push_back(std::stod(item, &pos));
        if (pos != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        throw Error(Errc::config, key + ": bad list element '" + item + "'");
      }
    }
    if (out.empty()) throw Error(Errc::config, key + ": empty list");
    return out;
  }

  /// Keys present in the file that no getter asked for.
  std::vector<std::string> unused() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_) {
      if (!used_.count(k)) out.push_back(k);
    }
    return out;
  }

  /// Calibration fields, named as in PufCalibration.
  PufCalibration calibration(PufCalibration base = {}) const {
    base.n_stages = get_int("n_stages", base.n_stages);
    base.n_not_gates = get_int("n_not_gates", base.n_not_gates);
    base.delta_not = get_double("delta_not", base.delta_not);
    base.noise_sigma0 = get_double("noise_sigma0", base.noise_sigma0);
    base.noise_alpha = get_double("noise_alpha", base.noise_alpha);
    base.temp_ref_c = get_double("temp_ref_c", base.temp_ref_c);
    base.response_len = get_int("response_len", base.response_len);
    base.t_max = get_int("t_max", base.t_max);
    base.validate();
    return base;
  }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> values_;
  mutable std::map<std::string, bool> used_;
};

/// Fixed-point rendering so CSV bytes do not depend on locale or printf
/// shortest-form choices.
inline std::string fmt(double v, int digits = 9) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// ---------------------------------------------------------------------------
// PUF statistics

struct PufStatsConfig {
  std::size_t instances = 40;
  int n_not_min = 0;
  int n_not_max = 4;
  std::vector<double> temps{0.0, 25.0, 40.0, 60.0, 80.0};
  std::size_t evals_per_point = 1;  // re-evaluation rounds per temperature
  std::size_t challenges = 1;       // common challenges per instance
  std::uint64_t seed = 1;
  PufCalibration calibration{};
};

struct PufStatsRow {
  int n_not_gates = 0;
  double yield_mean = 0;        // selected bits per batch of 128 sub-challenges
  double uniformity_mean = 0;
  double uniqueness_mean = 0;   // pairwise inter-instance fractional HD
  double raw_ber = 0;
  double reliable_ber = 0;
  double mask_drop_rate = 0;    // re-evaluations of a committed bit with R_T = 1
  std::uint64_t raw_bits = 0;
  std::uint64_t raw_flips = 0;
  std::uint64_t reliable_bits = 0;
  std::uint64_t reliable_flips = 0;
  std::uint64_t mask_drops = 0;
  std::uint64_t yield_exhausted = 0;  // (instance, challenge) pairs without a full response
  std::vector<double> temps;
};

inline std::string puf_stats_header() {
  return "n_not_gates,yield_mean,uniformity_mean,uniqueness_mean,raw_ber,reliable_ber,"
         "mask_drop_rate,raw_bits,raw_flips,reliable_bits,reliable_flips,mask_drops,"
         "yield_exhausted,temps";
}

inline std::string to_csv(const PufStatsRow& r) {
  std::string temps;
  for (std::size_t i = 0; i < r.temps.size(); ++i) {
    if (i) temps += ";";
    temps += fmt(r.temps[i], 1);
  }
  std::ostringstream o;
  o << r.n_not_gates << ',' << fmt(r.yield_mean, 4) << ',' << fmt(r.uniformity_mean, 6) << ','
    << fmt(r.uniqueness_mean, 6) << ',' << fmt(r.raw_ber, 9) << ',' << fmt(r.reliable_ber, 9) << ','
    << fmt(r.mask_drop_rate, 9) << ',' << r.raw_bits << ',' << r.raw_flips << ','
    << r.reliable_bits << ',' << r.reliable_flips << ',' << r.mask_drops << ','
    << r.yield_exhausted << ',' << temps;
  return o.str();
}

namespace detail {

inline double fraction_ones(const std::vector<std::uint8_t>& bits) {
  std::size_t ones = 0;
  for (auto b : bits) ones += b;
  return bits.empty() ? 0.0 : static_cast<double>(ones) / static_cast<double>(bits.size());
}

inline double fractional_hd(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
  return static_cast<double>(d) / static_cast<double>(a.size());
}

}  // namespace detail

/// Counts for re-evaluating the bits of one committed response.
struct ReliabilityCount {
  std::uint64_t evaluations = 0;
  std::uint64_t flips = 0;       // R_T = 0 but R differs from the committed bit
  std::uint64_t mask_drops = 0;  // R_T = 1: the bit would not be selected now
};

/// Re-evaluates every committed bit of `reference` `rounds` times at each
/// temperature, on the sub-challenge it was taken from.
template <NoiseSource Noise>
ReliabilityCount recheck_response(const PufInstance& puf, const Challenge& challenge,
                                  const OcecResponse& reference, const std::vector<double>& temps,
                                  std::size_t rounds, Noise& noise) {
  ReliabilityCount out;
  std::vector<SubChallenge> subs;
  subs.reserve(reference.bits.size());
  for (auto t : reference.source_indices) subs.push_back(puf.derive_sub_challenge(challenge, t));
  for (double temp : temps) {
    for (std::size_t round = 0; round < rounds; ++round) {
      for (std::size_t i = 0; i < subs.size(); ++i) {
        const OcecBit b = puf.evaluate_ocec_bit(subs[i], temp, noise);
        ++out.evaluations;
        if (b.reliability != 0) {
          ++out.mask_drops;
        } else if (b.response != reference.bits[i]) {
          ++out.flips;
        }
      }
    }
  }
  return out;
}

/// One row per n_not. Instance i uses seed mix(seed, i) at every n_not, so a
/// row differs from the next only in the delay line. References are taken at
/// the calibration's reference temperature.
inline std::vector<PufStatsRow> puf_stats(const PufStatsConfig& cfg) {
  if (cfg.instances == 0 || cfg.challenges == 0 || cfg.evals_per_point == 0 || cfg.temps.empty()) {
    throw Error(Errc::config, "puf_stats needs positive counts and at least one temperature");
  }
  if (cfg.n_not_min < 0 || cfg.n_not_max < cfg.n_not_min) {
    throw Error(Errc::config, "bad n_not range");
  }
  const double t_ref = cfg.calibration.temp_ref_c;
  std::vector<Challenge> challenges(cfg.challenges);
  {
    Prng rng(mix_seed(cfg.seed, 500));
    for (auto& c : challenges) rng.fill(c);
  }
  std::vector<PufInstance> base;
  base.reserve(cfg.instances);
  for (std::size_t i = 0; i < cfg.instances; ++i) {
    base.emplace_back(mix_seed(cfg.seed, i), cfg.calibration);
  }

  std::vector<PufStatsRow> rows;
  for (int n_not = cfg.n_not_min; n_not <= cfg.n_not_max; ++n_not) {
    PufStatsRow row;
    row.n_not_gates = n_not;
    row.temps = cfg.temps;
    double yield_sum = 0, uniformity_sum = 0;
    std::size_t yield_batches = 0, uniformity_count = 0;
    // responses[c][i]: instance i on challenge c, empty when exhausted
    std::vector<std::vector<std::vector<std::uint8_t>>> responses(
        cfg.challenges, std::vector<std::vector<std::uint8_t>>(cfg.instances));

    for (std::size_t i = 0; i < cfg.instances; ++i) {
      const PufInstance puf = base[i].with_not_gates(n_not);
      GaussianNoise noise(mix_seed(cfg.seed, 10000 + 100 * static_cast<std::uint64_t>(n_not) + i));
      const std::size_t batch = 128;
      for (std::size_t c = 0; c < cfg.challenges; ++c) {
        const Challenge& ch = challenges[c];

        std::size_t selected = 0;
        for (std::uint32_t t = 0; t < batch; ++t) {
          selected += puf.evaluate_ocec_bit(puf.derive_sub_challenge(ch, t), t_ref, noise).reliability == 0;
        }
        yield_sum += static_cast<double>(selected);
        ++yield_batches;

        const auto raw_ref = puf.raw_response(ch, t_ref, noise);
        for (double temp : cfg.temps) {
          for (std::size_t r = 0; r < cfg.evals_per_point; ++r) {
            const auto again = puf.raw_response(ch, temp, noise);
            for (std::size_t k = 0; k < again.size(); ++k) row.raw_flips += again[k] != raw_ref[k];
            row.raw_bits += again.size();
          }
        }

        OcecResponse ref;
        try {
          ref = puf.ocec_response(ch, t_ref, noise);
        } catch (const Error& e) {
          if (e.code() != Errc::yield_exhausted) throw;
          ++row.yield_exhausted;
          continue;
        }
        uniformity_sum += detail::fraction_ones(ref.bits);
        ++uniformity_count;
        responses[c][i] = ref.bits;
        const ReliabilityCount rc = recheck_response(puf, ch, ref, cfg.temps, cfg.evals_per_point, noise);
        row.reliable_bits += rc.evaluations;
        row.reliable_flips += rc.flips;
        row.mask_drops += rc.mask_drops;
      }
    }

    double hd_sum = 0;
    std::size_t pairs = 0;
    for (const auto& per_challenge : responses) {
      for (std::size_t a = 0; a < per_challenge.size(); ++a) {
        for (std::size_t b = a + 1; b < per_challenge.size(); ++b) {
          if (per_challenge[a].empty() || per_challenge[b].empty()) continue;
          hd_sum += detail::fractional_hd(per_challenge[a], per_challenge[b]);
          ++pairs;
        }
      }
    }

    row.yield_mean = yield_batches ? yield_sum / static_cast<double>(yield_batches) : 0.0;
    row.uniformity_mean = uniformity_count ? uniformity_sum / static_cast<double>(uniformity_count) : 0.0;
    row.uniqueness_mean = pairs ? hd_sum / static_cast<double>(pairs) : 0.0;
    row.raw_ber = row.raw_bits ? static_cast<double>(row.raw_flips) / static_cast<double>(row.raw_bits) : 0.0;
    if (n_not == 0) {
      // No margin, no filtering: the "reliable" bits are the raw bits.
      row.reliable_ber = row.raw_ber;
    } else {
      row.reliable_ber = row.reliable_bits
                             ? static_cast<double>(row.reliable_flips) / static_cast<double>(row.reliable_bits)
                             : 0.0;
    }
    row.mask_drop_rate = row.reliable_bits
                             ? static_cast<double>(row.mask_drops) / static_cast<double>(row.reliable_bits)
                             : 0.0;
    rows.push_back(row);
  }
  return rows;
}

/// Row invariants the CLI enforces; returns one message per violation.
inline std::vector<std::string> check_rows(const std::vector<PufStatsRow>& rows) {
  std::vector<std::string> bad;
  auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = rows[k];
    const std::string tag = "n_not=" + std::to_string(r.n_not_gates) + ": ";
    if (!in01(r.uniformity_mean) || !in01(r.uniqueness_mean) || !in01(r.raw_ber) ||
        !in01(r.reliable_ber) || !in01(r.mask_drop_rate)) {
      bad.push_back(tag + "rate outside [0, 1]");
    }
    if (r.reliable_ber > r.raw_ber) bad.push_back(tag + "reliable_ber exceeds raw_ber");
    if (k > 0 && rows[k - 1].n_not_gates < r.n_not_gates && r.yield_mean > rows[k - 1].yield_mean) {
      bad.push_back(tag + "yield increased with n_not");
    }
  }
  return bad;
}

// ---------------------------------------------------------------------------
// Session cost

struct BenchConfig {
  std::uint64_t sessions = 1000;
  std::size_t meters = 1;
  std::uint64_t seed = 1;
  bool puf_noise = false;
  PufCalibration calibration{};
  double temp_c = 25.0;
};

struct BenchRow {
  std::uint64_t session = 0;
  std::size_t meter = 0;
  OpCounters ops{};
  std::size_t msg1 = 0, msg2 = 0, msg3 = 0;
  std::size_t total_overhead() const { return msg2 + msg3; }
  bool sm_completed = false;
  bool accepted = false;
};

inline std::string bench_header() {
  return "session,meter,hash,prng,puf,msg1,msg2,msg3,total_overhead,sm_completed,accepted";
}

inline std::string to_csv(const BenchRow& r) {
  std::ostringstream o;
  o << r.session << ',' << r.meter << ',' << r.ops.hash << ',' << r.ops.prng << ',' << r.ops.puf
    << ',' << r.msg1 << ',' << r.msg2 << ',' << r.msg3 << ',' << r.total_overhead() << ','
    << (r.sm_completed ? 1 : 0) << ',' << (r.accepted ? 1 : 0);
  return o.str();
}

struct BenchResult {
  std::vector<BenchRow> rows;
  std::vector<std::string> violations;
  double wall_seconds = 0;  // informational only
};

/// Honest sessions with per-session SM counters. A session the meter
/// completes must cost 8 hashes, 1 r_sm draw and 2 OCEC runs and put 48, 96
/// and 96 bytes on the wire; a meter-side abort must cost 1 OCEC run and 2
/// hashes.
inline BenchResult bench(const BenchConfig& cfg) {
  if (cfg.sessions == 0 || cfg.meters == 0) throw Error(Errc::config, "bench needs sessions and meters");
  BenchResult out;
  NgState ng(mix_seed(cfg.seed, 3));
  std::vector<SmDevice> meters;
  for (std::size_t j = 0; j < cfg.meters; ++j) {
    meters.emplace_back(PufInstance(mix_seed(cfg.seed, 1000 + j), cfg.calibration),
                        mix_seed(cfg.seed, 2000 + j), SmOptions{cfg.puf_noise, false});
    meters.back().set_temperature(cfg.temp_c);
    register_meter(meters.back(), ng);
  }
  Prng payload(mix_seed(cfg.seed, 4));
  const auto t0 = std::chrono::steady_clock::now();
  for (std::uint64_t s = 0; s < cfg.sessions; ++s) {
    const std::size_t j = static_cast<std::size_t>(s % cfg.meters);
    SmDevice& sm = meters[j];
    BenchRow row;
    row.session = s;
    row.meter = j;
    const Bytes m1 = encode_msg1(sm.start());
    row.msg1 = m1.size();
    const auto m2 = ng.on_msg1(decode_msg1(m1), payload.block<16>());
    if (!m2) {
      sm.on_timeout();
      row.ops = sm.counters();
      out.violations.push_back("session " + std::to_string(s) + ": gateway did not answer");
      out.rows.push_back(row);
      continue;
    }
    const Bytes w2 = encode_msg2(*m2);
    row.msg2 = w2.size();
    const SmReply reply = sm.on_msg2(decode_msg2(w2), payload.block<16>());
    row.ops = sm.counters();
    if (reply.ok()) {
      row.sm_completed = true;
      const Bytes w3 = encode_msg3(*reply.msg3);
      row.msg3 = w3.size();
      row.accepted = ng.on_msg3(decode_msg1(m1).id, decode_msg3(w3)).accepted;
    }
    const std::string tag = "session " + std::to_string(s) + ": ";
    if (row.sm_completed) {
      if (row.ops.hash != 8 || row.ops.prng != 1 || row.ops.puf != 2) {
        out.violations.push_back(tag + "completed session cost " + std::to_string(row.ops.hash) + "/" +
                                 std::to_string(row.ops.prng) + "/" + std::to_string(row.ops.puf));
      }
      if (row.msg1 != 48 || row.msg2 != 96 || row.msg3 != 96 || row.total_overhead() != 192) {
        out.violations.push_back(tag + "wire sizes differ from 48/96/96");
      }
    } else if (reply.abort == SmAbort::verifier_mismatch &&
               (row.ops.hash != 2 || row.ops.prng != 0 || row.ops.puf != 1)) {
      out.violations.push_back(tag + "abort did not cost exactly 1 PUF + 2 hashes");
    }
    if (!cfg.puf_noise && !row.accepted) out.violations.push_back(tag + "noise-free session rejected");
    out.rows.push_back(row);
  }
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

// ---------------------------------------------------------------------------
// Key randomness

struct RandomnessReport {
  std::size_t keys = 0;
  std::uint64_t bits = 0;
  std::uint64_t ones = 0;
  double monobit_fraction = 0;
  double monobit_z = 0;          // (ones - n/2) / sqrt(n/4)
  bool monobit_pass = false;     // |z| <= 3
  double chi_square = 0;         // byte-value histogram, 255 dof
  double chi_square_p = 0;
  bool chi_square_pass = false;  // p > 0.001
  double min_position_p = 0;     // smallest p over the 32 byte positions (informational)
  std::size_t distinct_keys = 0;

  bool pass() const { return monobit_pass && chi_square_pass; }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["keys"] = keys;
    j["distinct_keys"] = distinct_keys;
    j["bits"] = bits;
    j["monobit_fraction"] = monobit_fraction;
    j["monobit_z"] = monobit_z;
    j["monobit_pass"] = monobit_pass;
    j["chi_square"] = chi_square;
    j["chi_square_p"] = chi_square_p;
    j["chi_square_pass"] = chi_square_pass;
    j["min_position_p"] = min_position_p;
    j["pass"] = pass();
    return j;
  }
};

namespace detail {

inline double chi_square_uniform(const std::vector<std::uint64_t>& counts, std::uint64_t total) {
  const double expected = static_cast<double>(total) / static_cast<double>(counts.size());
  double x = 0;
  for (auto c : counts) {
    const double d = static_cast<double>(c) - expected;
    x += d * d / expected;
  }
  return x;
}

inline double chi_square_p(double x, double dof) {
  boost::math::chi_squared dist(dof);
  return boost::math::cdf(boost::math::complement(dist, x));
}

}  // namespace detail

/// Monobit and byte-histogram statistics over a set of keys. A proxy check,
/// not an indistinguishability proof.
inline RandomnessReport key_randomness(const std::vector<Block32>& keys) {
  RandomnessReport r;
  r.keys = keys.size();
  if (keys.empty()) return r;
  std::vector<std::uint64_t> hist(256, 0);
  std::vector<std::vector<std::uint64_t>> per_position(32, std::vector<std::uint64_t>(256, 0));
  std::map<Block32, int> distinct;
  for (const auto& k : keys) {
    distinct.emplace(k, 0);
    for (std::size_t i = 0; i < k.size(); ++i) {
      r.ones += static_cast<std::uint64_t>(__builtin_popcount(k[i]));
      ++hist[k[i]];
      ++per_position[i][k[i]];
    }
  }
  r.distinct_keys = distinct.size();
  r.bits = 256ull * keys.size();
  const double n = static_cast<double>(r.bits);
  r.monobit_fraction = static_cast<double>(r.ones) / n;
  r.monobit_z = (static_cast<double>(r.ones) - n / 2.0) / std::sqrt(n / 4.0);
  r.monobit_pass = std::abs(r.monobit_z) <= 3.0;
  const std::uint64_t total_bytes = 32ull * keys.size();
  r.chi_square = detail::chi_square_uniform(hist, total_bytes);
  r.chi_square_p = detail::chi_square_p(r.chi_square, 255.0);
  r.chi_square_pass = r.chi_square_p > 0.001;
  r.min_position_p = 1.0;
  for (const auto& h : per_position) {
    r.min_position_p = std::min(r.min_position_p,
                                detail::chi_square_p(detail::chi_square_uniform(h, keys.size()), 255.0));
  }
  return r;
}

/// K' of `sessions` honest noise-free sessions, as agreed by both sides.
inline std::vector<Block32> collect_session_keys(std::uint64_t sessions, std::uint64_t seed,
                                                 std::size_t meters = 1,
                                                 PufCalibration cal = {}) {
  netlab::ScenarioConfig sc;
  sc.meters = meters;
  sc.sessions = sessions;
  sc.seed = seed;
  sc.calibration = cal;
  sc.puf_noise = false;
  sc.audit = true;
  sc.keep_transcripts = true;
  const auto report = netlab::run_scenario(sc, {});
  std::vector<Block32> keys;
  keys.reserve(report.transcripts.size());
  for (const auto& t : report.transcripts) {
    if (t.accepted && t.secrets) keys.push_back(t.secrets->next_key);
  }
  return keys;
}

}  // namespace ocec::analytics

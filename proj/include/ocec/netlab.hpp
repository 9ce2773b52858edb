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

// Simulated SM <-> NG channel with a scripted adversary.
//
// A scenario registers m meters with one gateway, then runs sessions round
// robin over the meters. Every packet put on the wire is recorded. Script
// actions match packets by message type, direction and session, and either
// let them through or interfere:
//
//   drop       the packet never arrives
//   duplicate  the packet arrives, then a copy arrives
//   replay     a previously recorded packet arrives instead
//   tamper     the packet arrives with one byte XORed
//   inject     raw bytes arrive first, then the genuine packet
//
// Session-level actions (leak_ephemerals, capture_sm) run after the matched
// session ends. Everything is driven from one seed.

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ocec/protocol.hpp"

namespace ocec::netlab {

enum class ActionKind { deliver, drop, duplicate, replay, tamper, inject, leak_ephemerals, capture_sm };
enum class Direction { sm_to_ng, ng_to_sm };

inline const char* to_string(ActionKind k) {
  switch (k) {
    case ActionKind::deliver: return "deliver";
    case ActionKind::drop: return "drop";
    case ActionKind::duplicate: return "duplicate";
    case ActionKind::replay: return "replay";
    case ActionKind::tamper: return "tamper";
    case ActionKind::inject: return "inject";
    case ActionKind::leak_ephemerals: return "leak_ephemerals";
    case ActionKind::capture_sm: return "capture_sm";
  }
  return "?";
}

inline const char* to_string(Direction d) {
  return d == Direction::sm_to_ng ? "sm_to_ng" : "ng_to_sm";
}

/// Which packets (or sessions) an action applies to.
struct When {
  int msg = 0;  // 0 = any, else 1..3
  std::vector<std::uint64_t> sessions;  // explicit list; empty = use every/offset
  std::uint64_t every = 1;
  std::uint64_t offset = 0;
  std::optional<std::size_t> meter;

  bool matches_session(std::uint64_t session, std::size_t meter_index) const {
    if (meter && *meter != meter_index) return false;
    if (!sessions.empty()) {
      return std::find(sessions.begin(), sessions.end(), session) != sessions.end();
    }
    return session % every == offset;
  }
};

struct AdversaryAction {
  ActionKind kind = ActionKind::deliver;
  Direction target = Direction::sm_to_ng;
  When when;
  std::optional<std::uint64_t> stored_index;  // replay: absolute packet index; unset = previous same-type packet
  std::optional<std::size_t> byte_offset;    // tamper: unset = random
  std::optional<std::uint8_t> xor_mask;      // tamper: unset = random non-zero
  Bytes raw;                                 // inject: unset = random bytes
  std::size_t random_len = 0;                // inject: length of random bytes (0 = packet size)
  std::size_t forge_attempts = 1;            // leak_ephemerals: forgeries per leaked session
};

struct TemperatureSchedule {
  enum class Mode { fixed, cycle, uniform } mode = Mode::fixed;
  std::vector<double> values{25.0};
  double lo = 0.0;
  double hi = 80.0;
};

struct ScenarioConfig {
  std::size_t meters = 1;
  std::uint64_t sessions = 1;
  std::uint64_t seed = 1;
  PufCalibration calibration{};
  bool puf_noise = true;
  bool recovery_mode = false;  // extension, both sides
  TemperatureSchedule temps{};
  bool audit = false;          // keep per-session secrets in transcripts
  bool keep_transcripts = false;
};

struct Packet {
  std::uint64_t index = 0;
  std::uint64_t session = 0;
  std::size_t meter = 0;
  int msg = 0;
  Direction direction = Direction::sm_to_ng;
  bool adversarial = false;
  Bytes bytes;
};

struct SessionTranscript {
  std::uint64_t session = 0;
  std::size_t meter = 0;
  Bytes msg1, msg2, msg3;
  std::optional<SessionSecrets> secrets;  // audit mode only
  bool accepted = false;
  std::string reason;  // rejection reason when not accepted
};

struct AttackStats {
  std::uint64_t launched = 0;
  std::uint64_t succeeded = 0;
  std::map<std::string, std::uint64_t> outcomes;
};

struct LeakStats {
  std::uint64_t sessions = 0;
  std::uint64_t right_key_matches = 0;      // right(E_NG) ^ r_NG == right(K)
  std::uint64_t hashed_key_half_matches = 0; // left(E) ^ r_sm == left(h(K))
  std::uint64_t next_key_guesses = 0;
  std::uint64_t next_key_hits = 0;
  std::uint64_t forgeries = 0;
  std::uint64_t forgeries_accepted = 0;
};

struct CaptureStats {
  std::uint64_t captures = 0;
  std::uint64_t image_size_ok = 0;   // image is exactly the expected ID bytes
  std::uint64_t secret_hits = 0;     // recorded K / C / R values found in an image
  std::uint64_t secrets_scanned = 0;
  std::uint64_t id_matches_next_msg1 = 0;
  std::uint64_t id_checks = 0;
};

struct ScenarioReport {
  std::uint64_t sessions_attempted = 0;
  std::uint64_t sessions_accepted = 0;
  std::uint64_t key_agreements = 0;
  std::uint64_t attacks_launched = 0;
  std::uint64_t attacks_succeeded = 0;
  std::map<std::string, AttackStats> attacks;
  std::map<std::string, std::uint64_t> failures;  // reason -> honest-session count
  std::uint64_t bytes_msg1 = 0, bytes_msg2 = 0, bytes_msg3 = 0;
  OpCounters sm_ops{};
  std::map<std::string, std::uint64_t> sm_op_profiles;  // "hash/prng/puf" -> sessions
  std::uint64_t dos_packets = 0;       // adversarial Msg2 processed by a meter in session
  std::uint64_t dos_cost_exact = 0;    // ... that cost exactly 1 PUF + 2 hashes
  LeakStats leak;
  CaptureStats capture;
  std::vector<std::uint64_t> accepted_per_meter;
  std::vector<std::uint64_t> trailing_failures_per_meter;
  std::vector<Packet> packets;                 // only with keep_transcripts
  std::vector<SessionTranscript> transcripts;  // only with keep_transcripts
  bool recovery_extension = false;

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["sessions_attempted"] = sessions_attempted;
    j["sessions_accepted"] = sessions_accepted;
    j["key_agreements"] = key_agreements;
    j["attacks_launched"] = attacks_launched;
    j["attacks_succeeded"] = attacks_succeeded;
    nlohmann::ordered_json a = nlohmann::ordered_json::object();
    for (const auto& [name, s] : attacks) {
      a[name] = {{"launched", s.launched}, {"succeeded", s.succeeded}, {"outcomes", s.outcomes}};
    }
    j["attacks"] = a;
    j["failures"] = failures;
    j["bytes"] = {{"msg1", bytes_msg1}, {"msg2", bytes_msg2}, {"msg3", bytes_msg3}};
    j["sm_ops"] = {{"hash", sm_ops.hash}, {"prng", sm_ops.prng}, {"puf", sm_ops.puf},
                   {"nonce", sm_ops.nonce}};
    j["sm_op_profiles"] = sm_op_profiles;
    j["dos"] = {{"packets", dos_packets}, {"cost_exact", dos_cost_exact}};
    j["leak"] = {{"sessions", leak.sessions},
                 {"right_key_matches", leak.right_key_matches},
                 {"hashed_key_half_matches", leak.hashed_key_half_matches},
                 {"next_key_guesses", leak.next_key_guesses},
                 {"next_key_hits", leak.next_key_hits},
                 {"forgeries", leak.forgeries},
                 {"forgeries_accepted", leak.forgeries_accepted}};
    j["capture"] = {{"captures", capture.captures},
                    {"image_size_ok", capture.image_size_ok},
                    {"secret_hits", capture.secret_hits},
                    {"secrets_scanned", capture.secrets_scanned},
                    {"id_matches_next_msg1", capture.id_matches_next_msg1},
                    {"id_checks", capture.id_checks}};
    j["accepted_per_meter"] = accepted_per_meter;
    j["trailing_failures_per_meter"] = trailing_failures_per_meter;
    if (recovery_extension) j["extension"] = "recovery_mode (not part of the original protocol)";
    return j;
  }
};

// ---------------------------------------------------------------------------
// Script parsing

namespace detail {

inline ActionKind parse_kind(const std::string& s) {
  static const std::map<std::string, ActionKind> kinds = {
      {"deliver", ActionKind::deliver}, {"drop", ActionKind::drop},
      {"duplicate", ActionKind::duplicate}, {"replay", ActionKind::replay},
      {"tamper", ActionKind::tamper}, {"inject", ActionKind::inject},
      {"leak_ephemerals", ActionKind::leak_ephemerals}, {"capture_sm", ActionKind::capture_sm}};
  auto it = kinds.find(s);
  if (it == kinds.end()) throw Error(Errc::malformed_script, "unknown action kind '" + s + "'");
  return it->second;
}

inline std::size_t packet_size(int msg) {
  switch (msg) {
    case 1: return FieldSizes::kMsg1;
    case 2: return FieldSizes::kMsg2;
    case 3: return FieldSizes::kMsg3;
    default: return FieldSizes::kMsg1;  // smallest, for "any"
  }
}

inline bool is_packet_action(ActionKind k) {
  return k != ActionKind::leak_ephemerals && k != ActionKind::capture_sm;
}

}  // namespace detail

/// Rejects scripts that could not run as written.
inline void validate(const std::vector<AdversaryAction>& script) {
  for (std::size_t i = 0; i < script.size(); ++i) {
    const auto& a = script[i];
    auto bad = [&](const std::string& why) {
      return Error(Errc::malformed_script, "action " + std::to_string(i) + ": " + why);
    };
    if (a.when.msg < 0 || a.when.msg > 3) throw bad("msg must be 0..3");
    if (a.when.every == 0) throw bad("every must be >= 1");
    if (a.when.sessions.empty() && a.when.offset >= a.when.every) throw bad("offset must be < every");
    if (!detail::is_packet_action(a.kind)) {
      if (a.kind == ActionKind::leak_ephemerals && a.forge_attempts == 0) {
        throw bad("forge_attempts must be >= 1");
      }
      continue;
    }
    if (a.when.msg != 0) {
      const Direction natural = a.when.msg == 2 ? Direction::ng_to_sm : Direction::sm_to_ng;
      if (a.target != natural) throw bad("target direction does not carry that message");
    }
    if (a.kind == ActionKind::tamper) {
      if (a.byte_offset && *a.byte_offset >= detail::packet_size(a.when.msg)) {
        throw bad("tamper offset outside packet");
      }
      if (a.xor_mask && *a.xor_mask == 0) throw bad("tamper mask must be non-zero");
    }
    if (a.kind == ActionKind::replay && a.when.msg == 0 && !a.stored_index) {
      throw bad("replay of 'previous' packet needs a message type");
    }
  }
}

inline std::vector<AdversaryAction> parse_script(const nlohmann::json& j) {
  const nlohmann::json* list = &j;
  if (j.is_object()) {
    if (!j.contains("actions")) throw Error(Errc::malformed_script, "missing 'actions'");
    list = &j.at("actions");
  }
  if (!list->is_array()) throw Error(Errc::malformed_script, "'actions' must be an array");
  std::vector<AdversaryAction> out;
  try {
    for (const auto& item : *list) {
      AdversaryAction a;
      a.kind = detail::parse_kind(item.at("kind").get<std::string>());
      if (item.contains("when")) {
        const auto& w = item.at("when");
        if (w.contains("msg")) a.when.msg = w.at("msg").get<int>();
        if (w.contains("sessions")) a.when.sessions = w.at("sessions").get<std::vector<std::uint64_t>>();
        if (w.contains("every")) a.when.every = w.at("every").get<std::uint64_t>();
        if (w.contains("offset")) a.when.offset = w.at("offset").get<std::uint64_t>();
        if (w.contains("meter")) a.when.meter = w.at("meter").get<std::size_t>();
      }
      if (item.contains("target")) {
        const auto t = item.at("target").get<std::string>();
        if (t == "sm_to_ng") a.target = Direction::sm_to_ng;
        else if (t == "ng_to_sm") a.target = Direction::ng_to_sm;
        else throw Error(Errc::malformed_script, "unknown target '" + t + "'");
      } else if (a.when.msg == 2) {
        a.target = Direction::ng_to_sm;
      }
      if (item.contains("stored_index")) {
        const auto& s = item.at("stored_index");
        if (!s.is_number_integer() || s.get<std::int64_t>() < 0) {
          throw Error(Errc::malformed_script, "stored_index must be a non-negative integer");
        }
        a.stored_index = s.get<std::uint64_t>();
      }
      if (item.contains("byte_offset") && item.at("byte_offset") != "random") {
        const auto& s = item.at("byte_offset");
        if (!s.is_number_integer() || s.get<std::int64_t>() < 0) {
          throw Error(Errc::malformed_script, "byte_offset must be a non-negative integer");
        }
        a.byte_offset = s.get<std::size_t>();
      }
      if (item.contains("xor_mask") && item.at("xor_mask") != "random") {
        const auto m = item.at("xor_mask").get<int>();
        if (m < 0 || m > 255) throw Error(Errc::malformed_script, "xor_mask must be a byte");
        a.xor_mask = static_cast<std::uint8_t>(m);
      }
      if (item.contains("raw_hex")) a.raw = from_hex(item.at("raw_hex").get<std::string>());
      if (item.contains("random_len")) a.random_len = item.at("random_len").get<std::size_t>();
      if (item.contains("forge_attempts")) a.forge_attempts = item.at("forge_attempts").get<std::size_t>();
      out.push_back(std::move(a));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed_script, e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::malformed_script) throw;
    throw Error(Errc::malformed_script, e.what());
  }
  validate(out);
  return out;
}

/// Optional "scenario" block of a script file; fields override `base`.
inline ScenarioConfig parse_scenario(const nlohmann::json& j, ScenarioConfig base) {
  if (!j.is_object() || !j.contains("scenario")) return base;
  const auto& s = j.at("scenario");
  try {
    if (s.contains("meters")) base.meters = s.at("meters").get<std::size_t>();
    if (s.contains("sessions")) base.sessions = s.at("sessions").get<std::uint64_t>();
    if (s.contains("seed")) base.seed = s.at("seed").get<std::uint64_t>();
    if (s.contains("puf_noise")) base.puf_noise = s.at("puf_noise").get<bool>();
    if (s.contains("recovery_mode")) base.recovery_mode = s.at("recovery_mode").get<bool>();
    if (s.contains("audit")) base.audit = s.at("audit").get<bool>();
    if (s.contains("temps")) {
      const auto& t = s.at("temps");
      const auto mode = t.value("mode", std::string("fixed"));
      if (mode == "fixed") {
        base.temps.mode = TemperatureSchedule::Mode::fixed;
        base.temps.values = {t.value("value", 25.0)};
      } else if (mode == "cycle") {
        base.temps.mode = TemperatureSchedule::Mode::cycle;
        base.temps.values = t.at("values").get<std::vector<double>>();
        if (base.temps.values.empty()) throw Error(Errc::malformed_script, "empty temperature cycle");
      } else if (mode == "uniform") {
        base.temps.mode = TemperatureSchedule::Mode::uniform;
        base.temps.lo = t.at("lo").get<double>();
        base.temps.hi = t.at("hi").get<double>();
      } else {
        throw Error(Errc::malformed_script, "unknown temperature mode '" + mode + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed_script, e.what());
  }
  return base;
}

// ---------------------------------------------------------------------------
// Probes usable outside a scenario

struct DosReport {
  std::uint64_t packets = 0;
  std::uint64_t accepted = 0;
  std::uint64_t puf_total = 0;
  std::uint64_t hash_total = 0;
  std::uint64_t exact_cost = 0;  // packets that cost exactly 1 PUF + 2 hashes
};

/// Feeds each bogus Msg2 to the meter while it waits for the gateway. The
/// meter opens a fresh session per packet, as it would after each abort.
inline DosReport dos_probe(SmDevice& sm, const std::vector<Bytes>& bogus) {
  DosReport r;
  const Block16 report{};
  for (const auto& packet : bogus) {
    ++r.packets;
    sm.start();
    const OpCounters before = sm.counters();
    bool accepted = false;
    try {
      accepted = sm.on_msg2(decode_msg2(packet), report).ok();
    } catch (const Error& e) {
      if (e.code() != Errc::bad_length) throw;
      sm.on_timeout();
    }
    const OpCounters after = sm.counters();
    const std::uint64_t puf = after.puf - before.puf;
    const std::uint64_t hash = after.hash - before.hash;
    r.puf_total += puf;
    r.hash_total += hash;
    if (accepted) ++r.accepted;
    if (puf == 1 && hash == 2) ++r.exact_cost;
  }
  return r;
}

/// `count` uniformly random Msg2-sized packets {X, Y, Z}.
inline DosReport dos_probe(SmDevice& sm, std::uint64_t count, std::uint64_t seed) {
  Prng rng(seed);
  std::vector<Bytes> bogus;
  bogus.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) bogus.push_back(rng.bytes(FieldSizes::kMsg2));
  return dos_probe(sm, bogus);
}

/// The meter's nonvolatile memory as a physical attacker would read it.
inline Bytes capture_sm(const SmDevice& sm) { return sm.memory_dump(); }

/// Number of `secrets` found verbatim inside `image`.
inline std::uint64_t scan_for_secrets(std::span<const std::uint8_t> image,
                                      const std::vector<Bytes>& secrets) {
  std::uint64_t hits = 0;
  for (const auto& s : secrets) hits += contains_bytes(image, s) ? 1 : 0;
  return hits;
}

/// What an adversary gets out of one transcript plus leaked r_NG and r_sm.
struct LeakFindings {
  Block16 key_right{};        // right(E_NG) ^ r_NG
  Block16 hashed_key_left{};  // left(E) ^ r_sm
};

inline LeakFindings analyse_leak(const Msg2& msg2, const Msg3& msg3, const Block16& r_ng,
                                 const Block16& r_sm) {
  return LeakFindings{right_half(msg2.e_ng) ^ r_ng, left_half(msg3.e) ^ r_sm};
}

/// Msg3 an adversary builds for the live session (`live_id`, `live`) if it
/// believes the session key is `key_guess`. r_NG is not leaked for that
/// session, so it takes the value the guess decrypts from the live Msg2.
inline Msg3 forge_msg3(const Block32& live_id, const Msg2& live, const Block32& key_guess,
                       const Block16& r_sm, const Block16& report, const Block32& next_key) {
  const Block16 r_ng = right_half(live.e_ng ^ key_guess);
  const Block32 next_id = hash_fields(live_id, key_guess, r_sm);
  const Block32 next_c = hash_fields(next_id, r_ng);
  Msg3 m;
  m.f = next_key ^ hash_fields(key_guess, r_sm);
  m.e = concat(r_sm, r_sm ^ r_ng ^ report) ^ hash_fields(key_guess);
  m.v = hash_fields(next_key, next_c, report, next_id, r_sm);
  return m;
}

// ---------------------------------------------------------------------------
// Scenario runner

class Lab {
 public:
  /// Fresh fleet: one gateway and config.meters meters, all registered here.
  Lab(const ScenarioConfig& config, std::vector<AdversaryAction> script)
      : Lab(config, std::move(script),
            std::make_unique<NgState>(mix_seed(config.seed, 3), NgOptions{config.recovery_mode}),
            {}) {}

  /// Existing fleet. Unregistered meters are registered with `ng` first.
  Lab(const ScenarioConfig& config, std::vector<AdversaryAction> script,
      std::unique_ptr<NgState> ng, std::vector<SmDevice> meters)
      : config_(config),
        script_(std::move(script)),
        ng_(std::move(ng)),
        meters_(std::move(meters)),
        payload_rng_(mix_seed(config.seed, 4)),
        adversary_rng_(mix_seed(config.seed, 99)),
        temp_rng_(mix_seed(config.seed, 6)) {
    validate(script_);
    if (meters_.empty()) {
      if (config_.meters == 0) throw Error(Errc::structural, "need at least one meter");
      meters_.reserve(config_.meters);
      for (std::size_t j = 0; j < config_.meters; ++j) {
        PufInstance puf(mix_seed(config_.seed, 1000 + j), config_.calibration);
        meters_.emplace_back(std::move(puf), mix_seed(config_.seed, 2000 + j),
                             SmOptions{config_.puf_noise, config_.recovery_mode});
      }
    }
    config_.meters = meters_.size();
    for (std::size_t j = 0; j < meters_.size(); ++j) {
      if (meters_[j].registered()) continue;
      SessionSecrets enroll;
      register_meter(meters_[j], *ng_, &enroll);
      remember_secrets(j, enroll, /*registration=*/true);
    }
    report_.accepted_per_meter.assign(config_.meters, 0);
    report_.trailing_failures_per_meter.assign(config_.meters, 0);
    report_.recovery_extension = config_.recovery_mode;
    capture_pending_.assign(config_.meters, std::nullopt);
  }

  Lab(const Lab&) = delete;
  Lab& operator=(const Lab&) = delete;

  NgState& gateway() { return *ng_; }
  SmDevice& meter(std::size_t j) { return meters_.at(j); }
  std::vector<SmDevice>& meters() { return meters_; }
  std::size_t meter_count() const { return meters_.size(); }

  ScenarioReport run() {
    for (std::uint64_t s = 0; s < config_.sessions; ++s) run_session(s);
    return report_;
  }

  void run_session(std::uint64_t session) {
    const std::size_t j = static_cast<std::size_t>(session % meters_.size());
    SmDevice& sm = meters_[j];
    sm.set_temperature(next_temperature(session));
    ++report_.sessions_attempted;

    SessionTranscript tr;
    tr.session = session;
    tr.meter = j;
    SessionSecrets sm_secrets, ng_secrets;
    const Block16 control = payload_rng_.block<16>();
    const Block16 data_report = payload_rng_.block<16>();

    if (sm.in_session()) sm.on_timeout();
    const Msg1 m1 = sm.start();
    if (capture_pending_[j]) {
      ++report_.capture.id_checks;
      const Bytes& image = *capture_pending_[j];
      if (image.size() >= m1.id.size() && std::equal(m1.id.begin(), m1.id.end(), image.begin())) {
        ++report_.capture.id_matches_next_msg1;
      }
      capture_pending_[j].reset();
    }
    tr.msg1 = encode_msg1(m1);
    report_.bytes_msg1 += tr.msg1.size();

    // Msg1 leg: every Msg1 that reaches the gateway opens a connection.
    std::vector<std::pair<Block32, Msg2>> answers;  // (connection id, Msg2)
    for (const auto& d : deliver(session, j, 1, Direction::sm_to_ng, tr.msg1)) {
      Msg1 got;
      try {
        got = decode_msg1(d.bytes);
      } catch (const Error&) {
        note_attack(d, "bad_length");
        continue;
      }
      auto m2 = ng_->on_msg1(got, control, d.adversarial ? nullptr : &ng_secrets);
      if (d.adversarial) note_attack(d, m2 ? "answered" : "ignored");
      if (m2) answers.emplace_back(got.id, *m2);
    }

    if (answers.empty()) {
      sm.on_timeout();
      finish(tr, sm, j, false, "no_msg2");
      return;
    }

    // An adversary holding a leak from this meter's previous session attacks
    // the context that is now pending at the gateway.
    if (pending_forgeries_.count(j)) {
      for (const auto& [conn, m2] : answers) {
        if (conn == m1.id) {
          try_forgeries(j, m1.id, m2);
          break;
        }
      }
      pending_forgeries_.erase(j);
    }

    // Msg2 leg. The genuine Msg2 is the gateway's answer to the genuine Msg1.
    std::optional<Msg3> genuine_m3;
    Block32 connection = answers.front().first;
    std::string sm_reason = "no_valid_msg2";
    for (const auto& [conn, m2] : answers) {
      const Bytes wire = encode_msg2(m2);
      if (tr.msg2.empty() && conn == m1.id) tr.msg2 = wire;
      report_.bytes_msg2 += wire.size();
      for (const auto& d : deliver(session, j, 2, Direction::ng_to_sm, wire)) {
        Msg2 got;
        try {
          got = decode_msg2(d.bytes);
        } catch (const Error&) {
          if (d.adversarial) note_attack(d, "bad_length");
          continue;
        }
        const bool was_waiting = sm.in_session();
        const OpCounters before = sm.counters();
        SmReply reply = sm.on_msg2(got, data_report, &sm_secrets);
        if (d.adversarial) {
          const OpCounters after = sm.counters();
          if (was_waiting) {
            ++report_.dos_packets;
            if (after.puf - before.puf == 1 && after.hash - before.hash == 2 && !reply.ok()) {
              ++report_.dos_cost_exact;
            }
          }
          note_attack(d, reply.ok() ? "accepted" : to_string(reply.abort), reply.ok());
        } else if (!reply.ok() && !genuine_m3) {
          sm_reason = std::string("sm_") + to_string(reply.abort);
        }
        if (reply.ok() && !genuine_m3) {
          genuine_m3 = reply.msg3;
          connection = conn;
        }
      }
    }

    if (!genuine_m3) {
      if (sm.in_session()) sm.on_timeout();
      record_profile(sm);
      finish(tr, sm, j, false, sm_reason);
      return;
    }
    record_profile(sm);

    // Msg3 leg.
    tr.msg3 = encode_msg3(*genuine_m3);
    report_.bytes_msg3 += tr.msg3.size();
    bool accepted = false;
    std::string reason = "msg3_lost";
    for (const auto& d : deliver(session, j, 3, Direction::sm_to_ng, tr.msg3)) {
      Msg3 got;
      try {
        got = decode_msg3(d.bytes);
      } catch (const Error&) {
        if (d.adversarial) note_attack(d, "bad_length");
        continue;
      }
      NgVerdict v = ng_->on_msg3(connection, got, d.adversarial ? nullptr : &ng_secrets);
      if (d.adversarial) {
        note_attack(d, v.accepted ? "accepted" : to_string(v.reason), v.accepted);
      } else if (v.accepted) {
        accepted = v.report == data_report;
        reason = accepted ? "" : "report_mismatch";
      } else {
        reason = std::string("ng_") + to_string(v.reason);
      }
    }
    if (accepted && ng_secrets.next_key == sm_secrets.next_key) ++report_.key_agreements;

    if (config_.audit || has_session_action(session, j, ActionKind::leak_ephemerals) ||
        has_session_action(session, j, ActionKind::capture_sm)) {
      tr.secrets = sm_secrets;
    }
    remember_secrets(j, sm_secrets, false);
    finish(tr, sm, j, accepted, reason);
  }

 private:
  struct Delivery {
    Bytes bytes;
    bool adversarial = false;
    ActionKind kind = ActionKind::deliver;
  };

  double next_temperature(std::uint64_t session) {
    const auto& t = config_.temps;
    switch (t.mode) {
      case TemperatureSchedule::Mode::fixed: return t.values.front();
      case TemperatureSchedule::Mode::cycle: return t.values[session % t.values.size()];
      case TemperatureSchedule::Mode::uniform: return t.lo + (t.hi - t.lo) * temp_rng_.uniform();
    }
    return t.values.front();
  }

  bool has_session_action(std::uint64_t session, std::size_t meter, ActionKind kind) const {
    return std::any_of(script_.begin(), script_.end(), [&](const AdversaryAction& a) {
      return a.kind == kind && a.when.matches_session(session, meter);
    });
  }

  const AdversaryAction* match(std::uint64_t session, std::size_t meter, int msg,
                               Direction dir) const {
    for (const auto& a : script_) {
      if (!detail::is_packet_action(a.kind)) continue;
      if (a.when.msg != 0 && a.when.msg != msg) continue;
      if (a.target != dir) continue;
      if (!a.when.matches_session(session, meter)) continue;
      return &a;
    }
    return nullptr;
  }

  Packet& record(std::uint64_t session, std::size_t meter, int msg, Direction dir,
                 const Bytes& bytes, bool adversarial) {
    Packet p{next_index_++, session, meter, msg, dir, adversarial, bytes};
    history_.push_back(std::move(p));
    if (config_.keep_transcripts) report_.packets.push_back(history_.back());
    return history_.back();
  }

  std::vector<Delivery> deliver(std::uint64_t session, std::size_t meter, int msg, Direction dir,
                                const Bytes& genuine) {
    const Packet& sent = record(session, meter, msg, dir, genuine, false);
    const std::uint64_t sent_index = sent.index;
    const AdversaryAction* a = match(session, meter, msg, dir);
    if (!a || a->kind == ActionKind::deliver) return {Delivery{genuine, false, ActionKind::deliver}};

    auto launch = [&](Bytes bytes) {
      ++report_.attacks_launched;
      ++report_.attacks[to_string(a->kind)].launched;
      record(session, meter, msg, dir, bytes, true);
      return Delivery{std::move(bytes), true, a->kind};
    };

    switch (a->kind) {
      case ActionKind::drop:
        ++report_.attacks_launched;
        ++report_.attacks["drop"].launched;
        return {};
      case ActionKind::duplicate:
        return {Delivery{genuine, false, ActionKind::deliver}, launch(genuine)};
      case ActionKind::replay: {
        const Packet* source = nullptr;
        if (a->stored_index) {
          if (*a->stored_index >= sent_index) {
            throw Error(Errc::malformed_script, "replay index " + std::to_string(*a->stored_index) +
                                                    " does not refer to an earlier packet");
          }
          source = &history_.at(*a->stored_index);
        } else {
          source = previous_packet(session, meter, msg);
        }
        if (!source) return {Delivery{genuine, false, ActionKind::deliver}};
        return {launch(source->bytes)};
      }
      case ActionKind::tamper: {
        Bytes t = genuine;
        const std::size_t off = a->byte_offset ? *a->byte_offset
                                               : static_cast<std::size_t>(adversary_rng_.next_u64() % t.size());
        std::uint8_t mask = a->xor_mask.value_or(0);
        while (mask == 0) mask = static_cast<std::uint8_t>(adversary_rng_.next_u64());
        if (off >= t.size()) throw Error(Errc::malformed_script, "tamper offset outside packet");
        t[off] ^= mask;
        return {launch(std::move(t))};
      }
      case ActionKind::inject: {
        Bytes raw = a->raw;
        if (raw.empty()) {
          const std::size_t len = a->random_len ? a->random_len : genuine.size();
          raw.resize(len);
          for (auto& b : raw) b = static_cast<std::uint8_t>(adversary_rng_.next_u64());
        }
        return {launch(std::move(raw)), Delivery{genuine, false, ActionKind::deliver}};
      }
      default:
        return {Delivery{genuine, false, ActionKind::deliver}};
    }
  }

  // Most recent genuine packet of this type from an earlier session,
  // preferring the same meter.
  const Packet* previous_packet(std::uint64_t session, std::size_t meter, int msg) const {
    const Packet* any = nullptr;
    for (auto it = history_.rbegin(); it != history_.rend(); ++it) {
      if (it->adversarial || it->msg != msg || it->session >= session) continue;
      if (it->meter == meter) return &*it;
      if (!any) any = &*it;
    }
    return any;
  }

  void note_attack(const Delivery& d, const std::string& outcome, bool success = false) {
    auto& stats = report_.attacks[to_string(d.kind)];
    ++stats.outcomes[outcome];
    if (success) {
      ++stats.succeeded;
      ++report_.attacks_succeeded;
    }
  }

  void record_profile(const SmDevice& sm) {
    const OpCounters& c = sm.counters();
    report_.sm_ops += c;
    const std::string key = std::to_string(c.hash) + "/" + std::to_string(c.prng) + "/" +
                            std::to_string(c.puf);
    ++report_.sm_op_profiles[key];
  }

  void remember_secrets(std::size_t meter, const SessionSecrets& s, bool registration) {
    (void)meter;
    auto push = [&](auto const& block) { secrets_.emplace_back(block.begin(), block.end()); };
    push(s.key);
    push(s.challenge);
    push(s.response);
    if (!registration) {
      push(s.next_key);
      push(s.next_challenge);
      push(s.next_response);
    }
  }

  void session_actions(std::uint64_t session, std::size_t j, const SessionTranscript& tr) {
    for (const auto& a : script_) {
      if (!a.when.matches_session(session, j)) continue;
      if (a.kind == ActionKind::capture_sm) run_capture(j);
      if (a.kind == ActionKind::leak_ephemerals) run_leak(session, j, tr, a);
    }
  }

  void run_capture(std::size_t j) {
    ++report_.attacks_launched;
    auto& stats = report_.attacks["capture_sm"];
    ++stats.launched;
    const Bytes image = capture_sm(meters_[j]);
    ++report_.capture.captures;
    const std::size_t expected = config_.recovery_mode ? 2 * FieldSizes::kId : FieldSizes::kId;
    const bool size_ok = image.size() == expected ||
                         (config_.recovery_mode && image.size() == FieldSizes::kId);
    if (size_ok) ++report_.capture.image_size_ok;
    const std::uint64_t hits = scan_for_secrets(image, secrets_);
    report_.capture.secrets_scanned += secrets_.size();
    report_.capture.secret_hits += hits;
    const bool leaked = hits > 0 || !size_ok;
    ++stats.outcomes[leaked ? "secret_found" : "id_only"];
    if (leaked) {
      ++stats.succeeded;
      ++report_.attacks_succeeded;
    }
    capture_pending_[j] = image;
  }

  // Leaks r_NG and r_sm of the session just finished and checks what they buy
  // the adversary. The forgery half of the check waits for the meter's next
  // session, when a fresh pending context exists at the gateway.
  void run_leak(std::uint64_t session, std::size_t j, const SessionTranscript& tr,
                const AdversaryAction& a) {
    (void)session;
    if (tr.msg2.empty() || tr.msg3.empty() || !tr.secrets) return;
    ++report_.attacks_launched;
    auto& stats = report_.attacks["leak_ephemerals"];
    ++stats.launched;
    ++report_.leak.sessions;

    const SessionSecrets& s = *tr.secrets;
    const Msg2 m2 = decode_msg2(tr.msg2);
    const Msg3 m3 = decode_msg3(tr.msg3);
    const LeakFindings f = analyse_leak(m2, m3, s.r_ng, s.r_sm);
    if (f.key_right == right_half(s.key)) ++report_.leak.right_key_matches;
    if (f.hashed_key_left == left_half(hash_fields(s.key))) ++report_.leak.hashed_key_half_matches;

    // Guess K' from F: the adversary has right(K) and must guess left(K).
    std::uint64_t hits = 0;
    std::vector<Block32> guesses;
    for (std::size_t g = 0; g < a.forge_attempts; ++g) {
      Block32 k_guess = concat(adversary_rng_block(), f.key_right);
      const Block32 next_guess = m3.f ^ hash_fields(k_guess, s.r_sm);
      ++report_.leak.next_key_guesses;
      if (next_guess == s.next_key) ++hits;
      guesses.push_back(next_guess);
    }
    report_.leak.next_key_hits += hits;
    pending_forgeries_[j] = PendingForgery{std::move(guesses), f};
    const bool broke = hits > 0;
    ++stats.outcomes[broke ? "next_key_predicted" : "contained"];
    if (broke) {
      ++stats.succeeded;
      ++report_.attacks_succeeded;
    }
  }

  Block16 adversary_rng_block() {
    Block16 b{};
    for (std::size_t i = 0; i < b.size(); i += 8) {
      const std::uint64_t w = adversary_rng_.next_u64();
      for (std::size_t k = 0; k < 8; ++k) b[i + k] = static_cast<std::uint8_t>(w >> (8 * k));
    }
    return b;
  }

  struct PendingForgery {
    std::vector<Block32> next_key_guesses;
    LeakFindings findings;
  };

  // Forges Msg3 for the session now pending at the gateway, one per guess of
  // its key, and asks the gateway whether any would verify.
  void try_forgeries(std::size_t j, const Block32& live_id, const Msg2& live) {
    auto it = pending_forgeries_.find(j);
    if (it == pending_forgeries_.end()) return;
    auto& stats = report_.attacks["forge_after_leak"];
    for (const Block32& k_guess : it->second.next_key_guesses) {
      const Block16 r_sm = adversary_rng_block();
      const Block16 report = adversary_rng_block();
      const Block32 next_next = concat(adversary_rng_block(), adversary_rng_block());
      const Msg3 forged = forge_msg3(live_id, live, k_guess, r_sm, report, next_next);
      ++report_.attacks_launched;
      ++stats.launched;
      ++report_.leak.forgeries;
      const bool ok = ng_->probe_msg3(live_id, forged);
      ++stats.outcomes[ok ? "accepted" : "verifier_mismatch"];
      if (ok) {
        ++stats.succeeded;
        ++report_.attacks_succeeded;
        ++report_.leak.forgeries_accepted;
      }
    }
  }

  void finish(SessionTranscript& tr, SmDevice& sm, std::size_t j, bool accepted,
              const std::string& reason) {
    (void)sm;
    tr.accepted = accepted;
    tr.reason = reason;
    if (accepted) {
      ++report_.sessions_accepted;
      ++report_.accepted_per_meter[j];
      report_.trailing_failures_per_meter[j] = 0;
    } else {
      ++report_.failures[reason.empty() ? "unknown" : reason];
      ++report_.trailing_failures_per_meter[j];
    }
    session_actions(tr.session, j, tr);
    if (config_.keep_transcripts) {
      if (!config_.audit) tr.secrets.reset();
      report_.transcripts.push_back(tr);
    }
  }

  ScenarioConfig config_;
  std::vector<AdversaryAction> script_;
  std::unique_ptr<NgState> ng_;
  std::vector<SmDevice> meters_;
  Prng payload_rng_;
  GaussianNoise adversary_rng_;
  GaussianNoise temp_rng_;
  std::vector<Packet> history_;
  std::uint64_t next_index_ = 0;
  ScenarioReport report_;
  std::vector<Bytes> secrets_;
  std::vector<std::optional<Bytes>> capture_pending_;
  std::map<std::size_t, PendingForgery> pending_forgeries_;
};

inline ScenarioReport run_scenario(const ScenarioConfig& config,
                                   const std::vector<AdversaryAction>& script) {
  Lab lab(config, script);
  return lab.run();
}

}  // namespace ocec::netlab

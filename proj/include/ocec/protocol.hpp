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

// Meter (SM) and gateway (NG) state machines.
//
// Registration runs over a trusted in-process call: NG draws ID0 and C0, the
// meter answers K0 = h(OCEC(C0)) and keeps only ID0.
//
// Session i:
//   SM -> NG  Msg1 {ID, N}
//   NG -> SM  Msg2 {C, V_NG, E_NG}
//               E_NG = ((M ^ r_NG) || r_NG) ^ K
//               V_NG = h(K, C, M, r_NG, N)
//   SM -> NG  Msg3 {F, E, V}
//               ID' = h(ID, K, r_sm)      C' = h(ID', r_NG)
//               K'  = h(OCEC(C'))         F  = K' ^ h(K, r_sm)
//               E   = (r_sm || (r_sm ^ r_NG ^ D)) ^ h(K)
//               V   = h(K', C', D, ID', r_sm)
//
// Msg3 carries no identity; the gateway matches it to the pending context of
// the ID that opened the connection.

#include <openssl/crypto.h>

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <utility>

#include "json.hpp"
#include "ocec/codec.hpp"
#include "ocec/crypto.hpp"
#include "ocec/keystore.hpp"
#include "ocec/puf.hpp"

namespace ocec {

using EventSink = std::function<void(const nlohmann::json&)>;

/// Per-session operation tallies on the meter. `prng` counts only r_sm; the
/// nonce draw is tallied in `nonce`.
struct OpCounters {
  std::uint64_t hash = 0;
  std::uint64_t prng = 0;
  std::uint64_t puf = 0;
  std::uint64_t nonce = 0;

  OpCounters& operator+=(const OpCounters& o) {
    hash += o.hash;
    prng += o.prng;
    puf += o.puf;
    nonce += o.nonce;
    return *this;
  }
  friend bool operator==(const OpCounters&, const OpCounters&) = default;
};

/// Intermediate values of one run, filled only when a caller asks for them.
struct SessionSecrets {
  Block16 r_ng{};
  Block16 r_sm{};
  Block16 control_message{};
  Block16 report{};
  Block32 key{};
  Block32 next_key{};
  Block32 challenge{};
  Block32 next_challenge{};
  Block16 response{};       // packed R
  Block16 next_response{};  // packed R'
};

enum class SmAbort { none, no_session, verifier_mismatch, yield_exhausted };
enum class NgReject { none, no_pending_session, verifier_mismatch };

inline const char* to_string(SmAbort a) {
  switch (a) {
    case SmAbort::none: return "none";
    case SmAbort::no_session: return "no_session";
    case SmAbort::verifier_mismatch: return "verifier_mismatch";
    case SmAbort::yield_exhausted: return "yield_exhausted";
  }
  return "?";
}

inline const char* to_string(NgReject r) {
  switch (r) {
    case NgReject::none: return "none";
    case NgReject::no_pending_session: return "no_pending_session";
    case NgReject::verifier_mismatch: return "verifier_mismatch";
  }
  return "?";
}

struct SmReply {
  std::optional<Msg3> msg3;
  SmAbort abort = SmAbort::none;
  bool ok() const { return msg3.has_value(); }
};

struct NgVerdict {
  bool accepted = false;
  NgReject reason = NgReject::none;
  Block16 report{};
};

namespace detail {

template <std::size_t N>
bool equal_ct(const Block<N>& a, const Block<N>& b) {
  return CRYPTO_memcmp(a.data(), b.data(), N) == 0;
}

inline std::string short_id(const Block32& id) {
  return to_hex(std::span<const std::uint8_t>(id.data(), 8));
}

}  // namespace detail

struct SmOptions {
  bool noise_enabled = true;
  // Extension: keep the previous ID as a fallback so a lost Msg3
  // does not strand the meter.
  bool recovery_mode = false;
};

class SmDevice {
 public:
  SmDevice(PufInstance puf, std::uint64_t seed, SmOptions options = {})
      : puf_(std::move(puf)),
        options_(options),
        prng_(mix_seed(seed, 0)),
        noise_(mix_seed(seed, 1)),
        temp_c_(puf_.calibration().temp_ref_c) {
    if (puf_.calibration().response_len != static_cast<int>(8 * FieldSizes::kResponse)) {
      throw Error(Errc::structural, "protocol needs response_len = 128");
    }
  }

  SmDevice(const SmDevice&) = delete;
  SmDevice& operator=(const SmDevice&) = delete;
  SmDevice(SmDevice&&) = default;
  SmDevice& operator=(SmDevice&&) = default;
  ~SmDevice() { wipe_scratch(); }

  const PufInstance& puf() const { return puf_; }
  const SmOptions& options() const { return options_; }
  void set_temperature(double temp_c) { temp_c_ = temp_c; }
  double temperature() const { return temp_c_; }
  bool registered() const { return id_.has_value(); }
  bool in_session() const { return scratch_.has_value(); }
  const OpCounters& counters() const { return counters_; }
  void set_event_sink(EventSink sink) { sink_ = std::move(sink); }

  const Block32& current_id() const {
    if (!id_) throw Error(Errc::not_found, "meter is not registered");
    return *id_;
  }

  /// Everything held in nonvolatile memory: the current 32-byte ID, plus the
  /// fallback ID when recovery mode is on.
  Bytes memory_dump() const {
    Bytes out;
    if (id_) out.insert(out.end(), id_->begin(), id_->end());
    if (fallback_id_) out.insert(out.end(), fallback_id_->begin(), fallback_id_->end());
    return out;
  }

  /// Registration half run by the meter: K0 = h(OCEC(C0)); C0 and R0 are
  /// dropped, ID0 is kept.
  Digest enroll(const Block32& id, const Challenge& challenge,
                SessionSecrets* audit = nullptr) {
    if (registered()) throw Error(Errc::already_registered, "meter already holds an ID");
    counters_ = {};
    Block16 response = evaluate(challenge);
    Digest key = h(response);
    if (audit) {
      audit->challenge = challenge;
      audit->response = response;
      audit->key = key;
    }
    secure_wipe(response);
    id_ = id;
    emit({{"event", "sm_enrolled"}, {"id", detail::short_id(id)}});
    return key;
  }

  /// Puts a previously enrolled meter back into service with its stored ID.
  void restore(const Block32& id) {
    if (registered()) throw Error(Errc::already_registered, "meter already holds an ID");
    id_ = id;
  }

  Msg1 start() {
    if (!registered()) throw Error(Errc::not_found, "meter is not registered");
    if (in_session()) throw Error(Errc::busy, "session already in progress");
    counters_ = {};
    scratch_.emplace();
    prng_.fill(scratch_->nonce);
    ++counters_.nonce;
    emit({{"event", "sm_start"}, {"id", detail::short_id(*id_)}});
    return Msg1{*id_, scratch_->nonce};
  }

  /// Handles Msg2. On a bad verifier the meter stops after one OCEC run and
  /// two hashes.
  SmReply on_msg2(const Msg2& msg, const Block16& report, SessionSecrets* audit = nullptr) {
    if (!scratch_) return SmReply{std::nullopt, SmAbort::no_session};
    Scratch& s = *scratch_;

    Block16 response{};
    try {
      response = evaluate(msg.challenge);
    } catch (const Error& e) {
      if (e.code() != Errc::yield_exhausted) throw;
      return abort(SmAbort::yield_exhausted);
    }
    s.key = h(response);

    const Block32 plain = msg.e_ng ^ s.key;
    s.r_ng = right_half(plain);
    s.control_message = left_half(plain) ^ s.r_ng;
    if (!detail::equal_ct(h(s.key, msg.challenge, s.control_message, s.r_ng, s.nonce), msg.v_ng)) {
      secure_wipe(response);
      return abort(SmAbort::verifier_mismatch);
    }

    prng_.fill(s.r_sm);
    ++counters_.prng;
    s.next_id = h(*id_, s.key, s.r_sm);
    s.next_challenge = h(s.next_id, s.r_ng);
    Block16 next_response{};
    try {
      next_response = evaluate(s.next_challenge);
    } catch (const Error& e) {
      if (e.code() != Errc::yield_exhausted) throw;
      secure_wipe(response);
      return abort(SmAbort::yield_exhausted);
    }
    s.next_key = h(next_response);

    Msg3 out;
    out.f = s.next_key ^ h(s.key, s.r_sm);
    const Block32 payload = concat(s.r_sm, s.r_sm ^ s.r_ng ^ report);
    out.e = payload ^ h(s.key);
    out.v = h(s.next_key, s.next_challenge, report, s.next_id, s.r_sm);

    if (audit) {
      audit->r_ng = s.r_ng;
      audit->r_sm = s.r_sm;
      audit->control_message = s.control_message;
      audit->report = report;
      audit->key = s.key;
      audit->next_key = s.next_key;
      audit->challenge = msg.challenge;
      audit->next_challenge = s.next_challenge;
      audit->response = response;
      audit->next_response = next_response;
    }
    secure_wipe(response);
    secure_wipe(next_response);

    if (options_.recovery_mode) fallback_id_ = *id_;
    id_ = s.next_id;
    emit({{"event", "sm_commit"}, {"id", detail::short_id(*id_)}});
    wipe_scratch();
    return SmReply{out, SmAbort::none};
  }

  /// No Msg2 arrived for the session in flight. In recovery mode the meter
  /// swaps to its fallback ID for the next attempt.
  void on_timeout() {
    wipe_scratch();
    if (options_.recovery_mode && fallback_id_ && id_) {
      std::swap(*id_, *fallback_id_);
      emit({{"event", "sm_fallback"}, {"id", detail::short_id(*id_)}});
    }
  }

 private:
  struct Scratch {
    Block16 nonce{};
    Block16 r_ng{};
    Block16 control_message{};
    Block16 r_sm{};
    Block32 key{};
    Block32 next_key{};
    Block32 next_id{};
    Block32 next_challenge{};
  };

  Block16 evaluate(const Challenge& challenge) {
    ++counters_.puf;
    OcecResponse r = options_.noise_enabled
                         ? puf_.ocec_response(challenge, temp_c_, noise_)
                         : [&] {
                             NoNoise quiet;
                             return puf_.ocec_response(challenge, temp_c_, quiet);
                           }();
    Bytes packed = r.packed();
    Block16 out = block_from<16>(packed);
    secure_wipe(packed);
    secure_wipe(r.bits);
    return out;
  }

  template <std::size_t... N>
  Digest h(const Block<N>&... fields) {
    ++counters_.hash;
    return hash_fields(fields...);
  }

  SmReply abort(SmAbort reason) {
    emit({{"event", "sm_abort"}, {"reason", to_string(reason)}});
    wipe_scratch();
    return SmReply{std::nullopt, reason};
  }

  void wipe_scratch() {
    if (!scratch_) return;
    secure_wipe(std::span<std::uint8_t>(reinterpret_cast<std::uint8_t*>(&*scratch_),
                                        sizeof(Scratch)));
    scratch_.reset();
  }

  void emit(nlohmann::json event) {
    if (sink_) {
      event["party"] = "sm";
      sink_(event);
    }
  }

  PufInstance puf_;
  SmOptions options_;
  Prng prng_;
  GaussianNoise noise_;
  double temp_c_;
  std::optional<Block32> id_;
  std::optional<Block32> fallback_id_;
  std::optional<Scratch> scratch_;
  OpCounters counters_;
  EventSink sink_;
};

struct NgOptions {
  // Extension: keep the replaced record until the new ID shows up.
  bool recovery_mode = false;
};

class NgState {
 public:
  /// Seeded gateway for reproducible runs.
  NgState(std::uint64_t seed, NgOptions options = {}, Keystore store = {})
      : options_(options), prng_(seed), store_(std::move(store)) {}

  /// Gateway drawing from OS entropy.
  explicit NgState(Keystore store, NgOptions options = {})
      : options_(options), store_(std::move(store)) {}

  NgState(const NgState&) = delete;
  NgState& operator=(const NgState&) = delete;

  void set_event_sink(EventSink sink) {
    std::lock_guard lock(mu_);
    sink_ = std::move(sink);
  }

  std::optional<NgRecord> lookup(const Block32& id) const {
    std::lock_guard lock(mu_);
    return store_.lookup(id);
  }

  bool has_pending(const Block32& id) const {
    std::lock_guard lock(mu_);
    return pending_.count(id) != 0;
  }

  std::size_t pending_count() const {
    std::lock_guard lock(mu_);
    return pending_.size();
  }

  std::vector<NgRecord> records() const {
    std::lock_guard lock(mu_);
    return store_.dump();
  }

  const Keystore& keystore() const { return store_; }

  /// Fresh (ID0, C0) for a meter joining over the trusted channel.
  std::pair<Block32, Challenge> begin_registration() {
    std::lock_guard lock(mu_);
    Block32 id{};
    do {
      prng_.fill(id);
    } while (store_.contains(id) || previous_.count(id) != 0);
    Challenge c{};
    prng_.fill(c);
    return {id, c};
  }

  void complete_registration(const NgRecord& record) {
    std::lock_guard lock(mu_);
    if (store_.contains(record.id)) throw Error(Errc::already_registered, "id already registered");
    store_.insert(record);
    emit({{"event", "ng_registered"}, {"id", detail::short_id(record.id)}});
  }

  /// Handles Msg1; unknown IDs get no answer at all. A second Msg1 for an ID
  /// with a pending context replaces that context.
  std::optional<Msg2> on_msg1(const Msg1& msg, const Block16& control_message,
                              SessionSecrets* audit = nullptr) {
    std::lock_guard lock(mu_);
    Pending p;
    if (auto rec = store_.lookup(msg.id)) {
      p.record = *rec;
      p.owner = rec->id;
      if (options_.recovery_mode) drop_previous_of(rec->id);
    } else if (auto it = previous_.find(msg.id); options_.recovery_mode && it != previous_.end()) {
      p.record = it->second.record;
      p.owner = it->second.owner;
      p.from_previous = true;
    } else {
      emit({{"event", "ng_drop_unknown_id"}, {"id", detail::short_id(msg.id)}});
      return std::nullopt;
    }

    p.nonce = msg.nonce;
    p.control_message = control_message;
    prng_.fill(p.r_ng);

    const Block32& key = p.record.key;
    Msg2 out;
    out.challenge = p.record.challenge;
    out.e_ng = concat(control_message ^ p.r_ng, p.r_ng) ^ key;
    out.v_ng = hash_fields(key, p.record.challenge, control_message, p.r_ng, msg.nonce);

    if (audit) {
      audit->r_ng = p.r_ng;
      audit->control_message = control_message;
      audit->key = key;
      audit->challenge = p.record.challenge;
    }
    if (pending_.count(msg.id)) emit({{"event", "ng_supersede"}, {"id", detail::short_id(msg.id)}});
    pending_[msg.id] = p;
    emit({{"event", "ng_msg2"}, {"id", detail::short_id(msg.id)}});
    return out;
  }

  /// Handles the Msg3 arriving on the connection opened by `session_id`.
  /// The pending context is consumed whatever the outcome.
  NgVerdict on_msg3(const Block32& session_id, const Msg3& msg, SessionSecrets* audit = nullptr) {
    std::lock_guard lock(mu_);
    auto it = pending_.find(session_id);
    if (it == pending_.end()) {
      emit({{"event", "ng_reject"}, {"reason", "no_pending_session"}});
      return NgVerdict{false, NgReject::no_pending_session, {}};
    }
    Pending p = it->second;
    pending_.erase(it);

    const Opened o = open_msg3(p, msg);
    if (!o.valid) {
      emit({{"event", "ng_reject"}, {"reason", "verifier_mismatch"},
            {"id", detail::short_id(session_id)}});
      return NgVerdict{false, NgReject::verifier_mismatch, {}};
    }
    const Block16& r_sm = o.r_sm;
    const Block16& report = o.report;
    const Block32& next_key = o.next_key;
    const Block32& next_id = o.next_id;
    const Block32& next_challenge = o.next_challenge;

    const NgRecord next{next_id, next_challenge, next_key};
    store_.replace(p.owner, next);
    if (p.from_previous) previous_.erase(p.record.id);
    if (options_.recovery_mode) {
      drop_previous_of(p.owner);
      previous_[p.record.id] = PreviousEntry{p.record, next.id};
    }
    if (audit) {
      audit->r_sm = r_sm;
      audit->report = report;
      audit->next_key = next_key;
      audit->next_challenge = next_challenge;
    }
    emit({{"event", "ng_accept"}, {"id", detail::short_id(next.id)}});
    return NgVerdict{true, NgReject::none, report};
  }

  /// Audit probe: would `msg` verify against the pending context of
  /// `session_id`? Leaves all state untouched. Not part of the protocol;
  /// lets the harness count many forgery attempts against one live session.
  bool probe_msg3(const Block32& session_id, const Msg3& msg) const {
    std::lock_guard lock(mu_);
    auto it = pending_.find(session_id);
    return it != pending_.end() && open_msg3(it->second, msg).valid;
  }

 private:
  struct Opened {
    bool valid = false;
    Block16 r_sm{};
    Block16 report{};
    Block32 next_key{};
    Block32 next_id{};
    Block32 next_challenge{};
  };

  struct Pending {
    NgRecord record;
    Block32 owner{};  // id of the live keystore row this session will update
    bool from_previous = false;
    Block16 nonce{};
    Block16 r_ng{};
    Block16 control_message{};
  };

  struct PreviousEntry {
    NgRecord record;
    Block32 owner{};
  };

  static Opened open_msg3(const Pending& p, const Msg3& msg) {
    Opened o;
    const Block32& key = p.record.key;
    const Block32 payload = msg.e ^ hash_fields(key);
    o.r_sm = left_half(payload);
    o.report = right_half(payload) ^ o.r_sm ^ p.r_ng;
    o.next_key = msg.f ^ hash_fields(key, o.r_sm);
    o.next_id = hash_fields(p.record.id, key, o.r_sm);
    o.next_challenge = hash_fields(o.next_id, p.r_ng);
    const Digest v = hash_fields(o.next_key, o.next_challenge, o.report, o.next_id, o.r_sm);
    o.valid = detail::equal_ct(v, msg.v);
    return o;
  }

  void drop_previous_of(const Block32& owner) {
    for (auto it = previous_.begin(); it != previous_.end();) {
      it = (it->second.owner == owner) ? previous_.erase(it) : std::next(it);
    }
  }

  void emit(nlohmann::json event) {
    if (sink_) {
      event["party"] = "ng";
      sink_(event);
    }
  }

  mutable std::mutex mu_;
  NgOptions options_;
  Prng prng_;
  Keystore store_;
  std::map<Block32, Pending> pending_;
  std::map<Block32, PreviousEntry> previous_;  // keyed by the old id
  EventSink sink_;
};

/// Registration over the trusted channel.
inline NgRecord register_meter(SmDevice& sm, NgState& ng, SessionSecrets* audit = nullptr) {
  if (sm.registered()) throw Error(Errc::already_registered, "meter already registered");
  auto [id, challenge] = ng.begin_registration();
  const Digest key = sm.enroll(id, challenge, audit);
  const NgRecord record{id, challenge, key};
  ng.complete_registration(record);
  return record;
}

}  // namespace ocec

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

// ocec-lab: command-line front end.
//
//   ocec-lab register   --keystore ng.jsonl --meters 50
//   ocec-lab run        --keystore ng.jsonl --sessions 1000
//   ocec-lab attack     --script scenarios/replay_msg3.json
//   ocec-lab puf-stats  --out puf.csv
//   ocec-lab bench      --out bench.csv
//   ocec-lab randomness --sessions 10000
//
// Every subcommand takes --seed, --out, --keystore and --config (key=value
// file). The exit code is 0 only when every embedded check passed.
//
// Meters registered with --keystore live in "<keystore>.meters", one JSON
// object per line: the seeds that rebuild the device plus its current ID.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "ocec/analytics.hpp"

namespace {

using namespace ocec;
namespace fs = std::filesystem;

struct Common {
  std::uint64_t seed = 1;
  std::string out = "-";
  std::string keystore;
  std::string config;
};

struct MeterEntry {
  std::uint64_t puf_seed = 0;
  std::uint64_t sm_seed = 0;
  Block32 id{};
  std::uint64_t runs = 0;  // CLI runs the meter took part in; reseeds its PRNG
};

fs::path sidecar_path(const std::string& keystore) { return fs::path(keystore + ".meters"); }

std::vector<MeterEntry> load_meters(const std::string& keystore) {
  std::vector<MeterEntry> out;
  std::ifstream in(sidecar_path(keystore));
  if (!in) return out;
  int lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    try {
      if (j.is_discarded()) throw std::runtime_error("not JSON");
      MeterEntry m;
      m.puf_seed = j.at("puf_seed").get<std::uint64_t>();
      m.sm_seed = j.at("sm_seed").get<std::uint64_t>();
      m.id = block_from_hex<32>(j.at("id").get<std::string>());
      m.runs = j.at("runs").get<std::uint64_t>();
      out.push_back(m);
    } catch (const std::exception& e) {
      throw Error(Errc::keystore_corrupt,
                  sidecar_path(keystore).string() + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void save_meters(const std::string& keystore, const std::vector<MeterEntry>& meters) {
  const fs::path path = sidecar_path(keystore);
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream o(tmp, std::ios::trunc);
    for (const auto& m : meters) {
      nlohmann::ordered_json j;
      j["puf_seed"] = m.puf_seed;
      j["sm_seed"] = m.sm_seed;
      j["id"] = to_hex(m.id);
      j["runs"] = m.runs;
      o << j.dump() << "\n";
    }
    if (!o) throw Error(Errc::io, "cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

class Output {
 public:
  explicit Output(const std::string& path) {
    if (path != "-") {
      file_.open(path, std::ios::trunc);
      if (!file_) throw Error(Errc::io, "cannot write " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

analytics::Config load_config(const Common& c) {
  return c.config.empty() ? analytics::Config{} : analytics::Config::load(c.config);
}

void reject_unused(const analytics::Config& cfg) {
  const auto extra = cfg.unused();
  if (extra.empty()) return;
  std::string list;
  for (const auto& k : extra) list += (list.empty() ? "" : ", ") + k;
  throw Error(Errc::config, "unknown config keys: " + list);
}

netlab::TemperatureSchedule temps_from(const analytics::Config& cfg) {
  netlab::TemperatureSchedule t;
  const std::string mode = cfg.get("temp_mode", "fixed");
  if (mode == "fixed") {
    t.values = {cfg.get_double("temp", 25.0)};
  } else if (mode == "cycle") {
    t.mode = netlab::TemperatureSchedule::Mode::cycle;
    t.values = cfg.get_doubles("temps", {0, 25, 40, 60, 80});
  } else if (mode == "uniform") {
    t.mode = netlab::TemperatureSchedule::Mode::uniform;
    t.lo = cfg.get_double("temp_lo", 0.0);
    t.hi = cfg.get_double("temp_hi", 80.0);
  } else {
    throw Error(Errc::config, "temp_mode must be fixed, cycle or uniform");
  }
  return t;
}

struct Fleet {
  std::unique_ptr<NgState> ng;
  std::vector<SmDevice> meters;
  std::vector<MeterEntry> entries;
};

Fleet load_fleet(const Common& c, const PufCalibration& cal, bool noise, bool recovery) {
  Fleet f;
  f.entries = load_meters(c.keystore);
  if (f.entries.empty()) throw Error(Errc::not_found, "no meters registered for " + c.keystore);
  f.ng = std::make_unique<NgState>(mix_seed(c.seed, 3), NgOptions{recovery}, Keystore::open(c.keystore));
  for (auto& e : f.entries) {
    ++e.runs;
    f.meters.emplace_back(PufInstance(e.puf_seed, cal), mix_seed(e.sm_seed, e.runs),
                          SmOptions{noise, recovery});
    f.meters.back().restore(e.id);
  }
  return f;
}

void store_fleet(const Common& c, Fleet& f) {
  for (std::size_t j = 0; j < f.meters.size(); ++j) f.entries[j].id = f.meters[j].current_id();
  save_meters(c.keystore, f.entries);
}

int cmd_register(const Common& c, std::size_t meters_flag) {
  if (c.keystore.empty()) throw Error(Errc::config, "register needs --keystore");
  const auto cfg = load_config(c);
  const std::size_t count = meters_flag ? meters_flag : cfg.get_u64("meters", 1);
  const PufCalibration cal = cfg.calibration();
  const bool noise = cfg.get_bool("puf_noise", true);
  reject_unused(cfg);

  auto entries = load_meters(c.keystore);
  NgState ng(mix_seed(c.seed, 3), {}, Keystore::open(c.keystore));
  if (ng.records().size() != entries.size()) {
    throw Error(Errc::keystore_corrupt, "keystore and meter file disagree on the fleet size");
  }
  for (std::size_t k = 0; k < count; ++k) {
    const std::uint64_t j = entries.size();
    MeterEntry e;
    e.puf_seed = mix_seed(c.seed, 1000 + j);
    e.sm_seed = mix_seed(c.seed, 2000 + j);
    SmDevice sm(PufInstance(e.puf_seed, cal), e.sm_seed, SmOptions{noise, false});
    register_meter(sm, ng);
    e.id = sm.current_id();
    entries.push_back(e);
  }
  save_meters(c.keystore, entries);
  Output out(c.out);
  out.stream() << nlohmann::ordered_json{{"registered", count}, {"fleet", entries.size()}}.dump()
               << "\n";
  return 0;
}

netlab::ScenarioConfig scenario_from(const Common& c, const analytics::Config& cfg) {
  netlab::ScenarioConfig sc;
  sc.seed = c.seed;
  sc.meters = cfg.get_u64("meters", 1);
  sc.sessions = cfg.get_u64("sessions", 100);
  sc.puf_noise = cfg.get_bool("puf_noise", true);
  sc.recovery_mode = cfg.get_bool("recovery_mode", false);
  sc.audit = cfg.get_bool("audit", false);
  sc.temps = temps_from(cfg);
  sc.calibration = cfg.calibration();
  return sc;
}

netlab::ScenarioReport execute(const Common& c, const netlab::ScenarioConfig& sc,
                               const std::vector<netlab::AdversaryAction>& script) {
  if (c.keystore.empty()) return netlab::run_scenario(sc, script);
  Fleet f = load_fleet(c, sc.calibration, sc.puf_noise, sc.recovery_mode);
  netlab::Lab lab(sc, script, std::move(f.ng), std::move(f.meters));
  auto report = lab.run();
  f.meters = std::move(lab.meters());
  store_fleet(c, f);
  return report;
}

int cmd_run(const Common& c, std::uint64_t sessions_flag, std::size_t meters_flag) {
  const auto cfg = load_config(c);
  auto sc = scenario_from(c, cfg);
  reject_unused(cfg);
  if (sessions_flag) sc.sessions = sessions_flag;
  if (meters_flag) sc.meters = meters_flag;
  const auto report = execute(c, sc, {});
  Output out(c.out);
  out.stream() << report.to_json().dump(2) << "\n";
  const bool ok = report.sessions_accepted == report.sessions_attempted &&
                  report.key_agreements == report.sessions_accepted;
  if (!ok) {
    std::cerr << "run: " << report.sessions_accepted << "/" << report.sessions_attempted
              << " sessions authenticated\n";
  }
  return ok ? 0 : 1;
}

int cmd_attack(const Common& c, const std::string& script_path, std::uint64_t sessions_flag,
               std::uint64_t dos_packets) {
  const auto cfg = load_config(c);
  auto sc = scenario_from(c, cfg);
  reject_unused(cfg);

  std::vector<netlab::AdversaryAction> script;
  if (!script_path.empty()) {
    std::ifstream in(script_path);
    if (!in) throw Error(Errc::io, "cannot read " + script_path);
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error(Errc::malformed_script, script_path + " is not JSON");
    sc = netlab::parse_scenario(j, sc);
    script = netlab::parse_script(j);
  }
  if (sessions_flag) sc.sessions = sessions_flag;
  sc.seed = c.seed;

  auto report = execute(c, sc, script);
  auto j = report.to_json();
  bool ok = report.attacks_succeeded == 0;
  if (dos_packets) {
    PufCalibration cal = sc.calibration;
    NgState ng(mix_seed(c.seed, 3));
    SmDevice sm(PufInstance(mix_seed(c.seed, 1000), cal), mix_seed(c.seed, 2000),
                SmOptions{sc.puf_noise, false});
    register_meter(sm, ng);
    const auto dos = netlab::dos_probe(sm, dos_packets, mix_seed(c.seed, 98));
    j["dos_probe"] = {{"packets", dos.packets},     {"accepted", dos.accepted},
                      {"puf_total", dos.puf_total}, {"hash_total", dos.hash_total},
                      {"exact_cost", dos.exact_cost}};
    ok = ok && dos.accepted == 0 && dos.exact_cost == dos.packets;
  }
  ok = ok && report.dos_cost_exact == report.dos_packets;
  Output out(c.out);
  out.stream() << j.dump(2) << "\n";
  if (!ok) std::cerr << "attack: an adversary action succeeded or a cost check failed\n";
  return ok ? 0 : 1;
}

int cmd_puf_stats(const Common& c) {
  const auto cfg = load_config(c);
  analytics::PufStatsConfig pc;
  pc.seed = c.seed;
  pc.instances = cfg.get_u64("instances", pc.instances);
  pc.n_not_min = cfg.get_int("n_not_min", pc.n_not_min);
  pc.n_not_max = cfg.get_int("n_not_max", pc.n_not_max);
  pc.temps = cfg.get_doubles("temps", pc.temps);
  pc.evals_per_point = cfg.get_u64("evals_per_point", pc.evals_per_point);
  pc.challenges = cfg.get_u64("challenges", pc.challenges);
  pc.calibration = cfg.calibration();
  reject_unused(cfg);
  const auto rows = analytics::puf_stats(pc);
  Output out(c.out);
  out.stream() << analytics::puf_stats_header() << "\n";
  for (const auto& r : rows) out.stream() << analytics::to_csv(r) << "\n";
  const auto bad = analytics::check_rows(rows);
  for (const auto& b : bad) std::cerr << "puf-stats: " << b << "\n";
  return bad.empty() ? 0 : 1;
}

int cmd_bench(const Common& c, std::uint64_t sessions_flag) {
  const auto cfg = load_config(c);
  analytics::BenchConfig bc;
  bc.seed = c.seed;
  bc.sessions = cfg.get_u64("sessions", bc.sessions);
  bc.meters = cfg.get_u64("meters", bc.meters);
  bc.puf_noise = cfg.get_bool("puf_noise", bc.puf_noise);
  bc.temp_c = cfg.get_double("temp", bc.temp_c);
  bc.calibration = cfg.calibration();
  reject_unused(cfg);
  if (sessions_flag) bc.sessions = sessions_flag;
  const auto result = analytics::bench(bc);
  Output out(c.out);
  out.stream() << analytics::bench_header() << "\n";
  for (const auto& r : result.rows) out.stream() << analytics::to_csv(r) << "\n";
  std::cerr << "bench: " << result.rows.size() << " sessions in " << result.wall_seconds
            << " s (informational)\n";
  for (const auto& v : result.violations) std::cerr << "bench: " << v << "\n";
  return result.violations.empty() ? 0 : 1;
}

int cmd_randomness(const Common& c, std::uint64_t sessions_flag) {
  const auto cfg = load_config(c);
  std::uint64_t sessions = cfg.get_u64("sessions", 10000);
  const std::size_t meters = cfg.get_u64("meters", 10);
  const PufCalibration cal = cfg.calibration();
  reject_unused(cfg);
  if (sessions_flag) sessions = sessions_flag;
  const auto keys = analytics::collect_session_keys(sessions, c.seed, meters, cal);
  const auto report = analytics::key_randomness(keys);
  Output out(c.out);
  out.stream() << report.to_json().dump(2) << "\n";
  return report.pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"OCEC PUF smart-meter authentication lab"};
  app.require_subcommand(1);
  Common common;
  std::uint64_t sessions = 0;
  std::size_t meters = 0;
  std::uint64_t dos_packets = 0;
  std::string script;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", common.seed, "master seed");
    sub->add_option("--out", common.out, "output path, - for stdout");
    sub->add_option("--keystore", common.keystore, "gateway keystore (JSON lines)");
    sub->add_option("--config", common.config, "key=value configuration file");
  };

  auto* reg = app.add_subcommand("register", "enroll meters with the gateway");
  add_common(reg);
  reg->add_option("--meters", meters, "meters to add");

  auto* run = app.add_subcommand("run", "honest authentication sessions");
  add_common(run);
  run->add_option("--sessions", sessions, "session count");
  run->add_option("--meters", meters, "fleet size when no keystore is given");

  auto* attack = app.add_subcommand("attack", "run a scripted adversary");
  add_common(attack);
  attack->add_option("--script", script, "JSON attack script");
  attack->add_option("--sessions", sessions, "session count");
  attack->add_option("--dos-packets", dos_packets, "also feed this many random Msg2 to a meter");

  auto* stats = app.add_subcommand("puf-stats", "PUF quality table (CSV)");
  add_common(stats);

  auto* bench = app.add_subcommand("bench", "per-session cost table (CSV)");
  add_common(bench);
  bench->add_option("--sessions", sessions, "session count");

  auto* rnd = app.add_subcommand("randomness", "session-key statistics");
  add_common(rnd);
  rnd->add_option("--sessions", sessions, "session count");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*reg) return cmd_register(common, meters);
    if (*run) return cmd_run(common, sessions, meters);
    if (*attack) return cmd_attack(common, script, sessions, dos_packets);
    if (*stats) return cmd_puf_stats(common);
    if (*bench) return cmd_bench(common, sessions);
    if (*rnd) return cmd_randomness(common, sessions);
  } catch (const std::exception& e) {
    std::cerr << "ocec-lab: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

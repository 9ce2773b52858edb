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

// Gateway database: one (ID, C, K) row per meter, optionally persisted as
// JSON lines. Every mutation rewrites the whole file into a temporary and
// renames it over the original, so a reader only ever sees committed states.
//
//   {"format":"ocec-keystore/1","records":2}
//   {"id":"<64 hex>","c":"<64 hex>","k":"<64 hex>"}
//   {"id":"<64 hex>","c":"<64 hex>","k":"<64 hex>"}

#include <fcntl.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "ocec/bytes.hpp"

namespace ocec {

inline constexpr const char* kKeystoreFormat = "ocec-keystore/1";

struct NgRecord {
  Block32 id{};
  Block32 challenge{};
  Block32 key{};
  friend bool operator==(const NgRecord&, const NgRecord&) = default;
};

inline std::string record_line(const NgRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = to_hex(r.id);
  j["c"] = to_hex(r.challenge);
  j["k"] = to_hex(r.key);
  return j.dump();
}

class Keystore {
 public:
  /// Called with the temporary path after it is fully written and before the
  /// rename. Tests use it to inject crashes.
  using PreRenameHook = std::function<void(const std::filesystem::path&)>;

  /// In-memory store, nothing persisted.
  Keystore() = default;

  /// Opens `path`, creating an empty store if the file does not exist.
  /// Refuses (KeystoreCorrupt) unless the file parses completely.
  static Keystore open(const std::filesystem::path& path) {
    Keystore ks;
    ks.path_ = path;
    std::error_code ec;
    std::filesystem::remove(temp_path(path), ec);  // leftover of an interrupted commit
    if (!std::filesystem::exists(path)) {
      ks.commit({});
      return ks;
    }
    ks.records_ = parse_file(path);
    ks.reindex();
    return ks;
  }

  static std::vector<NgRecord> parse_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io, "cannot read " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
  }

  static std::vector<NgRecord> parse(const std::string& text) {
    auto corrupt = [](const std::string& why) { return Error(Errc::keystore_corrupt, why); };
    if (text.empty() || text.back() != '\n') throw corrupt("missing trailing newline");
    std::vector<std::string> lines;
    std::istringstream ls(text);
    for (std::string line; std::getline(ls, line);) lines.push_back(line);
    if (lines.empty()) throw corrupt("empty file");

    nlohmann::json header = nlohmann::json::parse(lines[0], nullptr, false);
    if (header.is_discarded() || !header.is_object() || !header.contains("format") ||
        header["format"] != kKeystoreFormat || !header.contains("records") ||
        !header["records"].is_number_unsigned()) {
      throw corrupt("bad header line");
    }
    const auto expected = header["records"].get<std::size_t>();
    if (lines.size() - 1 != expected) {
      throw corrupt("header announces " + std::to_string(expected) + " records, found " +
                    std::to_string(lines.size() - 1));
    }

    std::vector<NgRecord> records;
    std::map<Block32, int> seen;
    for (std::size_t i = 1; i < lines.size(); ++i) {
      nlohmann::json j = nlohmann::json::parse(lines[i], nullptr, false);
      if (j.is_discarded() || !j.is_object()) throw corrupt("line " + std::to_string(i + 1));
      NgRecord r;
      try {
        r.id = field(j, "id");
        r.challenge = field(j, "c");
        r.key = field(j, "k");
      } catch (const Error& e) {
        throw corrupt("line " + std::to_string(i + 1) + ": " + e.what());
      }
      if (!seen.emplace(r.id, 0).second) throw corrupt("duplicate id on line " + std::to_string(i + 1));
      records.push_back(r);
    }
    return records;
  }

  static std::string serialize(const std::vector<NgRecord>& records) {
    nlohmann::ordered_json header;
    header["format"] = kKeystoreFormat;
    header["records"] = records.size();
    std::string out = header.dump() + "\n";
    for (const auto& r : records) out += record_line(r) + "\n";
    return out;
  }

  std::optional<NgRecord> lookup(const Block32& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return records_[it->second];
  }

  bool contains(const Block32& id) const { return index_.count(id) != 0; }

  void insert(const NgRecord& record) {
    if (contains(record.id)) throw Error(Errc::duplicate_id, "id already present");
    auto next = records_;
    next.push_back(record);
    commit(std::move(next));
  }

  /// Swaps the row of `old_id` for `record` in place; all other rows are untouched.
  void replace(const Block32& old_id, const NgRecord& record) {
    auto it = index_.find(old_id);
    if (it == index_.end()) throw Error(Errc::not_found, "replace: id not present");
    if (record.id != old_id && contains(record.id)) {
      throw Error(Errc::duplicate_id, "replace: new id collides with another meter");
    }
    auto next = records_;
    next[it->second] = record;
    commit(std::move(next));
  }

  void erase(const Block32& id) {
    auto it = index_.find(id);
    if (it == index_.end()) throw Error(Errc::not_found, "erase: id not present");
    auto next = records_;
    next.erase(next.begin() + static_cast<std::ptrdiff_t>(it->second));
    commit(std::move(next));
  }

  const std::vector<NgRecord>& dump() const { return records_; }
  std::size_t size() const { return records_.size(); }
  const std::optional<std::filesystem::path>& path() const { return path_; }

  void set_pre_rename_hook(PreRenameHook hook) { hook_ = std::move(hook); }

  static std::filesystem::path temp_path(const std::filesystem::path& path) {
    return std::filesystem::path(path.string() + ".tmp");
  }

 private:
  static Block32 field(const nlohmann::json& j, const char* name) {
    if (!j.contains(name) || !j[name].is_string()) {
      throw Error(Errc::structural, std::string("missing field ") + name);
    }
    const auto& s = j[name].get_ref<const std::string&>();
    if (s.size() != 64) throw Error(Errc::structural, std::string(name) + " is not 64 hex chars");
    return block_from_hex<32>(s);
  }

  void reindex() {
    index_.clear();
    for (std::size_t i = 0; i < records_.size(); ++i) index_[records_[i].id] = i;
  }

  // State changes only after the new file is in place.
  void commit(std::vector<NgRecord> next) {
    if (path_) write_atomically(*path_, serialize(next));
    records_ = std::move(next);
    reindex();
  }

  void write_atomically(const std::filesystem::path& path, const std::string& content) {
    const auto tmp = temp_path(path);
    int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0600);
    if (fd < 0) throw Error(Errc::io, "cannot create " + tmp.string());
    std::size_t done = 0;
    while (done < content.size()) {
      ssize_t n = ::write(fd, content.data() + done, content.size() - done);
      if (n <= 0) {
        ::close(fd);
        std::error_code ec;
        std::filesystem::remove(tmp, ec);
        throw Error(Errc::io, "short write to " + tmp.string());
      }
      done += static_cast<std::size_t>(n);
    }
    if (::fsync(fd) != 0) {
      ::close(fd);
      throw Error(Errc::io, "fsync failed on " + tmp.string());
    }
    ::close(fd);
    if (hook_) hook_(tmp);
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw Error(Errc::io, "rename failed: " + ec.message());
  }

  std::optional<std::filesystem::path> path_;
  std::vector<NgRecord> records_;
  std::map<Block32, std::size_t> index_;
  PreRenameHook hook_;
};

}  // namespace ocec

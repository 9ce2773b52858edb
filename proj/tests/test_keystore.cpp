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

#include <filesystem>
#include <fstream>
#include <set>

#include "ocec/crypto.hpp"
#include "ocec/keystore.hpp"

using namespace ocec;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("ocec-ks-" + std::to_string(::getpid()) + "-" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

NgRecord random_record(Prng& rng) { return NgRecord{rng.block<32>(), rng.block<32>(), rng.block<32>()}; }

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

struct Crash {};

}  // namespace

TEST(Keystore, InMemoryOperations) {
  Prng rng(1);
  Keystore ks;
  const auto a = random_record(rng), b = random_record(rng);
  ks.insert(a);
  ks.insert(b);
  EXPECT_EQ(ks.lookup(a.id), a);
  EXPECT_FALSE(ks.lookup(rng.block<32>()).has_value());
  EXPECT_THROW(ks.insert(a), Error);

  const auto a2 = random_record(rng);
  ks.replace(a.id, a2);
  EXPECT_FALSE(ks.lookup(a.id).has_value());
  EXPECT_EQ(ks.lookup(a2.id), a2);
  EXPECT_EQ(ks.lookup(b.id), b);

  try {
    ks.replace(a.id, random_record(rng));
    FAIL() << "no throw";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::not_found);
  }
  NgRecord clash = random_record(rng);
  clash.id = b.id;
  EXPECT_THROW(ks.replace(a2.id, clash), Error);
  ks.erase(b.id);
  EXPECT_EQ(ks.size(), 1u);
  EXPECT_THROW(ks.erase(b.id), Error);
}

TEST(Keystore, FileRoundTrip) {
  TempDir dir;
  const fs::path p = dir.path / "ng.jsonl";
  Prng rng(2);
  std::vector<NgRecord> recs;
  {
    auto ks = Keystore::open(p);
    EXPECT_EQ(ks.size(), 0u);
    for (int i = 0; i < 5; ++i) {
      recs.push_back(random_record(rng));
      ks.insert(recs.back());
    }
  }
  auto again = Keystore::open(p);
  EXPECT_EQ(again.dump(), recs);
  const std::string text = read_file(p);
  EXPECT_EQ(text.substr(0, text.find('\n')), R"({"format":"ocec-keystore/1","records":5})");
}

TEST(Keystore, ReplaceLeavesOtherLinesByteIdentical) {
  TempDir dir;
  const fs::path p = dir.path / "ng.jsonl";
  Prng rng(3);
  auto ks = Keystore::open(p);
  std::vector<NgRecord> recs;
  for (int i = 0; i < 6; ++i) {
    recs.push_back(random_record(rng));
    ks.insert(recs.back());
  }
  const std::string before = read_file(p);
  ks.replace(recs[2].id, random_record(rng));
  const std::string after = read_file(p);
  std::istringstream b(before), a(after);
  std::string lb, la;
  int line = 0;
  while (std::getline(b, lb) && std::getline(a, la)) {
    if (line != 3) EXPECT_EQ(lb, la) << "line " << line;  // header + record 2
    else EXPECT_NE(lb, la);
    ++line;
  }
}

TEST(Keystore, RefusesDamagedFiles) {
  TempDir dir;
  const fs::path p = dir.path / "ng.jsonl";
  Prng rng(4);
  const auto r = random_record(rng);
  const std::string good = Keystore::serialize({r, random_record(rng)});
  const std::vector<std::string> bad = {
      "",
      "not json\n",
      R"({"format":"other/1","records":0})" "\n",
      R"({"format":"ocec-keystore/1","records":3})" "\n" + record_line(r) + "\n",
      R"({"format":"ocec-keystore/1","records":2})" "\n" + record_line(r) + "\n" + record_line(r) + "\n",
      R"({"format":"ocec-keystore/1","records":1})" "\n" R"({"id":"00","c":"00","k":"00"})" "\n",
      good.substr(0, good.size() - 1),
  };
  for (const auto& text : bad) {
    write_file(p, text);
    try {
      Keystore::open(p);
      FAIL() << "accepted: " << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::keystore_corrupt) << e.what();
    }
  }
}

TEST(Keystore, EveryStrictPrefixIsRefused) {
  Prng rng(5);
  std::vector<NgRecord> recs;
  for (int i = 0; i < 3; ++i) recs.push_back(random_record(rng));
  const std::string text = Keystore::serialize(recs);
  EXPECT_EQ(Keystore::parse(text), recs);
  for (std::size_t len = 0; len < text.size(); ++len) {
    EXPECT_THROW(Keystore::parse(text.substr(0, len)), Error) << "prefix " << len;
  }
}

TEST(Keystore, CrashBeforeRenameKeepsOldState) {
  TempDir dir;
  const fs::path p = dir.path / "ng.jsonl";
  Prng rng(6);
  std::vector<NgRecord> committed;
  {
    auto ks = Keystore::open(p);
    for (int i = 0; i < 3; ++i) {
      committed.push_back(random_record(rng));
      ks.insert(committed.back());
    }
  }
  const std::string full = Keystore::serialize(committed);
  // Crash after the temporary holds any prefix of the next state.
  NgRecord next = random_record(rng);
  std::vector<NgRecord> after = committed;
  after[1] = next;
  const std::string next_text = Keystore::serialize(after);
  for (std::size_t cut = 0; cut <= next_text.size(); cut += 7) {
    auto ks = Keystore::open(p);
    ks.set_pre_rename_hook([&](const fs::path& tmp) {
      fs::resize_file(tmp, cut);
      throw Crash{};
    });
    EXPECT_THROW(ks.replace(committed[1].id, next), Crash);
    EXPECT_TRUE(fs::exists(Keystore::temp_path(p)));
    auto reopened = Keystore::open(p);
    EXPECT_EQ(reopened.dump(), committed);
    EXPECT_FALSE(fs::exists(Keystore::temp_path(p)));
    EXPECT_EQ(read_file(p), full);
  }
  // Without a crash the new state is what reopens.
  auto ks = Keystore::open(p);
  ks.replace(committed[1].id, next);
  EXPECT_EQ(Keystore::open(p).dump(), after);
}

TEST(Keystore, FailedCommitLeavesMemoryUnchanged) {
  TempDir dir;
  const fs::path p = dir.path / "ng.jsonl";
  Prng rng(7);
  auto ks = Keystore::open(p);
  const auto a = random_record(rng);
  ks.insert(a);
  ks.set_pre_rename_hook([](const fs::path&) { throw Crash{}; });
  EXPECT_THROW(ks.insert(random_record(rng)), Crash);
  EXPECT_EQ(ks.size(), 1u);
  EXPECT_EQ(ks.lookup(a.id), a);
}

TEST(Keystore, RandomOperationSequencesKeepIdsUnique) {
  Prng rng(8);
  Keystore ks;
  std::vector<Block32> live;
  for (int step = 0; step < 3000; ++step) {
    const auto op = rng.next_u64() % 4;
    try {
      if (op == 0 || live.empty()) {
        auto r = random_record(rng);
        if (!live.empty() && rng.next_u64() % 5 == 0) r.id = live[rng.next_u64() % live.size()];
        ks.insert(r);
        live.push_back(r.id);
      } else if (op == 1) {
        const auto old = live[rng.next_u64() % live.size()];
        auto r = random_record(rng);
        if (rng.next_u64() % 5 == 0) r.id = live[rng.next_u64() % live.size()];
        ks.replace(old, r);
        std::replace(live.begin(), live.end(), old, r.id);
      } else if (op == 2) {
        const auto id = live[rng.next_u64() % live.size()];
        ks.erase(id);
        live.erase(std::find(live.begin(), live.end(), id));
      } else {
        ks.erase(rng.block<32>());
      }
    } catch (const Error&) {
    }
    std::set<Block32> ids;
    for (const auto& r : ks.dump()) ids.insert(r.id);
    ASSERT_EQ(ids.size(), ks.size());
    ASSERT_EQ(ids, std::set<Block32>(live.begin(), live.end()));
  }
}

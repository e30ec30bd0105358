// Copyright 2026 The GCRS Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>

#include "gcrs/checkpoint.hpp"
#include "gcrs/error.hpp"
#include "gcrs/random.hpp"

namespace gcrs {
namespace {

namespace fs = std::filesystem;

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "gcrs_ckpt_test";
  fs::create_directories(dir);
  return dir / name;
}

Checkpoint sample_checkpoint() {
  Checkpoint c;
  c.config_digest = 0x0123456789abcdefULL;
  c.global_step = 4096;
  c.layout.kind = AbstractionKind::Room;
  c.layout.max_items = 3;
  c.layout.max_doors = 2;
  c.layout.max_rooms = 5;
  Rng rng(3);
  c.params = PolicyParams<double>::random(c.layout.size(), 16, rng, -0.3);
  return c;
}

void expect_code(ErrorCode code, const std::function<void()>& f) {
  try {
    f();
    FAIL() << "no exception";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

TEST(Checkpoint, RoundTripIsBitIdentical) {
  const Checkpoint c = sample_checkpoint();
  const auto path = temp_file("roundtrip.ckpt").string();
  save_checkpoint(path, c);
  const Checkpoint d = load_checkpoint(path);
  EXPECT_EQ(d.config_digest, c.config_digest);
  EXPECT_EQ(d.global_step, c.global_step);
  EXPECT_EQ(d.layout, c.layout);
  const Eigen::VectorXd a = c.params.flatten();
  const Eigen::VectorXd b = d.params.flatten();
  ASSERT_EQ(a.size(), b.size());
  EXPECT_EQ(std::memcmp(a.data(), b.data(), sizeof(double) * a.size()), 0);
  EXPECT_EQ(describe_checkpoint(c), describe_checkpoint(d));
}

TEST(Checkpoint, MissingFileIsIo) {
  expect_code(ErrorCode::Io, [] { load_checkpoint(temp_file("does_not_exist.ckpt").string()); });
}

TEST(Checkpoint, BadMagic) {
  const auto path = temp_file("magic.ckpt").string();
  save_checkpoint(path, sample_checkpoint());
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("XCRS", 4);
  }
  expect_code(ErrorCode::CheckpointMismatch, [&] { load_checkpoint(path); });
}

TEST(Checkpoint, BadVersion) {
  const auto path = temp_file("version.ckpt").string();
  save_checkpoint(path, sample_checkpoint());
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(4);
    const char v[4] = {99, 0, 0, 0};
    f.write(v, 4);
  }
  expect_code(ErrorCode::CheckpointMismatch, [&] { load_checkpoint(path); });
}

TEST(Checkpoint, Truncated) {
  const auto path = temp_file("short.ckpt").string();
  save_checkpoint(path, sample_checkpoint());
  fs::resize_file(path, fs::file_size(path) - 8);
  EXPECT_THROW(load_checkpoint(path), Error);
}

TEST(Checkpoint, Describe) {
  const std::string s = describe_checkpoint(sample_checkpoint());
  EXPECT_NE(s.find("global_step 4096"), std::string::npos);
  EXPECT_NE(s.find("config_digest 0123456789abcdef"), std::string::npos);
  EXPECT_NE(s.find("abstraction room"), std::string::npos);
  EXPECT_NE(s.find("critic.w3"), std::string::npos);
}

TEST(Fnv1a, KnownValues) {
  EXPECT_EQ(fnv1a("", 0), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a("a", 1), 0xaf63dc4c8601ec8cULL);
}

}  // namespace
}  // namespace gcrs

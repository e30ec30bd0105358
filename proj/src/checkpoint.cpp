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

#include "gcrs/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

namespace gcrs {

namespace {

constexpr char kMagic[4] = {'G', 'C', 'R', 'S'};

class Writer {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  const std::vector<char>& bytes() const { return bytes_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::vector<char> bytes_;
};

class Reader {
 public:
  explicit Reader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  void raw(char* out, std::size_t n) {
    need(n);
    std::memcpy(out, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw Error(ErrorCode::CheckpointMismatch, "truncated checkpoint");
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& c) {
  Writer w;
  w.raw(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.u64(c.config_digest);
  w.u64(c.global_step);
  w.u32(static_cast<std::uint32_t>(c.params.actor.inputs()));
  w.u32(static_cast<std::uint32_t>(c.params.actor.hidden()));
  w.u32(static_cast<std::uint32_t>(c.params.actor.outputs()));
  w.u32(static_cast<std::uint32_t>(c.layout.kind));
  w.u32(c.layout.subgoal_enabled ? 1 : 0);
  w.u32(c.layout.room_pos ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(c.layout.max_items));
  w.u32(static_cast<std::uint32_t>(c.layout.max_doors));
  w.u32(static_cast<std::uint32_t>(c.layout.max_rooms));
  const Eigen::VectorXd flat = c.params.flatten();
  w.u64(static_cast<std::uint64_t>(flat.size()));
  for (double v : flat) w.f64(v);

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorCode::Io, "cannot write " + path);
  os.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!os) throw Error(ErrorCode::Io, "write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::Io, "cannot read " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  Reader r(std::move(bytes));
  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw Error(ErrorCode::CheckpointMismatch, "bad magic");
  if (const auto v = r.u32(); v != kCheckpointVersion) {
    throw Error(ErrorCode::CheckpointMismatch, "unsupported version " + std::to_string(v));
  }
  Checkpoint c;
  c.config_digest = r.u64();
  c.global_step = r.u64();
  const auto obs_dim = r.u32();
  const auto hidden = r.u32();
  const auto act_dim = r.u32();
  const auto kind = r.u32();
  if (kind > 1) throw Error(ErrorCode::CheckpointMismatch, "unknown abstraction id");
  c.layout.kind = static_cast<AbstractionKind>(kind);
  c.layout.subgoal_enabled = r.u32() != 0;
  c.layout.room_pos = r.u32() != 0;
  c.layout.max_items = static_cast<int>(r.u32());
  c.layout.max_doors = static_cast<int>(r.u32());
  c.layout.max_rooms = static_cast<int>(r.u32());
  if (act_dim != kActionDim || static_cast<int>(obs_dim) != c.layout.size() || hidden == 0) {
    throw Error(ErrorCode::CheckpointMismatch, "shape does not match the observation layout");
  }
  c.params = PolicyParams<double>::zeros(obs_dim, hidden);
  const auto n = r.u64();
  if (n != static_cast<std::uint64_t>(c.params.size()) || r.remaining() != n * 8) {
    throw Error(ErrorCode::CheckpointMismatch, "parameter count mismatch");
  }
  Eigen::VectorXd flat(static_cast<Eigen::Index>(n));
  for (auto& v : flat) v = r.f64();
  c.params.unflatten(flat);
  return c;
}

std::uint64_t fnv1a(const void* data, std::size_t bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

template <typename M>
void describe_array(std::ostringstream& os, const char* name, const M& m) {
  const Eigen::VectorXd flat = m.reshaped();
  os << "  " << std::left << std::setw(16) << name << m.rows() << "x" << m.cols() << "  fnv1a=" << std::hex
     << std::setw(16) << std::setfill('0') << std::right
     << fnv1a(flat.data(), static_cast<std::size_t>(flat.size()) * sizeof(double)) << std::dec
     << std::setfill(' ') << '\n';
}

}  // namespace

std::string describe_checkpoint(const Checkpoint& c) {
  std::ostringstream os;
  os << "format_version " << kCheckpointVersion << '\n';
  os << "config_digest " << std::hex << std::setw(16) << std::setfill('0') << c.config_digest
     << std::dec << std::setfill(' ') << '\n';
  os << "global_step " << c.global_step << '\n';
  os << "abstraction " << (c.layout.kind == AbstractionKind::Grid ? "grid" : "room")
     << " subgoal " << (c.layout.subgoal_enabled ? "on" : "off") << " room_pos "
     << (c.layout.room_pos ? "on" : "off") << '\n';
  os << "slots items=" << c.layout.max_items << " doors=" << c.layout.max_doors
     << " rooms=" << c.layout.max_rooms << " obs_dim=" << c.layout.size() << '\n';
  os << "parameters " << c.params.size() << '\n';
  const auto& a = c.params.actor;
  const auto& v = c.params.critic;
  describe_array(os, "actor.w1", a.w1);
  describe_array(os, "actor.b1", a.b1);
  describe_array(os, "actor.w2", a.w2);
  describe_array(os, "actor.b2", a.b2);
  describe_array(os, "actor.w3", a.w3);
  describe_array(os, "actor.b3", a.b3);
  describe_array(os, "log_std", c.params.log_std);
  describe_array(os, "critic.w1", v.w1);
  describe_array(os, "critic.b1", v.b1);
  describe_array(os, "critic.w2", v.w2);
  describe_array(os, "critic.b2", v.b2);
  describe_array(os, "critic.w3", v.w3);
  describe_array(os, "critic.b3", v.b3);
  return os.str();
}

}  // namespace gcrs

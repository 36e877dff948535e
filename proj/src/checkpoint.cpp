// Copyright 2026 The AGN Authors. All Rights Reserved.
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

#include "agn/checkpoint.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "agn/error.hpp"
#include "binary_io.hpp"

namespace agn {

namespace {

struct Slot {
  std::string name;
  Tensor* tensor = nullptr;  // null for the step counter
  std::int64_t* step = nullptr;
};

std::vector<Slot> slots_of(ParamStore& store) {
  std::vector<Slot> out;
  for (std::size_t i = 0; i < store.size(); ++i) {
    LayerParams& p = store[i];
    const std::string& n = p.name;
    out.push_back({n + ".weight", &p.weights});
    out.push_back({n + ".weight.m", &p.adam_m});
    out.push_back({n + ".weight.v", &p.adam_v});
    if (p.bias) {
      out.push_back({n + ".bias", &*p.bias});
      out.push_back({n + ".bias.m", &*p.bias_m});
      out.push_back({n + ".bias.v", &*p.bias_v});
    }
    if (p.running_mean) out.push_back({n + ".running_mean", &*p.running_mean});
    if (p.running_var) out.push_back({n + ".running_var", &*p.running_var});
    out.push_back({n + ".step", nullptr, &p.step_count});
  }
  return out;
}

Shape shape_of(const Slot& s) { return s.tensor ? s.tensor->shape() : Shape{}; }

}  // namespace

std::vector<CheckpointEntry> checkpoint_entries(const ParamStore& store) {
  std::vector<CheckpointEntry> out;
  for (const Slot& s : slots_of(const_cast<ParamStore&>(store))) {
    CheckpointEntry e{s.name, shape_of(s), {}};
    if (s.tensor) {
      e.values.reserve(s.tensor->size());
      for (Real v : s.tensor->values()) e.values.push_back(static_cast<float>(v));
    } else {
      e.values.push_back(static_cast<float>(*s.step));
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<char> serialize_checkpoint(const ParamStore& store) {
  const auto entries = checkpoint_entries(store);
  std::vector<char> out{'A', 'G', 'N', 'C', 1};
  detail::put_u32(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    detail::put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    detail::put_u32(out, static_cast<std::uint32_t>(e.shape.size()));
    for (std::size_t d : e.shape) detail::put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : e.values) detail::put_f32(out, v);
  }
  return out;
}

void save_checkpoint(const ParamStore& store, const std::string& path) {
  detail::write_file(path, serialize_checkpoint(store));
}

std::vector<CheckpointEntry> parse_checkpoint(const std::vector<char>& bytes, const std::string& what) {
  detail::Reader in(bytes, what);
  if (bytes.size() < 4 || in.str(4) != "AGNC") fail(ErrorCode::format, what + ": bad magic (expected AGNC)");
  const std::uint8_t version = in.u8();
  if (version != 1) fail(ErrorCode::format, what + ": unsupported version " + std::to_string(version));
  const std::uint32_t count = in.u32();
  std::vector<CheckpointEntry> entries;
  for (std::uint32_t k = 0; k < count; ++k) {
    CheckpointEntry e;
    const std::uint32_t len = in.u32();
    e.name = in.str(len);
    const std::uint32_t rank = in.u32();
    if (rank > 8) fail(ErrorCode::format, what + ": entry '" + e.name + "' has rank " + std::to_string(rank));
    std::uint64_t numel = 1;
    for (std::uint32_t a = 0; a < rank; ++a) {
      const std::uint32_t d = in.u32();
      e.shape.push_back(d);
      numel *= d;
      if (numel > in.remaining()) fail(ErrorCode::format, what + ": entry '" + e.name + "' exceeds the file size");
    }
    in.need(4 * numel);
    e.values.resize(numel);
    for (auto& v : e.values) v = in.f32();
    entries.push_back(std::move(e));
  }
  if (in.remaining() != 0) fail(ErrorCode::format, what + ": trailing bytes after the last entry");
  return entries;
}

std::vector<CheckpointEntry> read_checkpoint(const std::string& path) {
  return parse_checkpoint(detail::read_file(path), "checkpoint '" + path + "'");
}

void load_checkpoint(ParamStore& store, const std::vector<CheckpointEntry>& entries, LoadMode mode) {
  auto slots = slots_of(store);
  std::map<std::string, const CheckpointEntry*> by_name;
  for (const auto& e : entries)
    if (!by_name.emplace(e.name, &e).second) fail(ErrorCode::format, "checkpoint: duplicate entry '" + e.name + "'");

  // Validate everything before touching the store.
  std::vector<std::pair<Slot*, const CheckpointEntry*>> plan;
  if (mode == LoadMode::exact) {
    const std::size_t n = std::min(slots.size(), entries.size());
    for (std::size_t i = 0; i < n; ++i)
      if (slots[i].name != entries[i].name)
        fail(ErrorCode::shape_mismatch, "checkpoint mismatch at parameter '" + slots[i].name + "': file has '" +
                                            entries[i].name + "'");
    if (slots.size() > n)
      fail(ErrorCode::shape_mismatch, "checkpoint mismatch: parameter '" + slots[n].name + "' missing from file");
    if (entries.size() > n)
      fail(ErrorCode::shape_mismatch, "checkpoint mismatch: file entry '" + entries[n].name + "' not in model");
    for (std::size_t i = 0; i < n; ++i) plan.emplace_back(&slots[i], &entries[i]);
  } else {
    std::map<std::string, Slot*> slot_by_name;
    for (auto& s : slots) slot_by_name[s.name] = &s;
    for (const auto& e : entries) {
      const auto it = slot_by_name.find(e.name);
      if (it == slot_by_name.end())
        fail(ErrorCode::shape_mismatch, "checkpoint mismatch: file entry '" + e.name + "' not in model");
      plan.emplace_back(it->second, &e);
    }
  }
  for (const auto& [slot, entry] : plan) {
    const Shape want = shape_of(*slot);
    if (entry->shape != want)
      fail(ErrorCode::shape_mismatch, "checkpoint mismatch at parameter '" + slot->name + "': file shape " +
                                          shape_string(entry->shape) + ", model shape " + shape_string(want));
    if (!slot->tensor) {
      const float v = entry->values.front();
      if (!(v >= 0) || v != std::floor(v))
        fail(ErrorCode::format, "checkpoint: invalid step count in '" + slot->name + "'");
    }
  }
  for (const auto& [slot, entry] : plan) {
    if (slot->tensor) {
      auto dst = slot->tensor->values();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = entry->values[i];
    } else {
      *slot->step = static_cast<std::int64_t>(entry->values.front());
    }
  }
}

void load_checkpoint(ParamStore& store, const std::string& path, LoadMode mode) {
  load_checkpoint(store, read_checkpoint(path), mode);
}

}  // namespace agn

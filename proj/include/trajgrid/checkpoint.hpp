#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "trajgrid/autodiff.hpp"
#include "trajgrid/common.hpp"

namespace trajgrid {

// TGWT weight checkpoint: magic "TGWT", version u16, then per parameter:
// name length u16, name bytes, rank u8, dims u32 each, values f32.
// All integers and floats little-endian. Round-trips are bit-exact.

constexpr uint16_t kCheckpointVersion = 1;

struct CheckpointEntry {
  std::string name;
  std::vector<int> shape;
  std::vector<float> values;
};

namespace detail {

template <typename T>
void write_le(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
bool read_le(std::istream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return static_cast<bool>(in);
}

}  // namespace detail

inline void write_checkpoint(std::ostream& out, const std::vector<CheckpointEntry>& entries) {
  out.write("TGWT", 4);
  detail::write_le<uint16_t>(out, kCheckpointVersion);
  for (const auto& e : entries) {
    if (e.name.size() > 0xffff) throw FormatError("checkpoint: parameter name too long");
    if (e.shape.size() > 0xff) throw FormatError("checkpoint: rank too large");
    detail::write_le<uint16_t>(out, static_cast<uint16_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    detail::write_le<uint8_t>(out, static_cast<uint8_t>(e.shape.size()));
    size_t n = 1;
    for (int d : e.shape) {
      detail::write_le<uint32_t>(out, static_cast<uint32_t>(d));
      n *= static_cast<size_t>(d);
    }
    if (n != e.values.size()) throw FormatError("checkpoint: shape/value mismatch");
    out.write(reinterpret_cast<const char*>(e.values.data()),
              static_cast<std::streamsize>(n * sizeof(float)));
  }
}

inline void write_checkpoint(const std::string& path, const std::vector<CheckpointEntry>& entries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  write_checkpoint(out, entries);
  if (!out) throw IoError("checkpoint write failed: " + path);
}

inline std::vector<CheckpointEntry> read_checkpoint(std::istream& in) {
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "TGWT", 4) != 0) throw FormatError("checkpoint: bad magic");
  uint16_t version = 0;
  if (!detail::read_le(in, version)) throw FormatError("checkpoint: truncated header");
  if (version != kCheckpointVersion) throw FormatError("checkpoint: unsupported version");

  std::vector<CheckpointEntry> entries;
  while (true) {
    uint16_t name_len = 0;
    if (!detail::read_le(in, name_len)) {
      if (in.eof()) break;
      throw FormatError("checkpoint: truncated entry");
    }
    CheckpointEntry e;
    e.name.resize(name_len);
    in.read(e.name.data(), name_len);
    uint8_t rank = 0;
    if (!in || !detail::read_le(in, rank)) throw FormatError("checkpoint: truncated entry");
    size_t n = 1;
    for (int d = 0; d < rank; ++d) {
      uint32_t dim = 0;
      if (!detail::read_le(in, dim)) throw FormatError("checkpoint: truncated dims");
      e.shape.push_back(static_cast<int>(dim));
      n *= dim;
    }
    e.values.resize(n);
    in.read(reinterpret_cast<char*>(e.values.data()), static_cast<std::streamsize>(n * sizeof(float)));
    if (!in) throw FormatError("checkpoint: truncated values for '" + e.name + "'");
    entries.push_back(std::move(e));
  }
  return entries;
}

inline std::vector<CheckpointEntry> read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  return read_checkpoint(in);
}

template <typename T>
std::vector<CheckpointEntry> to_entries(const ParamSet<T>& params) {
  std::vector<CheckpointEntry> entries;
  entries.reserve(params.entries.size());
  for (const auto& [name, t] : params.entries) {
    CheckpointEntry e;
    e.name = name;
    e.shape = t->shape;
    e.values.resize(t->size());
    for (size_t i = 0; i < t->size(); ++i) e.values[i] = static_cast<float>(t->value[i]);
    entries.push_back(std::move(e));
  }
  return entries;
}

// Copies values into an already-constructed parameter set; names and shapes
// must line up exactly.
template <typename T>
void load_entries(ParamSet<T>& params, const std::vector<CheckpointEntry>& entries) {
  for (auto& [name, t] : params.entries) {
    const CheckpointEntry* found = nullptr;
    for (const auto& e : entries)
      if (e.name == name) {
        found = &e;
        break;
      }
    if (!found) throw FormatError("checkpoint: missing parameter '" + name + "'");
    if (found->shape != t->shape) throw FormatError("checkpoint: shape mismatch for '" + name + "'");
    for (size_t i = 0; i < t->size(); ++i) t->value[i] = static_cast<T>(found->values[i]);
  }
}

}  // namespace trajgrid

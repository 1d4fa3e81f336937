// svkit/src/checkpoint.cpp
//
// Copyright 2026 svkit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include "svkit/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "svkit/common.hpp"

namespace sv {

namespace {

constexpr char kMagic[4] = {'S', 'M', 'L', 'A'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff),
               static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

void write_u16(std::ostream& out, std::uint16_t v) {
  char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  out.write(b, 2);
}

std::uint32_t read_u32(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw DataError("checkpoint: truncated file: " + path);
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint16_t read_u16(std::istream& in, const std::string& path) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  if (!in) throw DataError("checkpoint: truncated file: " + path);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("checkpoint: cannot write file: " + path);
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  write_u32(out, static_cast<std::uint32_t>(ckpt.config_text.size()));
  out.write(ckpt.config_text.data(),
            static_cast<std::streamsize>(ckpt.config_text.size()));
  for (const auto& t : ckpt.tensors) {
    if (t.name.size() > 0xffff)
      throw ConfigError("checkpoint: tensor name too long: " + t.name);
    write_u16(out, static_cast<std::uint16_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    out.put(static_cast<char>(t.shape.size()));
    std::int64_t n = 1;
    for (int d : t.shape) {
      write_u32(out, static_cast<std::uint32_t>(d));
      n *= d;
    }
    if (n != static_cast<std::int64_t>(t.data.size()))
      throw ConfigError("checkpoint: record size mismatch: " + t.name);
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  }
  if (!out) throw DataError("checkpoint: write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("checkpoint: bad magic: " + path);
  const std::uint32_t version = read_u32(in, path);
  if (version != kVersion)
    throw DataError("checkpoint: unsupported version " +
                    std::to_string(version) + ": " + path);
  const std::uint32_t cfg_len = read_u32(in, path);
  Checkpoint ckpt;
  ckpt.config_text.resize(cfg_len);
  in.read(ckpt.config_text.data(), cfg_len);
  if (!in) throw DataError("checkpoint: truncated config blob: " + path);

  while (true) {
    const int first = in.peek();
    if (first == std::char_traits<char>::eof()) break;
    TensorRecord rec;
    const std::uint16_t name_len = read_u16(in, path);
    rec.name.resize(name_len);
    in.read(rec.name.data(), name_len);
    const int rank = in.get();
    if (!in || rank < 0) throw DataError("checkpoint: truncated file: " + path);
    std::int64_t n = 1;
    for (int i = 0; i < rank; ++i) {
      const std::uint32_t d = read_u32(in, path);
      if (d == 0 || d > (1u << 28))
        throw DataError("checkpoint: corrupt dimension in " + rec.name + ": " +
                        path);
      rec.shape.push_back(static_cast<int>(d));
      n *= d;
    }
    rec.data.resize(static_cast<size_t>(n));
    in.read(reinterpret_cast<char*>(rec.data.data()),
            static_cast<std::streamsize>(n * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(n * sizeof(float)))
      throw DataError("checkpoint: truncated tensor " + rec.name + ": " + path);
    ckpt.tensors.push_back(std::move(rec));
  }
  return ckpt;
}

void snapshot_params(const ParamStore<float>& params, Checkpoint* ckpt) {
  for (const auto& [name, t] : params.items) {
    TensorRecord rec;
    rec.name = name;
    rec.shape = t.shape();
    rec.data = t.data();
    ckpt->tensors.push_back(std::move(rec));
  }
}

void restore_params(const Checkpoint& ckpt, ParamStore<float>* params) {
  size_t matched = 0;
  for (const auto& rec : ckpt.tensors) {
    if (rec.name.rfind("opt/", 0) == 0) continue;
    if (!params->has(rec.name))
      throw DataError("checkpoint: unexpected tensor for this model: " +
                      rec.name);
    Tensor<float>& t = params->get(rec.name);
    if (t.shape() != rec.shape)
      throw DataError("checkpoint: shape mismatch for tensor " + rec.name);
    t.data() = rec.data;
    ++matched;
  }
  if (matched != params->items.size())
    throw DataError("checkpoint: missing tensors for this model (" +
                    std::to_string(matched) + " of " +
                    std::to_string(params->items.size()) + ")");
}

}  // namespace sv

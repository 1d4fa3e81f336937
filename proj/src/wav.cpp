// svkit/src/wav.cpp
//
// Copyright 2026 svkit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include "svkit/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "svkit/common.hpp"

namespace sv {

namespace {

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint16_t read_u16(std::istream& in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

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

}  // namespace

Waveform load_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("wav: cannot open file: " + path);

  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "RIFF", 4) != 0)
    throw DataError("wav: not a RIFF container: " + path);
  read_u32(in);  // riff size
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "WAVE", 4) != 0)
    throw DataError("wav: missing WAVE header: " + path);

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  Waveform wave;

  while (in.read(magic, 4)) {
    std::uint32_t chunk_size = read_u32(in);
    if (!in) throw DataError("wav: truncated chunk header: " + path);
    if (std::memcmp(magic, "fmt ", 4) == 0) {
      if (chunk_size < 16) throw DataError("wav: malformed fmt chunk: " + path);
      format = read_u16(in);
      channels = read_u16(in);
      rate = read_u32(in);
      read_u32(in);  // byte rate
      read_u16(in);  // block align
      bits = read_u16(in);
      in.ignore(chunk_size - 16);
      have_fmt = true;
    } else if (std::memcmp(magic, "data", 4) == 0) {
      if (!have_fmt) throw DataError("wav: data chunk before fmt: " + path);
      if (format != 1) throw DataError("wav: only PCM encoding supported: " + path);
      if (bits != 16) throw DataError("wav: only 16-bit samples supported: " + path);
      if (channels != 1)
        throw DataError("wav: expected mono, got " + std::to_string(channels) +
                        " channels: " + path);
      if (rate != 16000)
        throw DataError("wav: expected 16 kHz sample rate, got " +
                        std::to_string(rate) + ": " + path);
      std::uint32_t n = chunk_size / 2;
      std::vector<char> raw(chunk_size);
      in.read(raw.data(), chunk_size);
      if (static_cast<std::uint32_t>(in.gcount()) != chunk_size)
        throw DataError("wav: truncated data chunk: " + path);
      wave.samples.resize(n);
      for (std::uint32_t i = 0; i < n; ++i) {
        std::int16_t s = static_cast<std::int16_t>(
            static_cast<unsigned char>(raw[2 * i]) |
            (static_cast<unsigned char>(raw[2 * i + 1]) << 8));
        wave.samples[i] = static_cast<float>(s) / 32768.0f;
      }
      wave.sample_rate = static_cast<int>(rate);
      return wave;
    } else {
      // Skip unknown chunks (LIST, fact, ...), padded to even size.
      in.ignore(chunk_size + (chunk_size & 1));
    }
  }
  throw DataError("wav: no data chunk found: " + path);
}

void save_wav(const std::string& path, const Waveform& wave) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("wav: cannot write file: " + path);
  const std::uint32_t n = static_cast<std::uint32_t>(wave.samples.size());
  const std::uint32_t data_bytes = n * 2;
  out.write("RIFF", 4);
  write_u32(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  write_u32(out, 16);
  write_u16(out, 1);  // PCM
  write_u16(out, 1);  // mono
  write_u32(out, static_cast<std::uint32_t>(wave.sample_rate));
  write_u32(out, static_cast<std::uint32_t>(wave.sample_rate) * 2);
  write_u16(out, 2);
  write_u16(out, 16);
  out.write("data", 4);
  write_u32(out, data_bytes);
  for (float s : wave.samples) {
    float c = std::clamp(s, -1.0f, 1.0f);
    std::int16_t q = static_cast<std::int16_t>(std::lround(c * 32767.0f));
    write_u16(out, static_cast<std::uint16_t>(q));
  }
  if (!out) throw DataError("wav: write failed: " + path);
}

}  // namespace sv

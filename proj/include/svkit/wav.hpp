// svkit/wav.hpp
//
// Copyright 2026 svkit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef SVKIT_WAV_HPP_
#define SVKIT_WAV_HPP_

#include <string>
#include <vector>

namespace sv {

// Mono PCM audio, samples scaled to [-1, 1] (divide by 32768).
struct Waveform {
  std::vector<float> samples;
  int sample_rate = 16000;
};

// Reads a RIFF/WAVE file.  Accepts only 16-bit PCM, mono, 16 kHz;
// anything else raises a DataError with a distinct message.
Waveform load_wav(const std::string& path);

// Writes 16-bit PCM mono.  Samples are clamped to [-1, 1].
void save_wav(const std::string& path, const Waveform& wave);

}  // namespace sv

#endif  // SVKIT_WAV_HPP_

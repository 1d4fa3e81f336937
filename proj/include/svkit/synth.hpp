// svkit/synth.hpp
//
// Copyright 2026 svkit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Deterministic synthetic speaker corpus.  Speaker identity is a distinct
// formant-like tone stack (dominant band + two harmonically related bands)
// amplitude-modulated at a speaker-specific rate.  Sliding-window feature
// normalization removes the static spectral envelope, so the modulation
// pattern is the trainable cue while untrained embeddings stay near chance.

#ifndef SVKIT_SYNTH_HPP_
#define SVKIT_SYNTH_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace sv {

struct SynthCorpusSpec {
  int num_speakers = 8;
  int utts_per_speaker = 20;
  double duration_s = 3.0;
  double noise_level = 0.05;
  std::uint64_t seed = 1;
  int heldout_per_speaker = 4;  // reserved for the trial list
};

struct CorpusPaths {
  std::string manifest;  // all utterances: speaker<TAB>wav_path
  std::string train;     // training subset in the same format
  std::string trials;    // balanced held-out pairs: label enroll test
  std::vector<std::pair<std::string, std::string>> entries;
};

// Speaker-specific signature values, exposed for spectral verification.
double speaker_dominant_hz(int speaker);
double speaker_am_rate_hz(int speaker);

// Writes WAVs plus manifest/train/trial files under out_dir.
CorpusPaths synth_corpus(const SynthCorpusSpec& spec,
                         const std::string& out_dir);

}  // namespace sv

#endif  // SVKIT_SYNTH_HPP_

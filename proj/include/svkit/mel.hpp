// svkit/mel.hpp
//
// Copyright 2026 svkit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef SVKIT_MEL_HPP_
#define SVKIT_MEL_HPP_

#include <string>
#include <vector>

#include "svkit/rng.hpp"
#include "svkit/wav.hpp"

namespace sv {

// Normalized log-Mel frames, D mel bins by L frames, row-major by bin.
struct MelFeature {
  int n_mels = 0;
  int n_frames = 0;
  std::vector<float> v;  // v[d * n_frames + l]

  float& at(int d, int l) { return v[static_cast<size_t>(d) * n_frames + l]; }
  float at(int d, int l) const {
    return v[static_cast<size_t>(d) * n_frames + l];
  }
};

struct MelOptions {
  int n_mels = 64;
  double frame_ms = 25.0;
  double shift_ms = 10.0;
  int fft_size = 512;       // frames are Hamming-windowed, zero-padded
  double fmin_hz = 0.0;
  double fmax_hz = 8000.0;
  double log_floor = 1e-10;  // applied before the natural log
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular filter center frequencies (Hz) for a bank spanning
// [fmin, fmax]; returned length is n_mels.
std::vector<double> mel_filter_centers_hz(int n_mels, double fmin_hz,
                                          double fmax_hz);

// Windowed power-spectrum log-Mel filterbank features.
// L = floor((num_samples - frame_samples) / shift_samples) + 1.
MelFeature log_mel(const Waveform& wave, const MelOptions& opts = {});

// Per-bin mean/variance normalization over a centered sliding window,
// truncated at the utterance edges.  Std is floored at 1e-8.
MelFeature cmvn_sliding(const MelFeature& feat, int window_frames = 300);

// Longer inputs: random start crop in train mode, center crop otherwise.
// Shorter inputs: cyclic repetition up to the target length.
MelFeature crop_or_pad(const MelFeature& feat, int target_frames, bool train,
                       Rng* rng);

struct SpecAugmentOptions {
  int freq_mask_max = 8;
  int time_mask_max = 20;
  int n_freq_masks = 1;
  int n_time_masks = 1;
};

// Zeroes one contiguous band per mask, width uniform in [0, max].
MelFeature spec_augment(const MelFeature& feat, const SpecAugmentOptions& opts,
                        Rng* rng);

// Debug feature dump: magic "SMLF", u32 D, u32 L, row-major f32 LE.
void write_smlf(const std::string& path, const MelFeature& feat);
MelFeature read_smlf(const std::string& path);

}  // namespace sv

#endif  // SVKIT_MEL_HPP_

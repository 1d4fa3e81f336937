// svkit/src/mel.cpp
//
// Copyright 2026 svkit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include "svkit/mel.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "svkit/common.hpp"

namespace sv {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Iterative radix-2 Cooley-Tukey; n must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& a) {
  const size_t n = a.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * kPi / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0);
      for (size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

}  // namespace

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

std::vector<double> mel_filter_centers_hz(int n_mels, double fmin_hz,
                                          double fmax_hz) {
  const double mel_lo = hz_to_mel(fmin_hz);
  const double mel_hi = hz_to_mel(fmax_hz);
  std::vector<double> centers(static_cast<size_t>(n_mels));
  for (int m = 0; m < n_mels; ++m)
    centers[static_cast<size_t>(m)] =
        mel_to_hz(mel_lo + (mel_hi - mel_lo) * (m + 1) / (n_mels + 1));
  return centers;
}

MelFeature log_mel(const Waveform& wave, const MelOptions& opts) {
  if (wave.sample_rate != 16000)
    throw DataError("log_mel: expected 16 kHz input");
  const int frame_samples =
      static_cast<int>(std::lround(opts.frame_ms * wave.sample_rate / 1000.0));
  const int shift_samples =
      static_cast<int>(std::lround(opts.shift_ms * wave.sample_rate / 1000.0));
  if (static_cast<int>(wave.samples.size()) < frame_samples)
    throw DataError("log_mel: input shorter than one frame");
  if (opts.fft_size < frame_samples)
    throw ConfigError("log_mel: fft_size smaller than the frame");
  const int n_frames =
      (static_cast<int>(wave.samples.size()) - frame_samples) / shift_samples +
      1;
  const int n_bins = opts.fft_size / 2 + 1;

  std::vector<double> window(static_cast<size_t>(frame_samples));
  for (int i = 0; i < frame_samples; ++i)
    window[static_cast<size_t>(i)] =
        0.54 - 0.46 * std::cos(2.0 * kPi * i / (frame_samples - 1));

  // Triangular weights, linear in mel between neighboring band edges.
  const double mel_lo = hz_to_mel(opts.fmin_hz);
  const double mel_hi = hz_to_mel(opts.fmax_hz);
  const double mel_step = (mel_hi - mel_lo) / (opts.n_mels + 1);
  std::vector<double> bin_mel(static_cast<size_t>(n_bins));
  for (int k = 0; k < n_bins; ++k)
    bin_mel[static_cast<size_t>(k)] =
        hz_to_mel(static_cast<double>(k) * wave.sample_rate / opts.fft_size);
  std::vector<std::vector<std::pair<int, double>>> filters(
      static_cast<size_t>(opts.n_mels));
  for (int m = 0; m < opts.n_mels; ++m) {
    const double left = mel_lo + mel_step * m;
    const double center = left + mel_step;
    const double right = center + mel_step;
    for (int k = 0; k < n_bins; ++k) {
      const double bm = bin_mel[static_cast<size_t>(k)];
      if (bm <= left || bm >= right) continue;
      const double w = bm <= center ? (bm - left) / mel_step
                                    : (right - bm) / mel_step;
      filters[static_cast<size_t>(m)].emplace_back(k, w);
    }
  }

  MelFeature feat;
  feat.n_mels = opts.n_mels;
  feat.n_frames = n_frames;
  feat.v.assign(static_cast<size_t>(opts.n_mels) * n_frames, 0.0f);

  std::vector<std::complex<double>> buf(static_cast<size_t>(opts.fft_size));
  std::vector<double> power(static_cast<size_t>(n_bins));
  for (int l = 0; l < n_frames; ++l) {
    const float* src = wave.samples.data() + static_cast<size_t>(l) * shift_samples;
    for (int i = 0; i < opts.fft_size; ++i)
      buf[static_cast<size_t>(i)] =
          i < frame_samples ? src[i] * window[static_cast<size_t>(i)] : 0.0;
    fft_inplace(buf);
    for (int k = 0; k < n_bins; ++k)
      power[static_cast<size_t>(k)] = std::norm(buf[static_cast<size_t>(k)]);
    for (int m = 0; m < opts.n_mels; ++m) {
      double e = 0.0;
      for (auto [k, w] : filters[static_cast<size_t>(m)])
        e += w * power[static_cast<size_t>(k)];
      feat.at(m, l) =
          static_cast<float>(std::log(std::max(e, opts.log_floor)));
    }
  }
  return feat;
}

MelFeature cmvn_sliding(const MelFeature& feat, int window_frames) {
  const int half = window_frames / 2;
  MelFeature out = feat;
  const int L = feat.n_frames;
  for (int d = 0; d < feat.n_mels; ++d) {
    // Prefix sums per bin so each window is O(1).
    std::vector<double> ps(static_cast<size_t>(L) + 1, 0.0);
    std::vector<double> ps2(static_cast<size_t>(L) + 1, 0.0);
    for (int l = 0; l < L; ++l) {
      const double x = feat.at(d, l);
      ps[static_cast<size_t>(l) + 1] = ps[static_cast<size_t>(l)] + x;
      ps2[static_cast<size_t>(l) + 1] = ps2[static_cast<size_t>(l)] + x * x;
    }
    for (int l = 0; l < L; ++l) {
      // Centered window, shifted inward near the edges so it always covers
      // window_frames frames when the utterance allows it.
      const int lo = std::clamp(l - half, 0, std::max(0, L - window_frames));
      const int hi = std::min(L, lo + window_frames);
      const int n = hi - lo;
      const double sum = ps[static_cast<size_t>(hi)] - ps[static_cast<size_t>(lo)];
      const double sum2 = ps2[static_cast<size_t>(hi)] - ps2[static_cast<size_t>(lo)];
      const double mean = sum / n;
      const double var = std::max(0.0, sum2 / n - mean * mean);
      const double std_dev = std::max(std::sqrt(var), 1e-8);
      out.at(d, l) = static_cast<float>((feat.at(d, l) - mean) / std_dev);
    }
  }
  return out;
}

MelFeature crop_or_pad(const MelFeature& feat, int target_frames, bool train,
                       Rng* rng) {
  if (feat.n_frames == target_frames) return feat;
  MelFeature out;
  out.n_mels = feat.n_mels;
  out.n_frames = target_frames;
  out.v.resize(static_cast<size_t>(feat.n_mels) * target_frames);
  if (feat.n_frames > target_frames) {
    const int span = feat.n_frames - target_frames;
    const int start =
        train ? static_cast<int>(rng->uniform_int(static_cast<std::uint64_t>(span) + 1))
              : span / 2;
    for (int d = 0; d < feat.n_mels; ++d)
      std::memcpy(&out.at(d, 0), &feat.v[static_cast<size_t>(d) * feat.n_frames + start],
                  sizeof(float) * static_cast<size_t>(target_frames));
  } else {
    for (int d = 0; d < feat.n_mels; ++d)
      for (int l = 0; l < target_frames; ++l)
        out.at(d, l) = feat.at(d, l % feat.n_frames);
  }
  return out;
}

MelFeature spec_augment(const MelFeature& feat, const SpecAugmentOptions& opts,
                        Rng* rng) {
  if (opts.freq_mask_max > feat.n_mels || opts.time_mask_max > feat.n_frames)
    throw ConfigError("spec_augment: mask maxima exceed feature dimensions");
  MelFeature out = feat;
  for (int i = 0; i < opts.n_freq_masks; ++i) {
    const int w = static_cast<int>(
        rng->uniform_int(static_cast<std::uint64_t>(opts.freq_mask_max) + 1));
    const int start = static_cast<int>(rng->uniform_int(
        static_cast<std::uint64_t>(feat.n_mels - w) + 1));
    for (int d = start; d < start + w; ++d)
      std::fill_n(&out.at(d, 0), feat.n_frames, 0.0f);
  }
  for (int i = 0; i < opts.n_time_masks; ++i) {
    const int w = static_cast<int>(
        rng->uniform_int(static_cast<std::uint64_t>(opts.time_mask_max) + 1));
    const int start = static_cast<int>(rng->uniform_int(
        static_cast<std::uint64_t>(feat.n_frames - w) + 1));
    for (int d = 0; d < feat.n_mels; ++d)
      std::fill_n(&out.at(d, start), w, 0.0f);
  }
  return out;
}

void write_smlf(const std::string& path, const MelFeature& feat) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("smlf: cannot write file: " + path);
  out.write("SMLF", 4);
  const std::uint32_t d = static_cast<std::uint32_t>(feat.n_mels);
  const std::uint32_t l = static_cast<std::uint32_t>(feat.n_frames);
  out.write(reinterpret_cast<const char*>(&d), 4);
  out.write(reinterpret_cast<const char*>(&l), 4);
  out.write(reinterpret_cast<const char*>(feat.v.data()),
            static_cast<std::streamsize>(feat.v.size() * sizeof(float)));
  if (!out) throw DataError("smlf: write failed: " + path);
}

MelFeature read_smlf(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("smlf: cannot open file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "SMLF", 4) != 0)
    throw DataError("smlf: bad magic: " + path);
  std::uint32_t d = 0, l = 0;
  in.read(reinterpret_cast<char*>(&d), 4);
  in.read(reinterpret_cast<char*>(&l), 4);
  MelFeature feat;
  feat.n_mels = static_cast<int>(d);
  feat.n_frames = static_cast<int>(l);
  feat.v.resize(static_cast<size_t>(d) * l);
  in.read(reinterpret_cast<char*>(feat.v.data()),
          static_cast<std::streamsize>(feat.v.size() * sizeof(float)));
  if (!in) throw DataError("smlf: truncated file: " + path);
  return feat;
}

}  // namespace sv

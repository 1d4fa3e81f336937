// svkit/src/synth.cpp
//
// Copyright 2026 svkit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include "svkit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "svkit/common.hpp"
#include "svkit/rng.hpp"
#include "svkit/wav.hpp"

namespace sv {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr int kSampleRate = 16000;
constexpr int kMaxSpeakers = 20;

std::string speaker_id(int s) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "spk%02d", s);
  return buf;
}

}  // namespace

double speaker_dominant_hz(int speaker) { return 500.0 + 300.0 * speaker; }

// Fast enough that a fraction of a second of frames sees whole cycles,
// and below the 50 Hz frame rate for every allowed speaker index.
double speaker_am_rate_hz(int speaker) { return 4.0 + 2.0 * speaker; }

CorpusPaths synth_corpus(const SynthCorpusSpec& spec,
                         const std::string& out_dir) {
  if (spec.num_speakers < 2 || spec.num_speakers > kMaxSpeakers)
    throw ConfigError("synth: num_speakers must be in [2, " +
                      std::to_string(kMaxSpeakers) + "]");
  if (spec.utts_per_speaker < 1 || spec.duration_s <= 0.1)
    throw ConfigError("synth: need at least 1 utterance of > 0.1 s");
  if (spec.heldout_per_speaker < 0 ||
      spec.heldout_per_speaker >= spec.utts_per_speaker)
    throw ConfigError("synth: heldout_per_speaker must leave training data");

  std::filesystem::create_directories(out_dir);
  const int n_samples = static_cast<int>(spec.duration_s * kSampleRate);

  CorpusPaths paths;
  paths.manifest = out_dir + "/manifest.tsv";
  paths.train = out_dir + "/train.tsv";
  paths.trials = out_dir + "/trials.txt";

  std::ofstream manifest(paths.manifest);
  std::ofstream train(paths.train);
  if (!manifest || !train)
    throw DataError("synth: cannot write manifests under " + out_dir);

  std::vector<std::vector<std::string>> heldout(
      static_cast<size_t>(spec.num_speakers));

  for (int s = 0; s < spec.num_speakers; ++s) {
    const double f0 = speaker_dominant_hz(s);
    const double am = speaker_am_rate_hz(s);
    // Formant-like stack: dominant band plus sub- and super-harmonic bands.
    // Keep the upper band comfortably below Nyquist for high speaker ids.
    const double upper = 1.5 * f0 < 7600.0 ? 1.5 * f0 : 1.2 * f0;
    const double freqs[3] = {f0, 0.5 * f0, upper};
    const double amps[3] = {1.0, 0.5, 0.4};
    for (int u = 0; u < spec.utts_per_speaker; ++u) {
      Rng rng = Rng::stream(spec.seed, "synth", static_cast<std::uint64_t>(s),
                            static_cast<std::uint64_t>(u));
      double phase[3], jitter[3];
      for (int k = 0; k < 3; ++k) {
        phase[k] = rng.uniform() * 2.0 * kPi;
        jitter[k] = 1.0 + 0.005 * (rng.uniform() * 2.0 - 1.0);
      }
      const double am_phase = rng.uniform() * 2.0 * kPi;

      Waveform wave;
      wave.sample_rate = kSampleRate;
      wave.samples.resize(static_cast<size_t>(n_samples));
      for (int i = 0; i < n_samples; ++i) {
        const double t = static_cast<double>(i) / kSampleRate;
        double v = 0.0;
        for (int k = 0; k < 3; ++k)
          v += amps[k] * std::sin(2.0 * kPi * freqs[k] * jitter[k] * t + phase[k]);
        const double mod = 0.55 + 0.45 * std::sin(2.0 * kPi * am * t + am_phase);
        v = 0.25 * v * mod + spec.noise_level * rng.normal();
        wave.samples[static_cast<size_t>(i)] = static_cast<float>(v);
      }

      char name[32];
      std::snprintf(name, sizeof(name), "spk%02d_utt%02d.wav", s, u);
      const std::string path = out_dir + "/" + name;
      save_wav(path, wave);
      manifest << speaker_id(s) << "\t" << path << "\n";
      paths.entries.emplace_back(speaker_id(s), path);
      if (u < spec.utts_per_speaker - spec.heldout_per_speaker)
        train << speaker_id(s) << "\t" << path << "\n";
      else
        heldout[static_cast<size_t>(s)].push_back(path);
    }
  }
  manifest.close();
  train.close();

  // Balanced trial list over the held-out utterances: every same-speaker
  // pair as a target, an equal number of seeded cross-speaker pairs.
  std::ofstream trials(paths.trials);
  if (!trials) throw DataError("synth: cannot write trial list");
  int n_targets = 0;
  for (int s = 0; s < spec.num_speakers; ++s) {
    const auto& utts = heldout[static_cast<size_t>(s)];
    for (size_t i = 0; i < utts.size(); ++i)
      for (size_t j = i + 1; j < utts.size(); ++j) {
        trials << "1 " << utts[i] << " " << utts[j] << "\n";
        ++n_targets;
      }
  }
  Rng pair_rng = Rng::stream(spec.seed, "trials");
  int emitted = 0;
  while (emitted < n_targets) {
    const int a = static_cast<int>(
        pair_rng.uniform_int(static_cast<std::uint64_t>(spec.num_speakers)));
    const int b = static_cast<int>(
        pair_rng.uniform_int(static_cast<std::uint64_t>(spec.num_speakers)));
    if (a == b) continue;
    const auto& ua = heldout[static_cast<size_t>(a)];
    const auto& ub = heldout[static_cast<size_t>(b)];
    if (ua.empty() || ub.empty())
      throw ConfigError("synth: trial list needs held-out utterances");
    const auto& ea = ua[pair_rng.uniform_int(ua.size())];
    const auto& eb = ub[pair_rng.uniform_int(ub.size())];
    trials << "0 " << ea << " " << eb << "\n";
    ++emitted;
  }
  if (!trials) throw DataError("synth: trial list write failed");
  return paths;
}

}  // namespace sv

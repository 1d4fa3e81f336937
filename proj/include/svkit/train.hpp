// svkit/train.hpp
//
// Copyright 2026 svkit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Single-pass training: SGD with momentum and weight decay, reduce-on-
// plateau schedule, deterministic data order/augmentation derived from
// (seed, epoch, utterance), resumable checkpoints.

#ifndef SVKIT_TRAIN_HPP_
#define SVKIT_TRAIN_HPP_

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "svkit/checkpoint.hpp"
#include "svkit/config.hpp"
#include "svkit/mel.hpp"
#include "svkit/model.hpp"

namespace sv {

// Normalized full-length features cached in memory per utterance.
struct Dataset {
  std::vector<std::string> speakers;  // unique ids, label order
  std::vector<int> labels;            // per utterance
  std::vector<std::string> paths;     // per utterance
  std::vector<MelFeature> feats;      // per utterance, CMVN applied

  int num_speakers() const { return static_cast<int>(speakers.size()); }
  int size() const { return static_cast<int>(labels.size()); }
};

Dataset load_dataset(const std::string& manifest_path, int n_mels,
                     int cmvn_window);

// Optimizer and schedule state; serialized under "opt/" in checkpoints.
struct OptState {
  float lr = 0.0f;
  int epoch = 0;  // completed epochs
  float best_loss = 0.0f;
  bool has_best = false;
  int bad_epochs = 0;
  std::vector<std::vector<float>> momentum;  // parallel to trainable params

  void init(const ParamStore<float>& params, float initial_lr);
};

// w -= lr * buf where buf = momentum * buf + (grad + weight_decay * w).
// Decay applies to every trainable tensor, gradient or not.  Non-finite
// updates abort with a numeric error.
void sgd_step(ParamStore<float>& params, OptState& state, float momentum,
              float weight_decay);

// Reduce-on-plateau: an epoch "improves" when loss < best - threshold;
// `patience` non-improving epochs in a row multiply lr by `factor`.
// Returns true when the rate dropped this epoch.
bool plateau_update(OptState& state, float loss, int patience, float factor,
                    float threshold);

struct EpochReport {
  float loss = 0.0f;  // mean cross-entropy over utterances
  float acc = 0.0f;   // training argmax accuracy
  double seconds = 0.0;
};

// One pass over the dataset.  `epoch` is 1-based and, with the run seed,
// fully determines shuffling, crops, masking, and dropout.
EpochReport train_epoch(Model<float>& model, OptState& state,
                        const Dataset& data, const RunConfig& cfg, int epoch);

void save_train_checkpoint(const std::string& path, const Model<float>& model,
                           const OptState& state, const std::string& config_text);
void load_train_checkpoint(const std::string& path, Model<float>* model,
                           OptState* state);

// Full run: dataset load, init or resume, epoch loop with metrics log and
// per-epoch checkpointing.  Returns the final checkpoint path.
std::string run_training(const RunConfig& cfg, bool resume, std::ostream* log);

}  // namespace sv

#endif  // SVKIT_TRAIN_HPP_

// svkit/config.hpp
//
// Copyright 2026 svkit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Flat `key = value` run configuration with [sections].  The serialized
// text is embedded into checkpoints so a run can be reproduced from its
// artifact alone.  Unknown keys are rejected.

#ifndef SVKIT_CONFIG_HPP_
#define SVKIT_CONFIG_HPP_

#include <cstdint>
#include <string>

#include "svkit/model.hpp"

namespace sv {

struct RunConfig {
  // [data]
  std::string data_dir;
  std::string manifest;
  std::string trials;
  int n_mels = 64;
  int crop_frames = 64;  // desk-scale crop; full-length runs use 1200
  int cmvn_window = 300;
  bool augment = true;

  // [model]
  std::string ablation = "mla-sap-fr-dln";
  std::array<int, 5> channels{{32, 32, 64, 128, 256}};
  std::array<int, 4> blocks{{3, 4, 6, 3}};
  int num_speakers = 0;  // 0: derive from the manifest
  float leaky_slope = 0.01f;
  float dropout = 0.2f;
  int reduction = 8;
  float alpha = 10.0f;
  bool fr_bias = true;

  // [train]
  float lr = 0.1f;
  float momentum = 0.9f;
  float weight_decay = 1e-4f;
  int batch_size = 32;
  int epochs = 30;
  int plateau_patience = 5;
  float plateau_factor = 0.1f;
  float plateau_threshold = 1e-4f;
  std::uint64_t seed = 1;

  // [io]
  std::string checkpoint = "model.smla";
  std::string metrics_log = "metrics.tsv";

  // Restores the published full-scale hyperparameters.
  void apply_full_scale_hparams() {
    crop_frames = 1200;
    batch_size = 96;
    epochs = 200;
  }

  ModelConfig model_config(int resolved_speakers) const;
  std::string serialize() const;
};

// Parses serialized config text; keys not in RunConfig are an error.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);

}  // namespace sv

#endif  // SVKIT_CONFIG_HPP_

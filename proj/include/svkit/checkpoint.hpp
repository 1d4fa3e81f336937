// svkit/checkpoint.hpp
//
// Copyright 2026 svkit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Binary snapshot format, magic "SMLA": u32 version, a UTF-8 config blob,
// then named tensors (u16 name length, name, u8 rank, u32 dims, f32 LE
// data) until end of file.  Optimizer state rides along under "opt/".

#ifndef SVKIT_CHECKPOINT_HPP_
#define SVKIT_CHECKPOINT_HPP_

#include <string>
#include <vector>

#include "svkit/model.hpp"

namespace sv {

struct TensorRecord {
  std::string name;
  std::vector<int> shape;
  std::vector<float> data;
};

struct Checkpoint {
  std::string config_text;
  std::vector<TensorRecord> tensors;

  const TensorRecord* find(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return &t;
    return nullptr;
  }
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

// Copies every model tensor (weights plus batch-norm running statistics)
// into records, in parameter creation order.
void snapshot_params(const ParamStore<float>& params, Checkpoint* ckpt);

// Writes records back into an initialized model.  The name sets must agree
// exactly and every shape must match; failures name the offending tensor.
// Records outside the parameter store ("opt/...") are ignored here.
void restore_params(const Checkpoint& ckpt, ParamStore<float>* params);

}  // namespace sv

#endif  // SVKIT_CHECKPOINT_HPP_

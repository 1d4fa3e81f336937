// svkit/src/train.cpp
//
// Copyright 2026 svkit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include "svkit/train.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "svkit/common.hpp"
#include "svkit/ops.hpp"
#include "svkit/rng.hpp"
#include "svkit/wav.hpp"

namespace sv {

Dataset load_dataset(const std::string& manifest_path, int n_mels,
                     int cmvn_window) {
  std::ifstream in(manifest_path);
  if (!in) throw DataError("dataset: cannot open manifest: " + manifest_path);
  Dataset data;
  std::map<std::string, int> label_of;
  std::string line;
  int lineno = 0;
  MelOptions mel_opts;
  mel_opts.n_mels = n_mels;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw DataError("dataset: expected speaker<TAB>path at line " +
                      std::to_string(lineno) + " of " + manifest_path);
    const std::string spk = line.substr(0, tab);
    const std::string path = line.substr(tab + 1);
    auto [it, inserted] =
        label_of.emplace(spk, static_cast<int>(data.speakers.size()));
    if (inserted) data.speakers.push_back(spk);
    data.labels.push_back(it->second);
    data.paths.push_back(path);
    data.feats.push_back(
        cmvn_sliding(log_mel(load_wav(path), mel_opts), cmvn_window));
  }
  if (data.labels.empty())
    throw ConfigError("dataset: manifest is empty: " + manifest_path);
  return data;
}

void OptState::init(const ParamStore<float>& params, float initial_lr) {
  lr = initial_lr;
  epoch = 0;
  best_loss = 0.0f;
  has_best = false;
  bad_epochs = 0;
  momentum.clear();
  for (const auto& [name, t] : params.items)
    if (t.requires_grad())
      momentum.emplace_back(static_cast<size_t>(t.size()), 0.0f);
}

void sgd_step(ParamStore<float>& params, OptState& state, float momentum,
              float weight_decay) {
  size_t mi = 0;
  for (auto& [name, t] : params.items) {
    if (!t.requires_grad()) continue;
    if (mi >= state.momentum.size())
      throw ConfigError("sgd: optimizer state not initialized for this model");
    std::vector<float>& buf = state.momentum[mi++];
    std::vector<float>& w = t.data();
    const bool have_grad = t.has_grad();
    const std::vector<float>& g = t.node()->grad;
    for (size_t i = 0; i < w.size(); ++i) {
      const float gi = (have_grad ? g[i] : 0.0f) + weight_decay * w[i];
      buf[i] = momentum * buf[i] + gi;
      w[i] -= state.lr * buf[i];
      if (!std::isfinite(w[i]))
        throw NumericError("sgd: non-finite update in " + name);
    }
  }
}

bool plateau_update(OptState& state, float loss, int patience, float factor,
                    float threshold) {
  if (state.has_best && loss < state.best_loss - threshold) {
    state.best_loss = loss;
    state.bad_epochs = 0;
    return false;
  }
  if (!state.has_best) {
    state.best_loss = loss;
    state.has_best = true;
  }
  ++state.bad_epochs;
  if (state.bad_epochs >= patience) {
    state.lr *= factor;
    state.bad_epochs = 0;
    return true;
  }
  return false;
}

namespace {

// Batch input tensor from cached features with per-utterance deterministic
// crop and masking streams.
Tensor<float> make_batch(const Dataset& data, const std::vector<int>& utts,
                         const RunConfig& cfg, int epoch, bool train) {
  const int b = static_cast<int>(utts.size());
  const int d = cfg.n_mels, l = cfg.crop_frames;
  Tensor<float> x = Tensor<float>::zeros({b, 1, d, l});
  float* xv = x.data().data();
  for (int i = 0; i < b; ++i) {
    const int u = utts[static_cast<size_t>(i)];
    Rng crop_rng = Rng::stream(cfg.seed, "crop", static_cast<std::uint64_t>(epoch),
                               static_cast<std::uint64_t>(u));
    MelFeature f = crop_or_pad(data.feats[static_cast<size_t>(u)], l, train,
                               &crop_rng);
    if (train && cfg.augment) {
      Rng aug_rng = Rng::stream(cfg.seed, "augment",
                                static_cast<std::uint64_t>(epoch),
                                static_cast<std::uint64_t>(u));
      f = spec_augment(f, SpecAugmentOptions{}, &aug_rng);
    }
    std::copy(f.v.begin(), f.v.end(),
              xv + static_cast<std::int64_t>(i) * d * l);
  }
  return x;
}

}  // namespace

EpochReport train_epoch(Model<float>& model, OptState& state,
                        const Dataset& data, const RunConfig& cfg, int epoch) {
  if (data.size() == 0) throw ConfigError("train: empty dataset");
  const auto t0 = std::chrono::steady_clock::now();

  std::vector<int> order(static_cast<size_t>(data.size()));
  for (int i = 0; i < data.size(); ++i) order[static_cast<size_t>(i)] = i;
  Rng shuffle_rng = Rng::stream(cfg.seed, "order", static_cast<std::uint64_t>(epoch));
  for (int i = data.size() - 1; i > 0; --i)
    std::swap(order[static_cast<size_t>(i)],
              order[shuffle_rng.uniform_int(static_cast<std::uint64_t>(i) + 1)]);

  double loss_sum = 0.0;
  std::int64_t n_seen = 0, n_correct = 0;
  int step = 0;
  for (int start = 0; start < data.size(); start += cfg.batch_size, ++step) {
    const int bsz = std::min(cfg.batch_size, data.size() - start);
    // A lone utterance has no batch statistics; fold-in is not worth the
    // nondeterminism, so the trailing singleton is skipped.
    if (bsz < 2 && data.size() > 1) continue;
    std::vector<int> utts(order.begin() + start, order.begin() + start + bsz);
    std::vector<int> labels;
    for (int u : utts) labels.push_back(data.labels[static_cast<size_t>(u)]);

    Tensor<float> x = make_batch(data, utts, cfg, epoch, true);
    Rng drop_rng = Rng::stream(cfg.seed, "dropout",
                               static_cast<std::uint64_t>(epoch),
                               static_cast<std::uint64_t>(step));
    auto res = model.forward(x, true, &drop_rng);
    Tensor<float> loss = cross_entropy_softmax(res.logits, labels);
    const float batch_loss = loss.item();
    if (!std::isfinite(batch_loss))
      throw NumericError("train: non-finite loss at epoch " +
                         std::to_string(epoch));

    const int k = res.logits.dim(1);
    const float* lv = res.logits.data().data();
    for (int i = 0; i < bsz; ++i) {
      int arg = 0;
      for (int j = 1; j < k; ++j)
        if (lv[static_cast<std::int64_t>(i) * k + j] >
            lv[static_cast<std::int64_t>(i) * k + arg])
          arg = j;
      if (arg == labels[static_cast<size_t>(i)]) ++n_correct;
    }

    for (auto& [name, t] : model.params().items) t.zero_grad();
    loss.backward();
    sgd_step(model.params(), state, cfg.momentum, cfg.weight_decay);

    loss_sum += static_cast<double>(batch_loss) * bsz;
    n_seen += bsz;
  }
  if (n_seen == 0) throw ConfigError("train: no usable batches");

  EpochReport rep;
  rep.loss = static_cast<float>(loss_sum / static_cast<double>(n_seen));
  rep.acc = static_cast<float>(n_correct) / static_cast<float>(n_seen);
  rep.seconds = std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
  return rep;
}

void save_train_checkpoint(const std::string& path, const Model<float>& model,
                           const OptState& state,
                           const std::string& config_text) {
  Checkpoint ckpt;
  ckpt.config_text = config_text;
  snapshot_params(model.params(), &ckpt);
  size_t mi = 0;
  for (const auto& [name, t] : model.params().items) {
    if (!t.requires_grad()) continue;
    TensorRecord rec;
    rec.name = "opt/m/" + name;
    rec.shape = t.shape();
    rec.data = state.momentum[mi++];
    ckpt.tensors.push_back(std::move(rec));
  }
  TensorRecord st;
  st.name = "opt/state";
  st.shape = {5};
  st.data = {state.lr, static_cast<float>(state.epoch), state.best_loss,
             static_cast<float>(state.bad_epochs),
             state.has_best ? 1.0f : 0.0f};
  ckpt.tensors.push_back(std::move(st));
  save_checkpoint(path, ckpt);
}

void load_train_checkpoint(const std::string& path, Model<float>* model,
                           OptState* state) {
  Checkpoint ckpt = load_checkpoint(path);
  restore_params(ckpt, &model->params());
  state->momentum.clear();
  for (const auto& [name, t] : model->params().items) {
    if (!t.requires_grad()) continue;
    const TensorRecord* rec = ckpt.find("opt/m/" + name);
    if (!rec)
      throw DataError("checkpoint: missing optimizer buffer for " + name);
    if (rec->shape != t.shape())
      throw DataError("checkpoint: shape mismatch for tensor opt/m/" + name);
    state->momentum.push_back(rec->data);
  }
  const TensorRecord* st = ckpt.find("opt/state");
  if (!st || st->data.size() != 5)
    throw DataError("checkpoint: missing optimizer state record");
  state->lr = st->data[0];
  state->epoch = static_cast<int>(st->data[1]);
  state->best_loss = st->data[2];
  state->bad_epochs = static_cast<int>(st->data[3]);
  state->has_best = st->data[4] != 0.0f;
}

std::string run_training(const RunConfig& cfg, bool resume,
                         std::ostream* log) {
  Dataset data = load_dataset(cfg.manifest, cfg.n_mels, cfg.cmvn_window);
  const int n_spk =
      cfg.num_speakers > 0 ? cfg.num_speakers : data.num_speakers();
  if (data.num_speakers() > n_spk)
    throw ConfigError("train: manifest has more speakers than configured");

  RunConfig resolved = cfg;
  resolved.num_speakers = n_spk;
  const std::string config_text = resolved.serialize();

  Model<float> model(resolved.model_config(n_spk));
  Rng init_rng = Rng::stream(cfg.seed, "init");
  model.init(init_rng);
  OptState state;
  if (resume) {
    load_train_checkpoint(cfg.checkpoint, &model, &state);
  } else {
    state.init(model.params(), cfg.lr);
  }

  std::ofstream metrics(cfg.metrics_log, resume ? std::ios::app : std::ios::trunc);
  if (!metrics) throw DataError("train: cannot write metrics log: " + cfg.metrics_log);

  const std::string best_path = cfg.checkpoint + ".best";
  for (int epoch = state.epoch + 1; epoch <= cfg.epochs; ++epoch) {
    const float epoch_lr = state.lr;
    EpochReport rep = train_epoch(model, state, data, resolved, epoch);
    const bool improved = !state.has_best ||
                          rep.loss < state.best_loss - cfg.plateau_threshold;
    plateau_update(state, rep.loss, cfg.plateau_patience, cfg.plateau_factor,
                   cfg.plateau_threshold);
    state.epoch = epoch;
    metrics << epoch << "\t" << rep.loss << "\t" << rep.acc << "\t"
            << epoch_lr << "\n";
    metrics.flush();
    if (log)
      (*log) << "epoch " << epoch << " loss " << rep.loss << " acc "
             << rep.acc << " lr " << epoch_lr << " (" << rep.seconds
             << " s)\n";
    save_train_checkpoint(cfg.checkpoint, model, state, config_text);
    if (improved)
      save_train_checkpoint(best_path, model, state, config_text);
  }
  return cfg.checkpoint;
}

}  // namespace sv

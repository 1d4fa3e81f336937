// svkit/tests/test_train.cpp
//
// Copyright 2026 svkit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "svkit/synth.hpp"
#include "svkit/train.hpp"

using sv::Model;
using sv::OptState;
using sv::ParamStore;
using sv::Rng;
using sv::RunConfig;
using Tf = sv::Tensor<float>;

namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::temp_directory_path() / name;
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& p) const { return (path / p).string(); }
};

sv::ModelConfig tiny_model_config(int speakers) {
  sv::ModelConfig cfg;
  cfg.input_dim = 16;
  cfg.channels = {8, 8, 16, 32, 64};
  cfg.blocks = {1, 1, 1, 1};
  cfg.num_speakers = speakers;
  cfg.dropout_rate = 0.1f;
  return cfg;
}

// Small corpus + config for end-to-end loop tests.
RunConfig tiny_run_config(const TempDir& dir, int speakers, int utts) {
  sv::SynthCorpusSpec spec;
  spec.num_speakers = speakers;
  spec.utts_per_speaker = utts;
  spec.duration_s = 1.0;
  spec.heldout_per_speaker = 0;
  spec.seed = 99;
  auto paths = sv::synth_corpus(spec, dir / "corpus");
  RunConfig cfg;
  cfg.manifest = paths.manifest;
  cfg.n_mels = 16;
  cfg.crop_frames = 40;
  cfg.cmvn_window = 60;
  cfg.channels = {8, 8, 16, 32, 64};
  cfg.blocks = {1, 1, 1, 1};
  cfg.dropout = 0.1f;
  cfg.batch_size = 4;
  cfg.lr = 0.05f;
  cfg.checkpoint = dir / "model.smla";
  cfg.metrics_log = dir / "metrics.tsv";
  return cfg;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("sgd follows the momentum recurrence exactly") {
  ParamStore<float> params;
  params.add("w", Tf::from_data({2}, {1.0f, -2.0f}, true));
  OptState state;
  state.init(params, 0.5f);
  REQUIRE(state.momentum.size() == 1);

  // Step 1 with grad g: buf = g, w -= lr * g.
  params.get("w").grad() = {0.1f, 0.2f};
  sv::sgd_step(params, state, 0.9f, 0.0f);
  CHECK(params.get("w").data()[0] == doctest::Approx(1.0f - 0.5f * 0.1f));
  CHECK(params.get("w").data()[1] == doctest::Approx(-2.0f - 0.5f * 0.2f));

  // Step 2, same grad: buf = 0.9 g + g = 1.9 g.
  const float w0 = params.get("w").data()[0];
  params.get("w").grad() = {0.1f, 0.2f};
  sv::sgd_step(params, state, 0.9f, 0.0f);
  CHECK(params.get("w").data()[0] == doctest::Approx(w0 - 0.5f * 1.9f * 0.1f));
}

TEST_CASE("weight decay alone shrinks parameters") {
  ParamStore<float> params;
  params.add("w", Tf::from_data({3}, {1.0f, -4.0f, 0.5f}, true));
  OptState state;
  state.init(params, 0.1f);
  const std::vector<float> before = params.get("w").data();
  sv::sgd_step(params, state, 0.0f, 1e-5f);  // zero grad, zero momentum buf
  double n0 = 0, n1 = 0;
  for (size_t i = 0; i < 3; ++i) {
    CHECK(params.get("w").data()[i] ==
          doctest::Approx(before[i] * (1.0f - 0.1f * 1e-5f)));
    n0 += before[i] * before[i];
    n1 += params.get("w").data()[i] * params.get("w").data()[i];
  }
  CHECK(n1 < n0);
}

TEST_CASE("non-finite updates raise a numeric error naming the tensor") {
  ParamStore<float> params;
  params.add("w", Tf::from_data({1}, {1.0f}, true));
  OptState state;
  state.init(params, 1.0f);
  params.get("w").grad() = {std::numeric_limits<float>::infinity()};
  CHECK_THROWS_WITH_AS(sv::sgd_step(params, state, 0.9f, 0.0f),
                       doctest::Contains("w"), sv::NumericError);
}

TEST_CASE("plateau schedule drops at fixed cadence under constant loss") {
  OptState state;
  state.lr = 1.0f;
  std::vector<int> drops;
  for (int epoch = 1; epoch <= 9; ++epoch)
    if (sv::plateau_update(state, 1.0f, 3, 0.1f, 1e-4f)) drops.push_back(epoch);
  CHECK(drops == std::vector<int>{3, 6, 9});
  CHECK(state.lr == doctest::Approx(1e-3f));
}

TEST_CASE("a single improvement resets the plateau counter") {
  OptState state;
  state.lr = 1.0f;
  const std::vector<float> losses = {1.0f, 1.0f, 0.9f, 0.9f, 0.9f, 0.9f};
  std::vector<int> drops;
  for (size_t i = 0; i < losses.size(); ++i)
    if (sv::plateau_update(state, losses[i], 3, 0.1f, 1e-4f))
      drops.push_back(static_cast<int>(i) + 1);
  CHECK(drops == std::vector<int>{6});  // dip at epoch 3 restarts the count
}

TEST_CASE("training checkpoints round-trip bit-exactly") {
  TempDir dir("svkit_ckpt_test");
  Model<float> model(tiny_model_config(3));
  Rng rng = Rng::stream(5, "init");
  model.init(rng);
  OptState state;
  state.init(model.params(), 0.1f);
  state.epoch = 7;
  state.best_loss = 0.25f;
  state.has_best = true;
  state.bad_epochs = 2;
  Rng mrng = Rng::stream(5, "buf");
  for (auto& buf : state.momentum)
    for (float& v : buf) v = static_cast<float>(mrng.normal());

  const std::string path = dir / "ck.smla";
  sv::save_train_checkpoint(path, model, state, "config-blob");

  Model<float> loaded(tiny_model_config(3));
  Rng rng2 = Rng::stream(6, "init");
  loaded.init(rng2);
  OptState lstate;
  sv::load_train_checkpoint(path, &loaded, &lstate);

  for (size_t i = 0; i < model.params().items.size(); ++i) {
    const auto& a = model.params().items[i].second;
    const auto& b = loaded.params().items[i].second;
    REQUIRE(model.params().items[i].first == loaded.params().items[i].first);
    CHECK(std::memcmp(a.data().data(), b.data().data(),
                      a.data().size() * sizeof(float)) == 0);
  }
  REQUIRE(lstate.momentum.size() == state.momentum.size());
  for (size_t i = 0; i < state.momentum.size(); ++i)
    CHECK(std::memcmp(state.momentum[i].data(), lstate.momentum[i].data(),
                      state.momentum[i].size() * sizeof(float)) == 0);
  CHECK(lstate.epoch == 7);
  CHECK(lstate.lr == 0.1f);
  CHECK(lstate.best_loss == 0.25f);
  CHECK(lstate.has_best);
  CHECK(lstate.bad_epochs == 2);
  CHECK(sv::load_checkpoint(path).config_text == "config-blob");
}

TEST_CASE("corrupt or mismatched checkpoints are rejected distinctly") {
  TempDir dir("svkit_ckpt_err_test");
  Model<float> model(tiny_model_config(3));
  Rng rng = Rng::stream(5, "init");
  model.init(rng);
  OptState state;
  state.init(model.params(), 0.1f);
  const std::string path = dir / "ck.smla";
  sv::save_train_checkpoint(path, model, state, "cfg");

  SUBCASE("bad magic") {
    std::string bytes = slurp(path);
    bytes[0] = 'X';
    std::ofstream(dir / "bad.smla", std::ios::binary) << bytes;
    CHECK_THROWS_WITH_AS(sv::load_checkpoint(dir / "bad.smla"),
                         doctest::Contains("magic"), sv::DataError);
  }
  SUBCASE("unsupported version") {
    std::string bytes = slurp(path);
    bytes[4] = 9;
    std::ofstream(dir / "v9.smla", std::ios::binary) << bytes;
    CHECK_THROWS_WITH_AS(sv::load_checkpoint(dir / "v9.smla"),
                         doctest::Contains("version"), sv::DataError);
  }
  SUBCASE("truncated file") {
    std::string bytes = slurp(path);
    bytes.resize(bytes.size() / 2);
    std::ofstream(dir / "cut.smla", std::ios::binary) << bytes;
    CHECK_THROWS_AS(sv::load_checkpoint(dir / "cut.smla"), sv::DataError);
  }
  SUBCASE("different speaker count names the classifier tensor") {
    Model<float> other(tiny_model_config(5));
    Rng r2 = Rng::stream(5, "init");
    other.init(r2);
    OptState s2;
    CHECK_THROWS_WITH_AS(sv::load_train_checkpoint(path, &other, &s2),
                         doctest::Contains("cls/"), sv::DataError);
  }
}

TEST_CASE("zero learning rate leaves parameters bit-identical") {
  TempDir dir("svkit_lr0_test");
  RunConfig cfg = tiny_run_config(dir, 3, 3);
  cfg.lr = 0.0f;
  cfg.weight_decay = 0.0f;

  sv::Dataset data = sv::load_dataset(cfg.manifest, cfg.n_mels, cfg.cmvn_window);
  RunConfig resolved = cfg;
  resolved.num_speakers = data.num_speakers();
  Model<float> model(resolved.model_config(data.num_speakers()));
  Rng rng = Rng::stream(cfg.seed, "init");
  model.init(rng);
  std::vector<std::vector<float>> before;
  for (auto& [name, t] : model.params().items) before.push_back(t.data());

  OptState state;
  state.init(model.params(), 0.0f);
  auto rep = sv::train_epoch(model, state, data, resolved, 1);
  CHECK(rep.loss > 0.0f);  // loss is still reported
  sv::train_epoch(model, state, data, resolved, 2);

  size_t i = 0;
  for (auto& [name, t] : model.params().items) {
    if (name.find("/rm") == std::string::npos &&
        name.find("/rv") == std::string::npos) {
      // Weights untouched; running batch-norm statistics do update.
      CHECK(std::memcmp(before[i].data(), t.data().data(),
                        before[i].size() * sizeof(float)) == 0);
    }
    ++i;
  }
}

TEST_CASE("fixed seed reproduces the loss sequence; resume is bit-exact") {
  TempDir dir("svkit_resume_test");
  RunConfig cfg = tiny_run_config(dir, 3, 4);
  cfg.epochs = 4;
  cfg.seed = 77;

  sv::run_training(cfg, false, nullptr);
  const std::string full_metrics = slurp(cfg.metrics_log);

  // Same run split at epoch 2.
  RunConfig half = cfg;
  half.checkpoint = dir / "model2.smla";
  half.metrics_log = dir / "metrics2.tsv";
  half.epochs = 2;
  sv::run_training(half, false, nullptr);
  half.epochs = 4;
  sv::run_training(half, true, nullptr);

  CHECK(slurp(half.metrics_log) == full_metrics);
  // Tensor payloads identical; the embedded config differs only in paths.
  sv::Checkpoint a = sv::load_checkpoint(cfg.checkpoint);
  sv::Checkpoint b = sv::load_checkpoint(half.checkpoint);
  REQUIRE(a.tensors.size() == b.tensors.size());
  for (size_t i = 0; i < a.tensors.size(); ++i) {
    REQUIRE(a.tensors[i].name == b.tensors[i].name);
    CHECK(std::memcmp(a.tensors[i].data.data(), b.tensors[i].data.data(),
                      a.tensors[i].data.size() * sizeof(float)) == 0);
  }
}

TEST_CASE("two separated speakers beat chance within twenty epochs") {
  TempDir dir("svkit_learn_test");
  RunConfig cfg = tiny_run_config(dir, 2, 8);
  cfg.epochs = 20;
  cfg.lr = 0.1f;
  cfg.seed = 3;

  sv::Dataset data = sv::load_dataset(cfg.manifest, cfg.n_mels, cfg.cmvn_window);
  RunConfig resolved = cfg;
  resolved.num_speakers = 2;
  Model<float> model(resolved.model_config(2));
  Rng rng = Rng::stream(cfg.seed, "init");
  model.init(rng);
  OptState state;
  state.init(model.params(), cfg.lr);

  float min_loss = std::numeric_limits<float>::infinity();
  for (int e = 1; e <= cfg.epochs; ++e) {
    auto rep = sv::train_epoch(model, state, data, resolved, e);
    sv::plateau_update(state, rep.loss, cfg.plateau_patience,
                       cfg.plateau_factor, cfg.plateau_threshold);
    min_loss = std::min(min_loss, rep.loss);
    if (min_loss < std::log(2.0f)) break;
  }
  CHECK(min_loss < std::log(2.0f));
}

TEST_CASE("empty or malformed manifests are configuration errors") {
  TempDir dir("svkit_manifest_test");
  std::ofstream(dir / "empty.tsv").close();
  CHECK_THROWS_AS(sv::load_dataset(dir / "empty.tsv", 16, 40), sv::ConfigError);
  std::ofstream(dir / "bad.tsv") << "no-tab-here\n";
  CHECK_THROWS_AS(sv::load_dataset(dir / "bad.tsv", 16, 40), sv::DataError);
  CHECK_THROWS_AS(sv::load_dataset(dir / "missing.tsv", 16, 40), sv::DataError);
}

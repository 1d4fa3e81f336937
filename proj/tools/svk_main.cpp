// svkit/tools/svk_main.cpp
//
// Copyright 2026 svkit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Command-line front end: corpus synthesis, training, embedding
// extraction, trial scoring, evaluation, and a gradient self-check.

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "svkit/checkpoint.hpp"
#include "svkit/config.hpp"
#include "svkit/eval.hpp"
#include "svkit/gradcheck.hpp"
#include "svkit/model.hpp"
#include "svkit/ops.hpp"
#include "svkit/synth.hpp"
#include "svkit/train.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string ablation;
  bool full_scale = false;
};

sv::RunConfig resolve_config(const CommonFlags& flags) {
  sv::RunConfig cfg;
  if (!flags.config_path.empty()) cfg = sv::load_config(flags.config_path);
  if (flags.full_scale) cfg.apply_full_scale_hparams();
  if (flags.seed_set) cfg.seed = flags.seed;
  if (!flags.ablation.empty()) {
    sv::parse_ablation(flags.ablation);  // validates, listing legal names
    cfg.ablation = flags.ablation;
  }
  return cfg;
}

void add_common(CLI::App* cmd, CommonFlags* flags) {
  cmd->add_option("--config", flags->config_path, "Run configuration file");
  cmd->add_option("--seed", flags->seed, "Override the run seed")
      ->each([flags](const std::string&) { flags->seed_set = true; });
  cmd->add_option("--ablation", flags->ablation,
                  "Encoding ablation: gap, sap, mla-sap, mla-sap-fr, "
                  "mla-sap-fr-dln");
  cmd->add_flag("--full-scale", flags->full_scale,
                "Use full-scale published hyperparameters");
}

// Rebuilds the model recorded in a checkpoint from its embedded config.
sv::Model<float> model_from_checkpoint(const sv::Checkpoint& ckpt,
                                       sv::RunConfig* cfg_out) {
  sv::RunConfig cfg = sv::parse_config_text(ckpt.config_text);
  if (cfg.num_speakers <= 0)
    throw sv::ConfigError(
        "checkpoint config does not record the speaker count");
  sv::Model<float> model(cfg.model_config(cfg.num_speakers));
  sv::Rng rng = sv::Rng::stream(cfg.seed, "init");
  model.init(rng);
  sv::restore_params(ckpt, &model.params());
  if (cfg_out) *cfg_out = cfg;
  return model;
}

// Input is either one WAV or a list file: bare-path lines or manifest
// lines whose last tab-separated column is the path.  The utterance id is
// the path so trial lists resolve directly.
std::vector<std::pair<std::string, std::string>> gather_inputs(
    const std::string& input) {
  std::vector<std::pair<std::string, std::string>> items;
  if (input.size() > 4 && input.substr(input.size() - 4) == ".wav") {
    items.emplace_back(input, input);
    return items;
  }
  std::ifstream in(input);
  if (!in) throw sv::DataError("embed: cannot open input list: " + input);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const size_t tab = line.rfind('\t');
    const std::string path =
        tab == std::string::npos ? line : line.substr(tab + 1);
    items.emplace_back(path, path);
  }
  return items;
}

int cmd_synth_data(const std::string& out_dir, sv::SynthCorpusSpec spec) {
  sv::CorpusPaths paths = sv::synth_corpus(spec, out_dir);
  std::cout << "wavs: " << paths.entries.size() << "\n"
            << "manifest: " << paths.manifest << "\n"
            << "train: " << paths.train << "\n"
            << "trials: " << paths.trials << "\n";
  return 0;
}

int cmd_train(const sv::RunConfig& cfg, bool resume) {
  const std::string path = sv::run_training(cfg, resume, &std::cout);
  std::cout << "checkpoint: " << path << "\n";
  return 0;
}

int cmd_embed(const std::string& ckpt_path, const std::string& input,
              const std::string& out, bool text) {
  sv::Checkpoint ckpt = sv::load_checkpoint(ckpt_path);
  sv::RunConfig cfg;
  sv::Model<float> model = model_from_checkpoint(ckpt, &cfg);
  auto items = gather_inputs(input);
  if (items.empty())
    std::cerr << "warning: empty input list, writing header only\n";
  sv::EmbeddingSet set;
  set.dim = model.config().embedding_dim();
  for (const auto& [id, path] : items)
    set.items.emplace_back(id, sv::extract_embedding(model, cfg, path));
  if (text) {
    std::ofstream os(out);
    if (!os) throw sv::DataError("embed: cannot write output: " + out);
    for (const auto& [id, v] : set.items) {
      os << id << "\t";
      for (size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
      os << "\n";
    }
  } else {
    sv::write_smle(out, set);
  }
  std::cout << "embeddings: " << set.items.size() << " dim " << set.dim
            << " -> " << out << "\n";
  return 0;
}

int cmd_score(const std::string& emb_path, const std::string& trials_path,
              const std::string& out) {
  sv::EmbeddingSet set = sv::read_smle(emb_path);
  std::map<std::string, std::vector<float>> embeddings(set.items.begin(),
                                                       set.items.end());
  auto trials = sv::load_trials(trials_path);
  sv::EvalSummary sum = sv::score_trials_embedded(embeddings, trials, out);
  std::cout << sv::summary_line(sum) << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& trials_path,
             const std::string& out) {
  sv::Checkpoint ckpt = sv::load_checkpoint(ckpt_path);
  sv::RunConfig cfg;
  sv::Model<float> model = model_from_checkpoint(ckpt, &cfg);
  auto trials = sv::load_trials(trials_path);
  sv::EvalSummary sum = sv::score_trials(model, cfg, trials, out);
  std::cout << sv::summary_line(sum) << "\n";
  return 0;
}

// Tiny full-architecture gradient self-check against central differences.
int cmd_grad_check(std::uint64_t seed) {
  sv::ModelConfig cfg;
  cfg.input_dim = 16;
  cfg.channels = {8, 8, 16, 32, 64};
  cfg.blocks = {1, 1, 1, 1};
  cfg.num_speakers = 3;
  cfg.dropout_rate = 0.1f;
  sv::Model<double> model(cfg);
  sv::Rng rng = sv::Rng::stream(seed, "init");
  model.init(rng);

  sv::Rng in_rng = sv::Rng::stream(seed, "input");
  auto x = sv::Tensor<double>::zeros({2, 1, 16, 40}, true);
  for (double& v : x.data()) v = in_rng.normal();
  const std::vector<int> labels = {0, 2};

  std::vector<sv::Tensor<double>> inputs{x};
  for (auto& [name, t] : model.params().items)
    if (t.requires_grad()) inputs.push_back(t);
  auto f = [&]() {
    sv::Rng drop = sv::Rng::stream(seed, "dropout", 0);
    auto res = model.forward(x, true, &drop);
    return sv::cross_entropy_softmax(res.logits, labels);
  };
  sv::Rng pick = sv::Rng::stream(seed, "coords");
  std::vector<std::vector<std::int64_t>> coords;
  size_t probed = 0;
  for (auto& in : inputs) {
    coords.push_back(sv::sample_coords(in.size(), 4, pick));
    probed += coords.back().size();
  }
  auto report = sv::grad_check<double>(f, inputs, 1e-5, 1e-3, coords);
  std::cout << "checked " << report.checked << " coordinates, max rel err "
            << report.max_rel_err << "\n";
  if (!report.ok(1e-3)) {
    std::cerr << "gradient check FAILED (tolerance 1e-3)\n";
    return 4;
  }
  std::cout << "gradient check passed\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speaker verification toolkit"};
  app.require_subcommand(1);

  // synth-data
  auto* synth = app.add_subcommand("synth-data", "Generate a synthetic corpus");
  std::string synth_out = "corpus";
  sv::SynthCorpusSpec spec;
  synth->add_option("--out", synth_out, "Output directory");
  synth->add_option("--seed", spec.seed, "Corpus seed");
  synth->add_option("--speakers", spec.num_speakers, "Number of speakers");
  synth->add_option("--utts", spec.utts_per_speaker, "Utterances per speaker");
  synth->add_option("--duration", spec.duration_s, "Utterance seconds");
  synth->add_option("--noise", spec.noise_level, "Additive noise level");
  synth->add_option("--heldout", spec.heldout_per_speaker,
                    "Held-out utterances per speaker for trials");

  // train
  auto* train = app.add_subcommand("train", "Train a model");
  CommonFlags train_flags;
  add_common(train, &train_flags);
  std::string train_manifest, train_ckpt, train_log;
  bool resume = false;
  train->add_option("--manifest", train_manifest, "Training manifest");
  train->add_option("--checkpoint", train_ckpt, "Checkpoint output path");
  train->add_option("--metrics-log", train_log, "Metrics log path");
  train->add_flag("--resume", resume, "Continue from the checkpoint");

  // embed
  auto* embed = app.add_subcommand("embed", "Extract embeddings");
  std::string embed_ckpt, embed_input, embed_out = "embeddings.smle";
  bool embed_text = false;
  embed->add_option("--checkpoint", embed_ckpt, "Trained checkpoint")->required();
  embed->add_option("input", embed_input, "WAV file or input list")->required();
  embed->add_option("--out", embed_out, "Output path");
  embed->add_flag("--text", embed_text, "Write text output");

  // score
  auto* score = app.add_subcommand("score", "Score trials from embeddings");
  std::string score_emb, score_trials_path, score_out = "scores.txt";
  score->add_option("embeddings", score_emb, "Embedding file")->required();
  score->add_option("--trials", score_trials_path, "Trial list")->required();
  score->add_option("--out", score_out, "Score output path");

  // eval
  auto* evalc = app.add_subcommand("eval", "Evaluate a checkpoint on trials");
  std::string eval_ckpt, eval_trials, eval_out = "scores.txt";
  evalc->add_option("--checkpoint", eval_ckpt, "Trained checkpoint")->required();
  evalc->add_option("--trials", eval_trials, "Trial list")->required();
  evalc->add_option("--out", eval_out, "Score output path");

  // grad-check
  auto* gc = app.add_subcommand("grad-check", "Numeric gradient self-check");
  std::uint64_t gc_seed = 1;
  gc->add_option("--seed", gc_seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) return cmd_synth_data(synth_out, spec);
    if (train->parsed()) {
      sv::RunConfig cfg = resolve_config(train_flags);
      if (!train_manifest.empty()) cfg.manifest = train_manifest;
      if (!train_ckpt.empty()) cfg.checkpoint = train_ckpt;
      if (!train_log.empty()) cfg.metrics_log = train_log;
      if (cfg.manifest.empty())
        throw sv::ConfigError("train: no manifest configured");
      return cmd_train(cfg, resume);
    }
    if (embed->parsed()) return cmd_embed(embed_ckpt, embed_input, embed_out, embed_text);
    if (score->parsed()) return cmd_score(score_emb, score_trials_path, score_out);
    if (evalc->parsed()) return cmd_eval(eval_ckpt, eval_trials, eval_out);
    if (gc->parsed()) return cmd_grad_check(gc_seed);
  } catch (const sv::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 2;
}

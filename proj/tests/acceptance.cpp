// svkit/tests/acceptance.cpp
//
// Copyright 2026 svkit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// End-to-end acceptance gate.  Ten independent checks, one [PASS]/[FAIL]
// line each; the process exits nonzero if any check fails.  Heavy checks
// (small full training runs) come last.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "svkit/checkpoint.hpp"
#include "svkit/config.hpp"
#include "svkit/eval.hpp"
#include "svkit/gradcheck.hpp"
#include "svkit/mel.hpp"
#include "svkit/model.hpp"
#include "svkit/ops.hpp"
#include "svkit/rng.hpp"
#include "svkit/synth.hpp"
#include "svkit/train.hpp"
#include "svkit/wav.hpp"

namespace fs = std::filesystem;
using sv::Rng;

namespace {

fs::path g_work;

// ---------------------------------------------------------------------------
// Helpers

sv::ModelConfig tiny_config() {
  sv::ModelConfig cfg;
  cfg.input_dim = 16;
  cfg.channels = {8, 8, 16, 32, 64};
  cfg.blocks = {1, 1, 1, 1};
  cfg.num_speakers = 3;
  cfg.dropout_rate = 0.1f;
  return cfg;
}

sv::Tensor<float> random_input(int b, int d, int l, Rng& rng) {
  auto x = sv::Tensor<float>::zeros({b, 1, d, l});
  for (float& v : x.data()) v = static_cast<float>(rng.normal());
  return x;
}

// Rebuilds a model from a training checkpoint's embedded configuration.
sv::Model<float> model_from(const std::string& ckpt_path, sv::RunConfig* out_cfg) {
  sv::Checkpoint ckpt = sv::load_checkpoint(ckpt_path);
  sv::RunConfig cfg = sv::parse_config_text(ckpt.config_text);
  sv::Model<float> model(cfg.model_config(cfg.num_speakers));
  Rng rng = Rng::stream(cfg.seed, "init");
  model.init(rng);
  sv::restore_params(ckpt, &model.params());
  if (out_cfg) *out_cfg = cfg;
  return model;
}

float last_epoch_accuracy(const std::string& metrics_path) {
  std::ifstream in(metrics_path);
  std::string line, last;
  while (std::getline(in, line))
    if (!line.empty()) last = line;
  std::istringstream ss(last);
  int epoch;
  float loss, acc, lr;
  ss >> epoch >> loss >> acc >> lr;
  return acc;
}

// Independent O(n^2) detection-metric reference: recount both error rates
// at every candidate threshold with separate code from the library sweep.
struct RefRates {
  double far, frr;
};

std::vector<RefRates> reference_sweep(const std::vector<int>& labels,
                                      const std::vector<float>& scores) {
  std::set<double> tset;
  for (float s : scores) tset.insert(static_cast<double>(s));
  std::vector<double> ts(tset.begin(), tset.end());
  ts.insert(ts.begin(), ts.front() - 1.0);
  ts.push_back(ts.back() + 1.0);
  double nt = 0, nn = 0;
  for (int l : labels) (l == 1 ? nt : nn) += 1.0;
  std::vector<RefRates> out;
  for (double t : ts) {
    double fa = 0, fr = 0;
    for (size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == 0 && scores[i] >= t) fa += 1.0;
      if (labels[i] == 1 && scores[i] < t) fr += 1.0;
    }
    out.push_back({fa / nn, fr / nt});
  }
  return out;
}

double reference_eer(const std::vector<int>& labels,
                     const std::vector<float>& scores) {
  auto sweep = reference_sweep(labels, scores);
  for (size_t i = 1; i < sweep.size(); ++i) {
    const double dp = sweep[i - 1].far - sweep[i - 1].frr;
    const double dc = sweep[i].far - sweep[i].frr;
    if (dc <= 0.0) {
      if (dc == 0.0) return 100.0 * sweep[i].far;
      const double alpha = dp / (dp - dc);
      return 100.0 * (sweep[i - 1].far + alpha * (sweep[i].far - sweep[i - 1].far));
    }
  }
  return -1.0;
}

double reference_min_dcf(const std::vector<int>& labels,
                         const std::vector<float>& scores) {
  auto sweep = reference_sweep(labels, scores);
  double best = 1e30;
  for (const auto& r : sweep)
    best = std::min(best, (0.01 * r.frr + 0.99 * r.far) / 0.01);
  return best;
}

void require(bool cond, const std::string& what) {
  if (!cond) throw std::runtime_error(what);
}

// ---------------------------------------------------------------------------
// 1. Reverse-mode gradients of the full tiny architecture match central
//    finite differences on sampled coordinates of every parameter tensor.

std::string check_gradients() {
  sv::Model<double> model(tiny_config());
  Rng rng = Rng::stream(11, "init");
  model.init(rng);

  Rng in_rng = Rng::stream(11, "input");
  auto x = sv::Tensor<double>::zeros({2, 1, 16, 40}, true);
  for (double& v : x.data()) v = in_rng.normal();
  const std::vector<int> labels = {0, 2};

  std::vector<sv::Tensor<double>> inputs{x};
  for (auto& [name, t] : model.params().items)
    if (t.requires_grad()) inputs.push_back(t);
  auto f = [&]() {
    Rng drop = Rng::stream(11, "dropout", 0);
    auto res = model.forward(x, true, &drop);
    return sv::cross_entropy_softmax(res.logits, labels);
  };
  Rng pick = Rng::stream(11, "coords");
  std::vector<std::vector<std::int64_t>> coords;
  for (auto& in : inputs) coords.push_back(sv::sample_coords(in.size(), 4, pick));

  auto report = sv::grad_check<double>(f, inputs, 1e-5, 1e-3, coords);
  require(report.checked >= 200, "fewer than 200 coordinates probed");
  require(report.ok(1e-3), "max relative error " + std::to_string(report.max_rel_err));
  std::ostringstream os;
  os << report.checked << " coords over " << inputs.size()
     << " tensors, max rel err " << report.max_rel_err;
  return os.str();
}

// ---------------------------------------------------------------------------
// 2. Full-width forward pass reproduces the expected shape ladder.

std::string check_shape_ladder() {
  sv::ModelConfig cfg;  // full widths, 64 mel bins
  cfg.num_speakers = 1211;
  sv::Model<float> model(cfg);
  Rng rng = Rng::stream(2, "init");
  model.init(rng);
  Rng in_rng = Rng::stream(2, "input");
  auto res = model.forward(random_input(1, 64, 1200, in_rng), false, nullptr);

  const std::vector<std::vector<int>> want = {{1, 32, 64, 1200},
                                              {1, 32, 64, 1200},
                                              {1, 64, 32, 600},
                                              {1, 128, 16, 300},
                                              {1, 256, 8, 150}};
  require(res.stage_shapes == want, "stage shapes differ");
  const std::vector<int> tap_dims = {32, 32, 64, 128, 256};
  require(res.taps.size() == 5, "expected five tapped stages");
  for (size_t i = 0; i < 5; ++i)
    require(res.taps[i].dim(1) == tap_dims[i], "tap width differs");
  require(res.concat_v.dim(1) == 512, "aggregate width differs");
  require(res.fr_out.dim(1) == 512, "recalibrated width differs");
  require(res.embedding.dim(1) == 512, "embedding width differs");
  require(res.logits.dim(0) == 1 && res.logits.dim(1) == 1211,
          "classifier output shape differs");
  return "stages 64x1200 64x1200 32x600 16x300 8x150, taps 32+32+64+128+256=512";
}

// ---------------------------------------------------------------------------
// 3. Embedding norms pin to alpha and attention weights to simplexes.

std::string check_normalization() {
  sv::Model<float> model(tiny_config());
  Rng rng = Rng::stream(3, "init");
  model.init(rng);
  Rng in_rng = Rng::stream(3, "input");
  double worst_norm = 0.0, worst_sum = 0.0;
  for (int batch = 0; batch < 10; ++batch) {
    auto res = model.forward(random_input(10, 16, 40, in_rng), false, nullptr);
    const int dim = res.embedding.dim(1);
    const float* e = res.embedding.data().data();
    for (int i = 0; i < 10; ++i) {
      double n = 0;
      for (int j = 0; j < dim; ++j) {
        const double v = e[static_cast<std::int64_t>(i) * dim + j];
        n += v * v;
      }
      worst_norm = std::max(worst_norm, std::fabs(std::sqrt(n) - 10.0));
    }
    for (const auto& w : res.att_weights) {
      const int l = w.dim(1);
      const float* wv = w.data().data();
      for (int i = 0; i < 10; ++i) {
        double s = 0;
        for (int j = 0; j < l; ++j) s += wv[static_cast<std::int64_t>(i) * l + j];
        worst_sum = std::max(worst_sum, std::fabs(s - 1.0));
      }
    }
  }
  require(worst_norm <= 1e-4, "embedding norm off by " + std::to_string(worst_norm));
  require(worst_sum <= 1e-6, "attention sum off by " + std::to_string(worst_sum));
  std::ostringstream os;
  os << "100 utterances: |norm-10| <= " << worst_norm << ", |sum-1| <= " << worst_sum;
  return os.str();
}

// ---------------------------------------------------------------------------
// 4. Trunk parameter budget of the aggregation network with plain pooling.

std::string check_param_count() {
  sv::ModelConfig cfg;
  cfg.encoding = sv::EncodingMode::kMlaGap;
  cfg.use_fr = false;
  cfg.use_dln = false;
  cfg.num_speakers = 1211;
  sv::Model<float> model(cfg);
  Rng rng = Rng::stream(4, "init");
  model.init(rng);
  std::int64_t trunk = 0;
  for (const auto& [name, t] : model.params().items)
    if (t.requires_grad() && name.rfind("trunk/", 0) == 0) trunk += t.size();
  require(trunk >= 5100000 && trunk <= 6900000,
          "trunk parameter count " + std::to_string(trunk));
  return "trunk trainable parameters = " + std::to_string(trunk);
}

// ---------------------------------------------------------------------------
// 5. Recalibration gates are strict sigmoids applied elementwise.

std::string check_fr_gate() {
  sv::Model<float> model(tiny_config());
  Rng rng = Rng::stream(5, "init");
  model.init(rng);
  Rng in_rng = Rng::stream(5, "input");
  double worst = 0.0;
  for (int batch = 0; batch < 20; ++batch) {
    auto res = model.forward(random_input(50, 16, 40, in_rng), false, nullptr);
    const auto& g = res.fr_gate.data();
    const auto& v = res.concat_v.data();
    const auto& o = res.fr_out.data();
    require(g.size() == v.size() && v.size() == o.size(), "gate shape mismatch");
    for (size_t i = 0; i < g.size(); ++i) {
      require(g[i] > 0.0f && g[i] < 1.0f, "gate value outside (0,1)");
      worst = std::max(worst, std::fabs(static_cast<double>(o[i]) -
                                        static_cast<double>(v[i]) * g[i]));
    }
  }
  require(worst <= 1e-6, "gating not elementwise: " + std::to_string(worst));
  std::ostringstream os;
  os << "1000 inputs: gates in (0,1), max |out - v*gate| = " << worst;
  return os.str();
}

// ---------------------------------------------------------------------------
// 6. Detection metrics agree with brute-force threshold enumeration.

std::string check_metric_oracle() {
  Rng rng = Rng::stream(6, "sets");
  int compared = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_int(49));
    std::vector<int> labels;
    std::vector<float> scores;
    int nt = 0, nn = 0;
    for (int i = 0; i < n; ++i) {
      const int lab = static_cast<int>(rng.uniform_int(2));
      labels.push_back(lab);
      (lab ? nt : nn) += 1;
      scores.push_back(static_cast<float>(rng.uniform_int(11)) / 10.0f);
    }
    if (nt == 0 || nn == 0) continue;
    auto eer = sv::compute_eer(labels, scores);
    require(std::fabs(eer.eer_percent - reference_eer(labels, scores)) <= 1e-9,
            "equal-error-rate mismatch vs enumeration");
    auto dcf = sv::compute_min_dcf(labels, scores);
    require(std::fabs(dcf.min_dcf - reference_min_dcf(labels, scores)) <= 1e-9,
            "detection-cost mismatch vs enumeration");
    ++compared;
  }

  Rng null_rng = Rng::stream(6, "null");
  std::vector<int> labels;
  std::vector<float> scores;
  for (int i = 0; i < 10000; ++i) {
    labels.push_back(static_cast<int>(null_rng.uniform_int(2)));
    scores.push_back(static_cast<float>(null_rng.normal()));
  }
  const double chance = sv::compute_eer(labels, scores).eer_percent;
  require(std::fabs(chance - 50.0) <= 2.0,
          "random-label rate " + std::to_string(chance));
  std::ostringstream os;
  os << compared << " score sets match enumeration; random-label rate "
     << chance << "%";
  return os.str();
}

// ---------------------------------------------------------------------------
// 7. The desk preset learns a synthetic 8-speaker corpus.

std::string check_learnability() {
  const fs::path dir = g_work / "learn";
  sv::SynthCorpusSpec spec;  // 8 speakers x 20 utterances, 4 held out each
  auto corpus = sv::synth_corpus(spec, (dir / "corpus").string());
  auto trials = sv::load_trials(corpus.trials);

  sv::RunConfig cfg;
  cfg.manifest = corpus.train;
  cfg.checkpoint = (dir / "model.smla").string();
  cfg.metrics_log = (dir / "metrics.tsv").string();

  // Untrained baseline: score the trial list with the freshly initialized
  // weights the run would start from.
  sv::Model<float> blank(cfg.model_config(8));
  Rng rng = Rng::stream(cfg.seed, "init");
  blank.init(rng);
  const double eer0 =
      sv::score_trials(blank, cfg, trials, "").eer_percent;

  sv::run_training(cfg, false, nullptr);
  const float acc = last_epoch_accuracy(cfg.metrics_log);
  sv::RunConfig loaded;
  sv::Model<float> trained = model_from(cfg.checkpoint, &loaded);
  const double eer = sv::score_trials(trained, loaded, trials, "").eer_percent;

  require(eer0 >= 35.0 && eer0 <= 65.0,
          "untrained baseline " + std::to_string(eer0) + "%");
  require(acc >= 0.95f, "final training accuracy " + std::to_string(acc));
  require(eer <= 5.0, "held-out rate " + std::to_string(eer) + "%");
  std::ostringstream os;
  os << "train acc " << acc * 100 << "%, held-out " << eer
     << "%, untrained baseline " << eer0 << "%";
  return os.str();
}

// ---------------------------------------------------------------------------
// 8. Directional sanity: the full stack is no worse than plain pooling.

std::string check_ablation_direction() {
  const fs::path dir = g_work / "ablate";
  sv::SynthCorpusSpec spec;
  spec.num_speakers = 4;
  spec.utts_per_speaker = 12;
  spec.heldout_per_speaker = 4;
  spec.seed = 7;
  auto corpus = sv::synth_corpus(spec, (dir / "corpus").string());
  auto trials = sv::load_trials(corpus.trials);

  auto run_eer = [&](const std::string& ablation, std::uint64_t seed) {
    sv::RunConfig cfg;
    cfg.manifest = corpus.train;
    cfg.ablation = ablation;
    cfg.epochs = 20;
    cfg.seed = seed;
    cfg.checkpoint = (dir / (ablation + "_" + std::to_string(seed) + ".smla")).string();
    cfg.metrics_log = (dir / (ablation + "_" + std::to_string(seed) + ".tsv")).string();
    sv::run_training(cfg, false, nullptr);
    sv::RunConfig loaded;
    sv::Model<float> model = model_from(cfg.checkpoint, &loaded);
    return sv::score_trials(model, loaded, trials, "").eer_percent;
  };

  double full = 0.0, plain = 0.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    full += run_eer("mla-sap-fr-dln", seed);
    plain += run_eer("gap", seed);
  }
  full /= 3.0;
  plain /= 3.0;
  require(full <= plain + 1e-9,
          "full stack mean " + std::to_string(full) + "% vs plain pooling " +
              std::to_string(plain) + "%");
  std::ostringstream os;
  os << "mean held-out rate over 3 seeds: full stack " << full
     << "% <= plain pooling " << plain << "%";
  return os.str();
}

// ---------------------------------------------------------------------------
// 9. Fixed seeds reproduce runs exactly; checkpoints survive round trips
//    and interrupted runs rejoin the uninterrupted trajectory.

std::string check_determinism() {
  const fs::path dir = g_work / "determinism";
  sv::SynthCorpusSpec spec;
  spec.num_speakers = 4;
  spec.utts_per_speaker = 8;
  spec.heldout_per_speaker = 2;
  spec.duration_s = 1.0;
  spec.seed = 9;
  auto corpus = sv::synth_corpus(spec, (dir / "corpus").string());

  auto make_cfg = [&](const std::string& tag) {
    sv::RunConfig cfg;
    cfg.manifest = corpus.train;
    cfg.n_mels = 16;
    cfg.crop_frames = 40;
    cfg.cmvn_window = 60;
    cfg.channels = {8, 8, 16, 32, 64};
    cfg.blocks = {1, 1, 1, 1};
    cfg.batch_size = 8;
    cfg.epochs = 4;
    cfg.seed = 5;
    cfg.checkpoint = (dir / (tag + ".smla")).string();
    cfg.metrics_log = (dir / (tag + ".tsv")).string();
    return cfg;
  };

  auto slurp = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };

  sv::RunConfig a = make_cfg("a");
  sv::RunConfig b = make_cfg("b");
  sv::run_training(a, false, nullptr);
  sv::run_training(b, false, nullptr);
  require(slurp(a.metrics_log) == slurp(b.metrics_log),
          "metrics logs differ between identical runs");

  // Serialization round trip preserves the artifact byte for byte.
  const std::string copy = (dir / "copy.smla").string();
  sv::save_checkpoint(copy, sv::load_checkpoint(a.checkpoint));
  require(slurp(copy) == slurp(a.checkpoint), "round trip altered the file");

  // Interrupt after 2 epochs, resume to 4, compare every tensor payload.
  sv::RunConfig c = make_cfg("c");
  c.epochs = 2;
  sv::run_training(c, false, nullptr);
  c.epochs = 4;
  sv::run_training(c, true, nullptr);
  sv::Checkpoint full = sv::load_checkpoint(a.checkpoint);
  sv::Checkpoint resumed = sv::load_checkpoint(c.checkpoint);
  require(full.tensors.size() == resumed.tensors.size(),
          "resumed checkpoint has different record count");
  for (size_t i = 0; i < full.tensors.size(); ++i) {
    const auto& ta = full.tensors[i];
    const auto& tb = resumed.tensors[i];
    require(ta.name == tb.name && ta.shape == tb.shape &&
                ta.data.size() == tb.data.size() &&
                std::memcmp(ta.data.data(), tb.data.data(),
                            ta.data.size() * sizeof(float)) == 0,
            "resumed run diverged at tensor " + ta.name);
  }
  require(slurp(c.metrics_log) == slurp(a.metrics_log),
          "resumed metrics log differs from the uninterrupted one");
  return "replay, round trip, and resume all bit-exact (" +
         std::to_string(full.tensors.size()) + " records)";
}

// ---------------------------------------------------------------------------
// 10. Frontend: frame count arithmetic, tone localization, no-op masking.

std::string check_frontend() {
  // 12 s at 16 kHz with 25 ms frames / 10 ms shift.
  sv::Waveform tone;
  tone.sample_rate = 16000;
  tone.samples.resize(192000);
  for (size_t i = 0; i < tone.samples.size(); ++i)
    tone.samples[i] = 0.5f * std::sin(2.0 * 3.14159265358979323846 * 1000.0 *
                                      static_cast<double>(i) / 16000.0);
  sv::MelFeature mel = sv::log_mel(tone);
  require(mel.n_frames == 1198, "raw frame count " + std::to_string(mel.n_frames));
  sv::MelFeature padded = sv::crop_or_pad(mel, 1200, false, nullptr);
  require(padded.n_frames == 1200, "padded frame count");

  // The strongest bin must be the filter whose center is nearest 1 kHz.
  auto centers = sv::mel_filter_centers_hz(64, 0.0, 8000.0);
  int predicted = 0;
  for (size_t m = 1; m < centers.size(); ++m)
    if (std::fabs(centers[m] - 1000.0) <
        std::fabs(centers[static_cast<size_t>(predicted)] - 1000.0))
      predicted = static_cast<int>(m);
  int arg = 0;
  double best = -1e30;
  for (int m = 0; m < mel.n_mels; ++m) {
    double sum = 0;
    for (int l = 0; l < mel.n_frames; ++l) sum += mel.at(m, l);
    if (sum > best) {
      best = sum;
      arg = m;
    }
  }
  require(std::abs(arg - predicted) <= 1,
          "tone landed in bin " + std::to_string(arg) + ", predicted " +
              std::to_string(predicted));

  // Zero-width masking must be the identity.
  sv::SpecAugmentOptions zero;
  zero.freq_mask_max = 0;
  zero.time_mask_max = 0;
  Rng rng = Rng::stream(10, "mask");
  sv::MelFeature masked = sv::spec_augment(mel, zero, &rng);
  require(masked.v == mel.v, "zero-width masking altered the features");
  std::ostringstream os;
  os << "1198 -> 1200 frames, 1 kHz tone in bin " << arg << " (predicted "
     << predicted << "), zero masking is identity";
  return os.str();
}

}  // namespace

int main() {
  g_work = fs::temp_directory_path() / "svkit_acceptance";
  fs::remove_all(g_work);
  fs::create_directories(g_work);

  struct Check {
    int id;
    const char* name;
    std::function<std::string()> fn;
  };
  const std::vector<Check> checks = {
      {1, "gradient oracle", check_gradients},
      {2, "shape ladder", check_shape_ladder},
      {3, "normalization invariants", check_normalization},
      {4, "parameter budget", check_param_count},
      {5, "recalibration gate", check_fr_gate},
      {6, "metric oracle equivalence", check_metric_oracle},
      {7, "learnability", check_learnability},
      {8, "ablation direction", check_ablation_direction},
      {9, "determinism and persistence", check_determinism},
      {10, "frontend", check_frontend},
  };

  int failures = 0;
  for (const auto& c : checks) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = true;
    try {
      detail = c.fn();
    } catch (const std::exception& e) {
      ok = false;
      detail = e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << c.id << " " << c.name << " ("
              << secs << " s): " << detail << "\n";
    std::cout.flush();
    if (!ok) ++failures;
  }
  fs::remove_all(g_work);
  if (failures) {
    std::cout << failures << " of " << checks.size() << " checks failed\n";
    return 1;
  }
  std::cout << "all " << checks.size() << " checks passed\n";
  return 0;
}

// svkit/model.hpp
//
// Copyright 2026 svkit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Scaled ResNet-34 trunk with per-stage attentive pooling taps,
// multi-layer aggregation, squeeze-excitation style feature
// recalibration, and length-normalized embeddings.

#ifndef SVKIT_MODEL_HPP_
#define SVKIT_MODEL_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "svkit/common.hpp"
#include "svkit/ops.hpp"
#include "svkit/rng.hpp"
#include "svkit/tensor.hpp"

namespace sv {

enum class EncodingMode { kSingleGap, kSingleSap, kMlaGap, kMlaSap };

struct ModelConfig {
  int input_dim = 64;
  std::array<int, 5> channels{{32, 32, 64, 128, 256}};
  std::array<int, 4> blocks{{3, 4, 6, 3}};
  int num_speakers = 8;
  EncodingMode encoding = EncodingMode::kMlaSap;
  bool use_fr = true;
  bool use_dln = true;
  int reduction_ratio = 8;
  float alpha = 10.0f;
  float dropout_rate = 0.2f;
  float leaky_slope = 0.01f;
  bool fr_bias = true;
  float bn_momentum = 0.1f;
  float bn_eps = 1e-5f;

  bool is_mla() const {
    return encoding == EncodingMode::kMlaGap || encoding == EncodingMode::kMlaSap;
  }
  bool uses_sap() const {
    return encoding == EncodingMode::kSingleSap || encoding == EncodingMode::kMlaSap;
  }
  int embedding_dim() const {
    if (!is_mla()) return channels[4];
    int sum = 0;
    for (int c : channels) sum += c;
    return sum;
  }
  void validate() const {
    if (input_dim < 8) throw ConfigError("model: input_dim must be >= 8");
    if (num_speakers < 2) throw ConfigError("model: need at least 2 speakers");
    if (use_fr && embedding_dim() % reduction_ratio != 0)
      throw ConfigError("model: embedding dim not divisible by reduction ratio");
    if (dropout_rate < 0.0f || dropout_rate >= 1.0f)
      throw ConfigError("model: dropout rate must be in [0, 1)");
  }
};

// Ablation preset names -> (encoding mode, FR, DLN).
struct AblationSetting {
  EncodingMode encoding;
  bool use_fr;
  bool use_dln;
};

inline const std::vector<std::string>& ablation_names() {
  static const std::vector<std::string> names = {
      "gap", "sap", "mla-sap", "mla-sap-fr", "mla-sap-fr-dln"};
  return names;
}

inline AblationSetting parse_ablation(const std::string& name) {
  if (name == "gap") return {EncodingMode::kSingleGap, false, false};
  if (name == "sap") return {EncodingMode::kSingleSap, false, false};
  if (name == "mla-sap") return {EncodingMode::kMlaSap, false, false};
  if (name == "mla-sap-fr") return {EncodingMode::kMlaSap, true, false};
  if (name == "mla-sap-fr-dln") return {EncodingMode::kMlaSap, true, true};
  std::string valid;
  for (const auto& n : ablation_names()) valid += " " + n;
  throw ConfigError("unknown ablation '" + name + "'; valid names:" + valid);
}

inline void apply_ablation(ModelConfig& cfg, const std::string& name) {
  AblationSetting s = parse_ablation(name);
  cfg.encoding = s.encoding;
  cfg.use_fr = s.use_fr;
  cfg.use_dln = s.use_dln;
}

inline std::string encoding_name(EncodingMode m) {
  switch (m) {
    case EncodingMode::kSingleGap: return "single-gap";
    case EncodingMode::kSingleSap: return "single-sap";
    case EncodingMode::kMlaGap: return "mla-gap";
    case EncodingMode::kMlaSap: return "mla-sap";
  }
  return "?";
}

inline EncodingMode parse_encoding(const std::string& s) {
  if (s == "single-gap") return EncodingMode::kSingleGap;
  if (s == "single-sap") return EncodingMode::kSingleSap;
  if (s == "mla-gap") return EncodingMode::kMlaGap;
  if (s == "mla-sap") return EncodingMode::kMlaSap;
  throw ConfigError("unknown encoding mode: " + s);
}

// Named tensors in stable creation order (checkpoint order).
template <typename T>
struct ParamStore {
  std::vector<std::pair<std::string, Tensor<T>>> items;
  std::unordered_map<std::string, size_t> index;

  Tensor<T>& add(const std::string& name, Tensor<T> t) {
    if (index.count(name)) throw ConfigError("duplicate parameter: " + name);
    index[name] = items.size();
    items.emplace_back(name, std::move(t));
    return items.back().second;
  }
  Tensor<T>& get(const std::string& name) {
    auto it = index.find(name);
    if (it == index.end()) throw ConfigError("missing parameter: " + name);
    return items[it->second].second;
  }
  const Tensor<T>& get(const std::string& name) const {
    auto it = index.find(name);
    if (it == index.end()) throw ConfigError("missing parameter: " + name);
    return items[it->second].second;
  }
  bool has(const std::string& name) const { return index.count(name) != 0; }

  std::int64_t trainable_count() const {
    std::int64_t n = 0;
    for (const auto& [name, t] : items)
      if (t.requires_grad()) n += t.size();
    return n;
  }
};

template <typename T>
struct ForwardResult {
  Tensor<T> logits;     // [B, N]
  Tensor<T> embedding;  // [B, dim], output of the last enabled encoding stage
  std::vector<std::vector<int>> stage_shapes;  // conv1 + four residual stages
  std::vector<Tensor<T>> stage_outputs;        // feature maps behind the taps
  std::vector<Tensor<T>> taps;                 // pooled per-stage features
  std::vector<Tensor<T>> att_weights;          // [B, L'] per SAP tap
  Tensor<T> concat_v;                          // aggregated feature V
  Tensor<T> fr_gate;                           // sigmoid gate (when FR on)
  Tensor<T> fr_out;                            // recalibrated feature V-hat
};

template <typename T>
class Model {
 public:
  explicit Model(ModelConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

  const ModelConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }

  // Creates all trainable tensors.  Deterministic for a fixed rng stream:
  // tensors are drawn in a fixed creation order.
  void init(Rng& rng) {
    const auto& ch = cfg_.channels;
    add_conv("trunk/conv1", ch[0], 1, 3, rng);
    add_bn("trunk/conv1/bn", ch[0]);
    int in_ch = ch[0];
    for (int s = 0; s < 4; ++s) {
      const int out_ch = ch[static_cast<size_t>(s) + 1];
      const int stride = s == 0 ? 1 : 2;
      for (int b = 0; b < cfg_.blocks[static_cast<size_t>(s)]; ++b) {
        const std::string p = "trunk/s" + std::to_string(s + 1) + "/b" +
                              std::to_string(b) + "/";
        const int bin = b == 0 ? in_ch : out_ch;
        add_conv(p + "conv1", out_ch, bin, 3, rng);
        add_bn(p + "conv1/bn", out_ch);
        add_conv(p + "conv2", out_ch, out_ch, 3, rng);
        add_bn(p + "conv2/bn", out_ch);
        if (b == 0 && (stride != 1 || bin != out_ch)) {
          add_conv(p + "ds", out_ch, bin, 1, rng);
          add_bn(p + "ds/bn", out_ch);
        }
      }
      in_ch = out_ch;
    }
    if (cfg_.uses_sap()) {
      for (int t = 0; t < 5; ++t) {
        if (!cfg_.is_mla() && t != 4) continue;
        const int c = ch[static_cast<size_t>(t)];
        const std::string p = "sap/t" + std::to_string(t) + "/";
        add_linear(p + "w", c, c, rng);
        params_.add(p + "b", Tensor<T>::zeros({c}, true));
        add_context(p + "u", c, rng);
        add_bn(p + "bn", c);
      }
    }
    if (cfg_.use_fr) {
      const int c = cfg_.embedding_dim();
      const int hidden = c / cfg_.reduction_ratio;
      add_linear("fr/w1", c, hidden, rng);
      add_linear("fr/w2", hidden, c, rng);
      if (cfg_.fr_bias) {
        params_.add("fr/b1", Tensor<T>::zeros({hidden}, true));
        params_.add("fr/b2", Tensor<T>::zeros({c}, true));
      }
    }
    add_linear("cls/w", cfg_.embedding_dim(), cfg_.num_speakers, rng);
    params_.add("cls/b", Tensor<T>::zeros({cfg_.num_speakers}, true));
  }

  // x: [B, 1, D, L] normalized log-Mel maps.  `dropout_rng` is required in
  // train mode when dropout_rate > 0.
  ForwardResult<T> forward(Tensor<T> x, bool train, Rng* dropout_rng) {
    if (x.rank() != 4 || x.dim(1) != 1 || x.dim(2) != cfg_.input_dim)
      throw DimensionError("model: input must be [B, 1, D, L]");
    if (x.dim(3) < 8)
      throw DimensionError("model: input length must be at least 8 frames");
    if (train && cfg_.uses_sap() && cfg_.dropout_rate > 0.0f && !dropout_rng)
      throw ConfigError("model: train-mode forward needs a dropout rng");
    ForwardResult<T> res;

    Tensor<T> cur = conv_bn_relu(x, "trunk/conv1", 1, train);
    std::vector<Tensor<T>> stages{cur};
    for (int s = 0; s < 4; ++s) {
      const int stride = s == 0 ? 1 : 2;
      for (int b = 0; b < cfg_.blocks[static_cast<size_t>(s)]; ++b) {
        const std::string p = "trunk/s" + std::to_string(s + 1) + "/b" +
                              std::to_string(b) + "/";
        cur = residual_block(cur, p, b == 0 ? stride : 1, train);
      }
      stages.push_back(cur);
    }
    for (auto& st : stages) res.stage_shapes.push_back(st.shape());
    res.stage_outputs = stages;

    if (cfg_.is_mla()) {
      for (int t = 0; t < 5; ++t)
        res.taps.push_back(pool_tap(stages[static_cast<size_t>(t)], t, train,
                                    dropout_rng, &res));
      res.concat_v = concat(res.taps, 1);
    } else {
      res.taps.push_back(pool_tap(stages[4], 4, train, dropout_rng, &res));
      res.concat_v = res.taps[0];
    }

    Tensor<T> feat = res.concat_v;
    if (cfg_.use_fr) {
      Tensor<T> z = cfg_.fr_bias
                        ? affine(feat, params_.get("fr/w1"), params_.get("fr/b1"))
                        : matmul(feat, params_.get("fr/w1"));
      z = leaky_relu(z, static_cast<T>(cfg_.leaky_slope), true);
      Tensor<T> gate =
          cfg_.fr_bias
              ? affine(z, params_.get("fr/w2"), params_.get("fr/b2"))
              : matmul(z, params_.get("fr/w2"));
      gate = sigmoid_act(gate, true);
      res.fr_gate = gate;
      feat = mul(feat, gate);
      res.fr_out = feat;
    }
    if (cfg_.use_dln) feat = length_normalize(feat, static_cast<T>(cfg_.alpha));
    res.embedding = feat;
    res.logits = affine(feat, params_.get("cls/w"), params_.get("cls/b"));
    return res;
  }

  std::int64_t trainable_param_count() const { return params_.trainable_count(); }

 private:
  void add_conv(const std::string& name, int co, int ci, int k, Rng& rng) {
    Tensor<T> w = Tensor<T>::zeros({co, ci, k, k}, true);
    const double std_dev = std::sqrt(2.0 / (static_cast<double>(ci) * k * k));
    for (T& v : w.data()) v = static_cast<T>(rng.normal() * std_dev);
    params_.add(name, std::move(w));
  }

  void add_linear(const std::string& name, int in, int out, Rng& rng) {
    Tensor<T> w = Tensor<T>::zeros({in, out}, true);
    const double std_dev = 1.0 / std::sqrt(static_cast<double>(in));
    for (T& v : w.data()) v = static_cast<T>(rng.normal() * std_dev);
    params_.add(name, std::move(w));
  }

  void add_context(const std::string& name, int c, Rng& rng) {
    Tensor<T> u = Tensor<T>::zeros({c, 1}, true);
    const double std_dev = 1.0 / std::sqrt(static_cast<double>(c));
    for (T& v : u.data()) v = static_cast<T>(rng.normal() * std_dev);
    params_.add(name, std::move(u));
  }

  void add_bn(const std::string& prefix, int c) {
    params_.add(prefix + "/g", Tensor<T>::full({c}, T(1), true));
    params_.add(prefix + "/b", Tensor<T>::zeros({c}, true));
    params_.add(prefix + "/rm", Tensor<T>::zeros({c}));
    params_.add(prefix + "/rv", Tensor<T>::full({c}, T(1)));
  }

  Tensor<T> apply_bn(Tensor<T> x, const std::string& prefix, bool train) {
    return batch_norm(x, params_.get(prefix + "/g"), params_.get(prefix + "/b"),
                      params_.get(prefix + "/rm"), params_.get(prefix + "/rv"),
                      static_cast<T>(cfg_.bn_momentum),
                      static_cast<T>(cfg_.bn_eps), train);
  }

  Tensor<T> conv_bn_relu(Tensor<T> x, const std::string& name, int stride,
                         bool train) {
    Tensor<T> c = conv2d(x, params_.get(name), stride, 1);
    return relu(apply_bn(c, name + "/bn", train), true);
  }

  // Post-activation basic block; the first block of a downsampling stage
  // carries a strided 1x1 projection shortcut.
  Tensor<T> residual_block(Tensor<T> x, const std::string& p, int stride,
                           bool train) {
    Tensor<T> h = conv_bn_relu(x, p + "conv1", stride, train);
    Tensor<T> h2 = apply_bn(conv2d(h, params_.get(p + "conv2"), 1, 1),
                            p + "conv2/bn", train);
    Tensor<T> shortcut = x;
    if (params_.has(p + "ds"))
      shortcut = apply_bn(conv2d(x, params_.get(p + "ds"), stride, 0),
                          p + "ds/bn", train);
    return relu(add(h2, shortcut, true), true);
  }

  // Frequency-axis average, per-frame projection with tanh, context-vector
  // attention, weighted sum; dropout + batch norm on the pooled feature.
  Tensor<T> sap_pool(Tensor<T> fm, int tap, bool train, Rng* rng,
                     ForwardResult<T>* res) {
    const std::string p = "sap/t" + std::to_string(tap) + "/";
    const int b = fm.dim(0), c = fm.dim(1), frames = fm.dim(3);
    Tensor<T> y = mean_axis(fm, 2);                  // [B, C, L']
    Tensor<T> seq = reshape(swap_last2(y), {b * frames, c});
    Tensor<T> h = tanh_act(
        affine(seq, params_.get(p + "w"), params_.get(p + "b")), true);
    Tensor<T> scores = matmul(h, params_.get(p + "u"));  // [B*L', 1]
    Tensor<T> w = softmax_lastdim(reshape(scores, {b, frames}));
    res->att_weights.push_back(w);
    Tensor<T> e = attend_pool(reshape(h, {b, frames, c}), w);
    Tensor<T> d = dropout(e, static_cast<T>(cfg_.dropout_rate), train, rng);
    return apply_bn(d, p + "bn", train);
  }

  Tensor<T> pool_tap(Tensor<T> fm, int tap, bool train, Rng* rng,
                     ForwardResult<T>* res) {
    if (cfg_.uses_sap()) return sap_pool(fm, tap, train, rng, res);
    return mean_axis(mean_axis(fm, 2), 2);  // GAP over both spatial axes
  }

  ModelConfig cfg_;
  ParamStore<T> params_;
};

}  // namespace sv

#endif  // SVKIT_MODEL_HPP_

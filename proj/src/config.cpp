// svkit/src/config.cpp
//
// Copyright 2026 svkit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include "svkit/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "svkit/common.hpp"

namespace sv {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

int to_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    int r = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer for " + key + ": '" + v + "'");
  }
}

float to_float(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    float r = std::stof(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config: bad number for " + key + ": '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: bad boolean for " + key + ": '" + v + "'");
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    std::uint64_t r = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer for " + key + ": '" + v + "'");
  }
}

template <size_t N>
std::array<int, N> to_int_list(const std::string& key, const std::string& v) {
  std::array<int, N> out{};
  std::stringstream ss(v);
  std::string item;
  size_t i = 0;
  while (std::getline(ss, item, ',')) {
    if (i >= N)
      throw ConfigError("config: " + key + " expects " + std::to_string(N) +
                        " comma-separated values");
    out[i++] = to_int(key, trim(item));
  }
  if (i != N)
    throw ConfigError("config: " + key + " expects " + std::to_string(N) +
                      " comma-separated values");
  return out;
}

template <size_t N>
std::string list_str(const std::array<int, N>& a) {
  std::string s;
  for (size_t i = 0; i < N; ++i) {
    if (i) s += ",";
    s += std::to_string(a[i]);
  }
  return s;
}

std::string fmt(float v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

ModelConfig RunConfig::model_config(int resolved_speakers) const {
  ModelConfig cfg;
  cfg.input_dim = n_mels;
  cfg.channels = channels;
  cfg.blocks = blocks;
  cfg.num_speakers = resolved_speakers;
  apply_ablation(cfg, ablation);
  cfg.reduction_ratio = reduction;
  cfg.alpha = alpha;
  cfg.dropout_rate = dropout;
  cfg.leaky_slope = leaky_slope;
  cfg.fr_bias = fr_bias;
  cfg.validate();
  return cfg;
}

std::string RunConfig::serialize() const {
  std::ostringstream os;
  os << "[data]\n";
  os << "data_dir = " << data_dir << "\n";
  os << "manifest = " << manifest << "\n";
  os << "trials = " << trials << "\n";
  os << "n_mels = " << n_mels << "\n";
  os << "crop_frames = " << crop_frames << "\n";
  os << "cmvn_window = " << cmvn_window << "\n";
  os << "augment = " << (augment ? "true" : "false") << "\n";
  os << "\n[model]\n";
  os << "ablation = " << ablation << "\n";
  os << "channels = " << list_str(channels) << "\n";
  os << "blocks = " << list_str(blocks) << "\n";
  os << "num_speakers = " << num_speakers << "\n";
  os << "leaky_slope = " << fmt(leaky_slope) << "\n";
  os << "dropout = " << fmt(dropout) << "\n";
  os << "reduction = " << reduction << "\n";
  os << "alpha = " << fmt(alpha) << "\n";
  os << "fr_bias = " << (fr_bias ? "true" : "false") << "\n";
  os << "\n[train]\n";
  os << "lr = " << fmt(lr) << "\n";
  os << "momentum = " << fmt(momentum) << "\n";
  os << "weight_decay = " << fmt(weight_decay) << "\n";
  os << "batch_size = " << batch_size << "\n";
  os << "epochs = " << epochs << "\n";
  os << "plateau_patience = " << plateau_patience << "\n";
  os << "plateau_factor = " << fmt(plateau_factor) << "\n";
  os << "plateau_threshold = " << fmt(plateau_threshold) << "\n";
  os << "seed = " << seed << "\n";
  os << "\n[io]\n";
  os << "checkpoint = " << checkpoint << "\n";
  os << "metrics_log = " << metrics_log << "\n";
  return os.str();
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;
  static const std::map<std::string, Setter> setters = {
      {"data.data_dir", [](RunConfig& c, const std::string&, const std::string& v) { c.data_dir = v; }},
      {"data.manifest", [](RunConfig& c, const std::string&, const std::string& v) { c.manifest = v; }},
      {"data.trials", [](RunConfig& c, const std::string&, const std::string& v) { c.trials = v; }},
      {"data.n_mels", [](RunConfig& c, const std::string& k, const std::string& v) { c.n_mels = to_int(k, v); }},
      {"data.crop_frames", [](RunConfig& c, const std::string& k, const std::string& v) { c.crop_frames = to_int(k, v); }},
      {"data.cmvn_window", [](RunConfig& c, const std::string& k, const std::string& v) { c.cmvn_window = to_int(k, v); }},
      {"data.augment", [](RunConfig& c, const std::string& k, const std::string& v) { c.augment = to_bool(k, v); }},
      {"model.ablation", [](RunConfig& c, const std::string&, const std::string& v) { parse_ablation(v); c.ablation = v; }},
      {"model.channels", [](RunConfig& c, const std::string& k, const std::string& v) { c.channels = to_int_list<5>(k, v); }},
      {"model.blocks", [](RunConfig& c, const std::string& k, const std::string& v) { c.blocks = to_int_list<4>(k, v); }},
      {"model.num_speakers", [](RunConfig& c, const std::string& k, const std::string& v) { c.num_speakers = to_int(k, v); }},
      {"model.leaky_slope", [](RunConfig& c, const std::string& k, const std::string& v) { c.leaky_slope = to_float(k, v); }},
      {"model.dropout", [](RunConfig& c, const std::string& k, const std::string& v) { c.dropout = to_float(k, v); }},
      {"model.reduction", [](RunConfig& c, const std::string& k, const std::string& v) { c.reduction = to_int(k, v); }},
      {"model.alpha", [](RunConfig& c, const std::string& k, const std::string& v) { c.alpha = to_float(k, v); }},
      {"model.fr_bias", [](RunConfig& c, const std::string& k, const std::string& v) { c.fr_bias = to_bool(k, v); }},
      {"train.lr", [](RunConfig& c, const std::string& k, const std::string& v) { c.lr = to_float(k, v); }},
      {"train.momentum", [](RunConfig& c, const std::string& k, const std::string& v) { c.momentum = to_float(k, v); }},
      {"train.weight_decay", [](RunConfig& c, const std::string& k, const std::string& v) { c.weight_decay = to_float(k, v); }},
      {"train.batch_size", [](RunConfig& c, const std::string& k, const std::string& v) { c.batch_size = to_int(k, v); }},
      {"train.epochs", [](RunConfig& c, const std::string& k, const std::string& v) { c.epochs = to_int(k, v); }},
      {"train.plateau_patience", [](RunConfig& c, const std::string& k, const std::string& v) { c.plateau_patience = to_int(k, v); }},
      {"train.plateau_factor", [](RunConfig& c, const std::string& k, const std::string& v) { c.plateau_factor = to_float(k, v); }},
      {"train.plateau_threshold", [](RunConfig& c, const std::string& k, const std::string& v) { c.plateau_threshold = to_float(k, v); }},
      {"train.seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = to_u64(k, v); }},
      {"io.checkpoint", [](RunConfig& c, const std::string&, const std::string& v) { c.checkpoint = v; }},
      {"io.metrics_log", [](RunConfig& c, const std::string&, const std::string& v) { c.metrics_log = v; }},
  };

  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigError("config: malformed section header at line " +
                          std::to_string(lineno));
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: expected key = value at line " +
                        std::to_string(lineno));
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (section.empty())
      throw ConfigError("config: key '" + key + "' outside any section");
    const std::string full = section + "." + key;
    auto it = setters.find(full);
    if (it == setters.end())
      throw ConfigError("config: unknown key '" + full + "' at line " +
                        std::to_string(lineno));
    it->second(cfg, full, value);
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace sv

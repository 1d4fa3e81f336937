// svkit/src/eval.cpp
//
// Copyright 2026 svkit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#include "svkit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "svkit/common.hpp"
#include "svkit/mel.hpp"
#include "svkit/wav.hpp"

namespace sv {

namespace {

// (FAR, FRR) at threshold t under the >= / < convention.
struct Rates {
  double far;
  double frr;
};

Rates rates_at(const std::vector<float>& targets,
               const std::vector<float>& nontargets, double t) {
  std::int64_t fa = 0, fr = 0;
  for (float s : nontargets)
    if (static_cast<double>(s) >= t) ++fa;
  for (float s : targets)
    if (static_cast<double>(s) < t) ++fr;
  return {static_cast<double>(fa) / static_cast<double>(nontargets.size()),
          static_cast<double>(fr) / static_cast<double>(targets.size())};
}

void split_scores(const std::vector<int>& labels,
                  const std::vector<float>& scores,
                  std::vector<float>* targets, std::vector<float>* nontargets) {
  if (labels.size() != scores.size())
    throw EvalError("metrics: label/score count mismatch");
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1)
      targets->push_back(scores[i]);
    else if (labels[i] == 0)
      nontargets->push_back(scores[i]);
    else
      throw EvalError("metrics: label must be 0 or 1");
  }
  if (targets->empty()) throw EvalError("metrics: no target trials");
  if (nontargets->empty()) throw EvalError("metrics: no nontarget trials");
}

std::vector<double> distinct_thresholds(const std::vector<float>& targets,
                                        const std::vector<float>& nontargets) {
  std::set<double> set;
  for (float s : targets) set.insert(static_cast<double>(s));
  for (float s : nontargets) set.insert(static_cast<double>(s));
  return {set.begin(), set.end()};
}

}  // namespace

std::vector<Trial> load_trials(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("trials: cannot open file: " + path);
  std::vector<Trial> trials;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    Trial t;
    std::string label;
    if (!(ls >> label >> t.enroll >> t.test))
      throw DataError("trials: malformed line " + std::to_string(lineno) +
                      " of " + path);
    if (label == "1")
      t.label = 1;
    else if (label == "0")
      t.label = 0;
    else
      throw DataError("trials: label must be 0 or 1 at line " +
                      std::to_string(lineno) + " of " + path);
    trials.push_back(std::move(t));
  }
  if (trials.empty()) throw DataError("trials: empty trial list: " + path);
  return trials;
}

float cosine_score(const std::vector<float>& a, const std::vector<float>& b) {
  if (a.size() != b.size() || a.empty())
    throw EvalError("cosine: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na <= 0.0 || nb <= 0.0) throw EvalError("cosine: zero vector");
  return static_cast<float>(dot / (std::sqrt(na) * std::sqrt(nb)));
}

EerResult compute_eer(const std::vector<int>& labels,
                      const std::vector<float>& scores) {
  std::vector<float> targets, nontargets;
  split_scores(labels, scores, &targets, &nontargets);
  std::vector<double> ts = distinct_thresholds(targets, nontargets);
  // Sentinels guarantee a sign change: below every score FRR=0, FAR=1;
  // above every score FRR=1, FAR=0.
  ts.insert(ts.begin(), ts.front() - 1.0);
  ts.push_back(ts.back() + 1.0);

  Rates prev = rates_at(targets, nontargets, ts[0]);
  double prev_t = ts[0];
  for (size_t i = 1; i < ts.size(); ++i) {
    const Rates cur = rates_at(targets, nontargets, ts[i]);
    const double d_prev = prev.far - prev.frr;
    const double d_cur = cur.far - cur.frr;
    if (d_cur <= 0.0) {
      if (d_cur == 0.0)
        return {100.0 * cur.far, ts[i]};
      // Crossing between prev (FAR > FRR) and cur (FAR < FRR).
      const double denom = d_prev - d_cur;
      const double alpha = denom > 0.0 ? d_prev / denom : 0.0;
      const double eer = prev.far + alpha * (cur.far - prev.far);
      const double thr = prev_t + alpha * (ts[i] - prev_t);
      return {100.0 * eer, thr};
    }
    prev = cur;
    prev_t = ts[i];
  }
  throw EvalError("metrics: no error-rate crossing found");
}

DcfResult compute_min_dcf(const std::vector<int>& labels,
                          const std::vector<float>& scores, double p_target,
                          double c_miss, double c_fa) {
  std::vector<float> targets, nontargets;
  split_scores(labels, scores, &targets, &nontargets);
  std::vector<double> ts = distinct_thresholds(targets, nontargets);
  ts.insert(ts.begin(), ts.front() - 1.0);
  ts.push_back(ts.back() + 1.0);

  const double norm = std::min(c_miss * p_target, c_fa * (1.0 - p_target));
  if (norm <= 0.0) throw EvalError("metrics: degenerate cost parameters");
  DcfResult best{std::numeric_limits<double>::infinity(), 0.0};
  for (double t : ts) {
    const Rates r = rates_at(targets, nontargets, t);
    const double dcf =
        (c_miss * p_target * r.frr + c_fa * (1.0 - p_target) * r.far) / norm;
    if (dcf < best.min_dcf) best = {dcf, t};
  }
  return best;
}

std::vector<float> extract_embedding(Model<float>& model, const RunConfig& cfg,
                                     const std::string& wav_path) {
  MelOptions mel_opts;
  mel_opts.n_mels = cfg.n_mels;
  MelFeature f = cmvn_sliding(log_mel(load_wav(wav_path), mel_opts),
                              cfg.cmvn_window);
  f = crop_or_pad(f, cfg.crop_frames, false, nullptr);
  Tensor<float> x = Tensor<float>::zeros({1, 1, cfg.n_mels, cfg.crop_frames});
  std::copy(f.v.begin(), f.v.end(), x.data().begin());
  auto res = model.forward(x, false, nullptr);
  return res.embedding.data();
}

void write_smle(const std::string& path, const EmbeddingSet& set) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("smle: cannot write file: " + path);
  out.write("SMLE", 4);
  const std::uint32_t dim = static_cast<std::uint32_t>(set.dim);
  out.write(reinterpret_cast<const char*>(&dim), 4);
  for (const auto& [id, v] : set.items) {
    if (static_cast<int>(v.size()) != set.dim)
      throw EvalError("smle: vector dimension mismatch for " + id);
    const std::uint16_t len = static_cast<std::uint16_t>(id.size());
    out.write(reinterpret_cast<const char*>(&len), 2);
    out.write(id.data(), len);
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(float)));
  }
  if (!out) throw DataError("smle: write failed: " + path);
}

EmbeddingSet read_smle(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("smle: cannot open file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "SMLE", 4) != 0)
    throw DataError("smle: bad magic: " + path);
  std::uint32_t dim = 0;
  in.read(reinterpret_cast<char*>(&dim), 4);
  if (!in) throw DataError("smle: truncated header: " + path);
  EmbeddingSet set;
  set.dim = static_cast<int>(dim);
  while (true) {
    std::uint16_t len = 0;
    in.read(reinterpret_cast<char*>(&len), 2);
    if (in.eof()) break;
    if (!in) throw DataError("smle: truncated file: " + path);
    std::string id(len, '\0');
    in.read(id.data(), len);
    std::vector<float> v(dim);
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(dim * sizeof(float)));
    if (!in) throw DataError("smle: truncated record: " + path);
    set.items.emplace_back(std::move(id), std::move(v));
  }
  return set;
}

std::string summary_line(const EvalSummary& s) {
  std::ostringstream os;
  os << "EER=" << s.eer_percent << "% minDCF=" << s.min_dcf
     << " thrEER=" << s.thr_eer << " thrDCF=" << s.thr_dcf;
  return os.str();
}

namespace {

EvalSummary finish_scores(const std::vector<int>& labels,
                          const std::vector<float>& scores,
                          const std::string& score_out) {
  EerResult eer = compute_eer(labels, scores);
  DcfResult dcf = compute_min_dcf(labels, scores);
  EvalSummary sum{eer.eer_percent, dcf.min_dcf, eer.threshold, dcf.threshold};
  if (!score_out.empty()) {
    std::ofstream out(score_out);
    if (!out) throw DataError("scores: cannot write file: " + score_out);
    for (size_t i = 0; i < labels.size(); ++i)
      out << labels[i] << "\t" << scores[i] << "\n";
    out << summary_line(sum) << "\n";
    if (!out) throw DataError("scores: write failed: " + score_out);
  }
  return sum;
}

}  // namespace

EvalSummary score_trials(Model<float>& model, const RunConfig& cfg,
                         const std::vector<Trial>& trials,
                         const std::string& score_out) {
  std::map<std::string, std::vector<float>> cache;
  auto embed = [&](const std::string& path, size_t lineno) -> const std::vector<float>& {
    auto it = cache.find(path);
    if (it != cache.end()) return it->second;
    try {
      return cache.emplace(path, extract_embedding(model, cfg, path))
          .first->second;
    } catch (const DataError& e) {
      throw DataError("trial " + std::to_string(lineno + 1) + ": " + e.what());
    }
  };
  std::vector<int> labels;
  std::vector<float> scores;
  for (size_t i = 0; i < trials.size(); ++i) {
    const auto& a = embed(trials[i].enroll, i);
    const auto& b = embed(trials[i].test, i);
    labels.push_back(trials[i].label);
    scores.push_back(cosine_score(a, b));
  }
  return finish_scores(labels, scores, score_out);
}

EvalSummary score_trials_embedded(
    const std::map<std::string, std::vector<float>>& embeddings,
    const std::vector<Trial>& trials, const std::string& score_out) {
  std::vector<int> labels;
  std::vector<float> scores;
  for (size_t i = 0; i < trials.size(); ++i) {
    auto a = embeddings.find(trials[i].enroll);
    auto b = embeddings.find(trials[i].test);
    if (a == embeddings.end() || b == embeddings.end())
      throw DataError("trial " + std::to_string(i + 1) +
                      ": utterance has no embedding");
    labels.push_back(trials[i].label);
    scores.push_back(cosine_score(a->second, b->second));
  }
  return finish_scores(labels, scores, score_out);
}

}  // namespace sv

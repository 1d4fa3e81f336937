// svkit/eval.hpp
//
// Copyright 2026 svkit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Embedding extraction, cosine trial scoring, and detection metrics
// (equal error rate, minimum normalized detection cost).

#ifndef SVKIT_EVAL_HPP_
#define SVKIT_EVAL_HPP_

#include <map>
#include <string>
#include <vector>

#include "svkit/config.hpp"
#include "svkit/model.hpp"

namespace sv {

struct Trial {
  int label = 0;  // 1 target, 0 nontarget
  std::string enroll;
  std::string test;
};

// Text lines `label<SP>enroll<SP>test`, label in {0, 1}.
std::vector<Trial> load_trials(const std::string& path);

float cosine_score(const std::vector<float>& a, const std::vector<float>& b);

struct EerResult {
  double eer_percent = 0.0;
  double threshold = 0.0;
};

// Sweeps every distinct score threshold t with FAR(t) = P(nontarget >= t)
// and FRR(t) = P(target < t); the equal error rate is linearly
// interpolated between the thresholds bracketing the FAR/FRR crossing.
EerResult compute_eer(const std::vector<int>& labels,
                      const std::vector<float>& scores);

struct DcfResult {
  double min_dcf = 0.0;
  double threshold = 0.0;
};

// min over t of [c_miss*p_target*FRR(t) + c_fa*(1-p_target)*FAR(t)],
// normalized by min(c_miss*p_target, c_fa*(1-p_target)).
DcfResult compute_min_dcf(const std::vector<int>& labels,
                          const std::vector<float>& scores,
                          double p_target = 0.01, double c_miss = 1.0,
                          double c_fa = 1.0);

// Frontend eval path (center crop, no masking) plus a frozen forward.
std::vector<float> extract_embedding(Model<float>& model, const RunConfig& cfg,
                                     const std::string& wav_path);

struct EmbeddingSet {
  int dim = 0;
  std::vector<std::pair<std::string, std::vector<float>>> items;
};

// Binary embeddings: magic "SMLE", u32 dim, then per utterance u16 id
// length, id bytes, dim little-endian f32 values.
void write_smle(const std::string& path, const EmbeddingSet& set);
EmbeddingSet read_smle(const std::string& path);

struct EvalSummary {
  double eer_percent = 0.0;
  double min_dcf = 0.0;
  double thr_eer = 0.0;
  double thr_dcf = 0.0;
};

std::string summary_line(const EvalSummary& s);

// Scores every trial with cached embeddings; when `score_out` is nonempty
// writes `label<TAB>score` lines followed by the summary line.
EvalSummary score_trials(Model<float>& model, const RunConfig& cfg,
                         const std::vector<Trial>& trials,
                         const std::string& score_out);

// Same scoring over precomputed embeddings keyed by utterance id.
EvalSummary score_trials_embedded(
    const std::map<std::string, std::vector<float>>& embeddings,
    const std::vector<Trial>& trials, const std::string& score_out);

}  // namespace sv

#endif  // SVKIT_EVAL_HPP_

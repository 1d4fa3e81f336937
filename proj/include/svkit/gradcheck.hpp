// svkit/gradcheck.hpp
//
// Copyright 2026 svkit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef SVKIT_GRADCHECK_HPP_
#define SVKIT_GRADCHECK_HPP_

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "svkit/rng.hpp"
#include "svkit/tensor.hpp"

namespace sv {

struct GradCheckEntry {
  size_t input_index;
  std::int64_t coord;
  double analytic;
  double numeric;
  double rel_err;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  size_t checked = 0;
  std::vector<GradCheckEntry> worst;  // entries above tolerance

  bool ok(double tol) const { return max_rel_err <= tol; }
};

// Compares reverse-mode gradients against central finite differences
// (f(x+h) - f(x-h)) / 2h.  `f` must rebuild its graph on every call and
// return a scalar.  Meant for 64-bit tensors; float truncation error
// swamps the h^2 term otherwise.
//
// `coords[i]` lists the coordinates of inputs[i] to probe; an empty list
// means every coordinate.
template <typename T>
GradCheckReport grad_check(const std::function<Tensor<T>()>& f,
                           std::vector<Tensor<T>> inputs, double h,
                           double tol,
                           std::vector<std::vector<std::int64_t>> coords = {}) {
  for (auto& in : inputs) in.zero_grad();
  Tensor<T> out = f();
  out.backward();
  std::vector<std::vector<T>> analytic;
  for (auto& in : inputs) analytic.push_back(in.grad());
  for (auto& in : inputs) in.zero_grad();

  GradCheckReport report;
  for (size_t ii = 0; ii < inputs.size(); ++ii) {
    std::vector<std::int64_t> idx;
    if (ii < coords.size() && !coords[ii].empty()) {
      idx = coords[ii];
    } else {
      idx.resize(static_cast<size_t>(inputs[ii].size()));
      for (std::int64_t j = 0; j < inputs[ii].size(); ++j)
        idx[static_cast<size_t>(j)] = j;
    }
    for (std::int64_t j : idx) {
      T& slot = inputs[ii].data()[static_cast<size_t>(j)];
      const T saved = slot;
      slot = saved + static_cast<T>(h);
      const double fp = static_cast<double>(f().item());
      slot = saved - static_cast<T>(h);
      const double fm = static_cast<double>(f().item());
      slot = saved;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = static_cast<double>(analytic[ii][static_cast<size_t>(j)]);
      const double denom = std::max({1.0, std::fabs(a), std::fabs(numeric)});
      const double rel = std::fabs(a - numeric) / denom;
      ++report.checked;
      if (rel > report.max_rel_err) report.max_rel_err = rel;
      if (rel > tol)
        report.worst.push_back({ii, j, a, numeric, rel});
    }
  }
  return report;
}

// Uniformly samples up to `count` coordinates of a tensor.
inline std::vector<std::int64_t> sample_coords(std::int64_t size, size_t count,
                                               Rng& rng) {
  std::vector<std::int64_t> out;
  if (static_cast<std::int64_t>(count) >= size) {
    out.resize(static_cast<size_t>(size));
    for (std::int64_t i = 0; i < size; ++i) out[static_cast<size_t>(i)] = i;
    return out;
  }
  for (size_t i = 0; i < count; ++i)
    out.push_back(static_cast<std::int64_t>(rng.uniform_int(static_cast<std::uint64_t>(size))));
  return out;
}

}  // namespace sv

#endif  // SVKIT_GRADCHECK_HPP_

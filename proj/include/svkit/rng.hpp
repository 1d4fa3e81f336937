// svkit/rng.hpp
//
// Copyright 2026 svkit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef SVKIT_RNG_HPP_
#define SVKIT_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <string>

namespace sv {

// Splitmix64-based generator.  The entire state is one u64, so streams can
// be derived functionally from (seed, name, indices) and results never
// depend on call order across streams.  One run seed, many named streams:
// "init", "dropout", "augment", "order", ...
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    // 128-bit-ish combine, then one splitmix round.
    a ^= b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2);
    return split(a);
  }

  static std::uint64_t hash_str(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    return h;
  }

  // Named sub-stream, optionally indexed (epoch, utterance id, ...).
  static Rng stream(std::uint64_t seed, const std::string& name) {
    return Rng(mix(seed, hash_str(name)));
  }
  static Rng stream(std::uint64_t seed, const std::string& name,
                    std::uint64_t i) {
    return Rng(mix(mix(seed, hash_str(name)), i));
  }
  static Rng stream(std::uint64_t seed, const std::string& name,
                    std::uint64_t i, std::uint64_t j) {
    return Rng(mix(mix(mix(seed, hash_str(name)), i), j));
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return split(state_);
  }

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n), n >= 1.
  std::uint64_t uniform_int(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
  }

  // Standard normal via Box-Muller.  No spare caching so the state stays a
  // single serializable word.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  std::uint64_t state() const { return state_; }

 private:
  static std::uint64_t split(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace sv

#endif  // SVKIT_RNG_HPP_

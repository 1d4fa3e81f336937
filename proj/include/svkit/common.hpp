// svkit/common.hpp
//
// Copyright 2026 svkit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0

#ifndef SVKIT_COMMON_HPP_
#define SVKIT_COMMON_HPP_

#include <stdexcept>
#include <string>

namespace sv {

// Process exit codes: 0 success, 2 config, 3 data/ingestion, 4 numeric,
// 5 evaluation.
class Error : public std::runtime_error {
 public:
  Error(int exit_code, const std::string& msg)
      : std::runtime_error(msg), exit_code_(exit_code) {}
  int exit_code() const { return exit_code_; }

 private:
  int exit_code_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(2, msg) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& msg) : Error(3, msg) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& msg) : Error(4, msg) {}
};

// Shape/axis misuse inside the tensor engine.
class DimensionError : public NumericError {
 public:
  explicit DimensionError(const std::string& msg) : NumericError(msg) {}
};

class EvalError : public Error {
 public:
  explicit EvalError(const std::string& msg) : Error(5, msg) {}
};

}  // namespace sv

#endif  // SVKIT_COMMON_HPP_

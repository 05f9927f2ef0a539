#pragma once

#include <stdexcept>
#include <string>

namespace mtcad {

// Parameter/shape violations use std::invalid_argument directly.

// Factorization failures, non-finite values, undefined metrics.
struct numeric_error : std::runtime_error {
  explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

// Operation attempted in an invalid lifecycle state (e.g. inference
// before batch-norm statistics exist).
struct state_error : std::runtime_error {
  explicit state_error(const std::string& what) : std::runtime_error(what) {}
};

// File/format problems.
struct io_error : std::runtime_error {
  explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

// Mutually unusable artifacts (e.g. checkpoint pilot length vs dataset).
struct incompat_error : std::runtime_error {
  explicit incompat_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace mtcad

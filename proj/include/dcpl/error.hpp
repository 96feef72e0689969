#pragma once

#include <stdexcept>
#include <string>

namespace dcpl {

// Every failure surfaced by the library derives from Error. The category
// maps onto the process exit code used by the command-line front end.
enum class ErrorCategory {
  kConfig = 1,
  kData = 2,
  kNumeric = 3,
  kInternal = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }
  int exit_code() const noexcept { return static_cast<int>(category_); }

 private:
  ErrorCategory category_;
};

// Bad argument to a numeric kernel or API call (shape mismatch, tau <= 0...).
class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& what)
      : Error(ErrorCategory::kData, what) {}
};

// Input is well-formed but unusable (zero-norm vector, empty dataset).
class DegenerateInputError : public Error {
 public:
  explicit DegenerateInputError(const std::string& what)
      : Error(ErrorCategory::kData, what) {}
};

// A class has no mass (centroid weight or pseudo-label cluster is empty).
class DegenerateClassError : public DegenerateInputError {
 public:
  DegenerateClassError(std::size_t cls, const std::string& what)
      : DegenerateInputError(what), cls_(cls) {}
  std::size_t class_index() const noexcept { return cls_; }

 private:
  std::size_t cls_;
};

// On-disk container problems: missing file, bad magic, truncated body,
// out-of-range labels, non-finite values.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what)
      : Error(ErrorCategory::kData, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what)
      : Error(ErrorCategory::kConfig, what) {}
};

// Loss or parameters became NaN/Inf during training.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what)
      : Error(ErrorCategory::kNumeric, what) {}
};

// Violated internal contract (e.g. frozen state mutated, non-deterministic
// evaluator handed to the gradient checker).
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what)
      : Error(ErrorCategory::kInternal, what) {}
};

}  // namespace dcpl

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gwsnake {

// Base for every failure the library reports deliberately.  `code()` is a
// stable machine-readable tag; the CLI maps it into its error JSON.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

class LukasiewiczViolation : public Error {
 public:
  LukasiewiczViolation(std::size_t index, const std::string& what)
      : Error("lukasiewicz_violation", what), index_(index) {}
  // First prefix length at which the degree sequence fails.
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

class DegenerateTree : public Error {
 public:
  explicit DegenerateTree(const std::string& what)
      : Error("degenerate_tree", what) {}
};

class InvalidDistribution : public Error {
 public:
  explicit InvalidDistribution(const std::string& what)
      : Error("invalid_distribution", what) {}
};

class UnsupportedSize : public Error {
 public:
  explicit UnsupportedSize(const std::string& what)
      : Error("unsupported_size", what) {}
};

class RejectionBudgetExceeded : public Error {
 public:
  explicit RejectionBudgetExceeded(const std::string& what)
      : Error("rejection_budget_exceeded", what) {}
};

class MissingArity : public Error {
 public:
  explicit MissingArity(const std::string& what)
      : Error("missing_arity", what) {}
};

class NotCentered : public Error {
 public:
  explicit NotCentered(const std::string& what)
      : Error("not_centered", what) {}
};

class InvalidArgs : public Error {
 public:
  explicit InvalidArgs(const std::string& what)
      : Error("invalid_args", what) {}
};

class InvalidWindow : public Error {
 public:
  explicit InvalidWindow(const std::string& what)
      : Error("invalid_window", what) {}
};

class DimensionMismatch : public Error {
 public:
  explicit DimensionMismatch(const std::string& what)
      : Error("dimension_mismatch", what) {}
};

class CapExceeded : public Error {
 public:
  explicit CapExceeded(const std::string& what)
      : Error("cap_exceeded", what) {}
};

class NotPSD : public Error {
 public:
  explicit NotPSD(const std::string& what) : Error("not_psd", what) {}
};

class InsufficientReplicates : public Error {
 public:
  explicit InsufficientReplicates(const std::string& what)
      : Error("insufficient_replicates", what) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what)
      : Error("parse_error", what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("io_error", what) {}
};

}  // namespace gwsnake

#ifndef VFSCORE_COMMON_ERRORS_HPP_
#define VFSCORE_COMMON_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace vfscore {

// Base class for every error the library raises on purpose. `kind()` is a
// stable machine-readable label; the CLI prints it in front of the message.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& msg)
      : std::runtime_error(kind + ": " + msg), kind_(std::move(kind)) {}
  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

// Operand shapes do not chain, or a scalar was expected.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& msg) : Error("shape error", msg) {}
};

// An operation produced NaN or Inf.
class NonFiniteError : public Error {
 public:
  explicit NonFiniteError(const std::string& msg)
      : Error("non-finite error", msg) {}
};

// Softmax over a fully-masked row, pooling over all-padding input, etc.
class DegenerateError : public Error {
 public:
  explicit DegenerateError(const std::string& msg)
      : Error("degenerate error", msg) {}
};

// cosine() of a zero-length vector.
class ZeroNormError : public Error {
 public:
  explicit ZeroNormError(const std::string& msg)
      : Error("zero-norm error", msg) {}
};

// Malformed input file (transcript line, prosodic record, embedding table).
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& msg) : Error("format error", msg) {}
};

// Schema version recorded in one artifact does not match another.
class VersionError : public Error {
 public:
  explicit VersionError(const std::string& msg)
      : Error("version error", msg) {}
};

// Invalid configuration: bad hyperparameters, missing checkpoint, k % heads.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg)
      : Error("configuration error", msg) {}
};

// The data cannot support the request: too few positives to form a pair,
// fewer negatives than requested per group, single-class labels, folds
// that would lose a class.
class DataError : public Error {
 public:
  explicit DataError(const std::string& msg) : Error("data error", msg) {}
};

// Training produced a non-finite loss or gradient.
class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& msg)
      : Error("training-divergence error", msg) {}
};

}  // namespace vfscore

#endif  // VFSCORE_COMMON_ERRORS_HPP_

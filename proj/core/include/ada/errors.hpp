#pragma once

#include <stdexcept>
#include <string>

namespace ada {

/// Root of every error the toolkit raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes that do not fit together.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An ImageBatch invariant was violated; `sample_index` names the offending sample.
class ValidationError : public Error {
 public:
  enum class Kind { Range, NonFinite, LabelMismatch, Channels, LabelRange };

  ValidationError(Kind kind, int sample_index, const std::string& what)
      : Error(what), kind_(kind), sample_index_(sample_index) {}

  Kind kind() const { return kind_; }
  int sample_index() const { return sample_index_; }

 private:
  Kind kind_;
  int sample_index_;
};

/// Bad configuration values or config-file syntax.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Two latent codes too close to form a diversity ratio.
class DegeneratePairError : public Error {
 public:
  using Error::Error;
};

/// A training loss became NaN or infinite; `step` is the global optimizer step.
class NonFiniteLossError : public Error {
 public:
  NonFiniteLossError(long step, const std::string& what) : Error(what), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

/// Checkpoint, dataset, or report file problems.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace ada

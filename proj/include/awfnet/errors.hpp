#pragma once

#include <stdexcept>
#include <string>

namespace awfnet {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Operand shapes incompatible with an operation, or invalid geometry
/// (e.g. kernel larger than the padded input, odd spatial size for dwt2).
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value (group divisibility, block count range, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// API contract violation (non-scalar loss for backward, empty input, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// An operation produced a non-finite value. Carries the offending op name
/// so the training loop can report the first NaN-producing op.
class NumericsError : public Error {
 public:
  NumericsError(const std::string& op, const std::string& msg)
      : Error("op '" + op + "': " + msg), op_(op) {}
  const std::string& op_name() const { return op_; }

 private:
  std::string op_;
};

/// Class label outside [0, num_classes).
class LabelError : public Error {
 public:
  using Error::Error;
};

/// Metric undefined for the given inputs (e.g. AUC with one class present).
class MetricError : public Error {
 public:
  using Error::Error;
};

class DatasetError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint file damaged: bad magic, truncation, checksum mismatch.
class CheckpointCorruptError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint readable but its manifest does not match the network.
class CheckpointIncompatibleError : public Error {
 public:
  using Error::Error;
};

/// gradcheck detected forward-value drift between probes.
class DeterminismError : public Error {
 public:
  using Error::Error;
};

/// Training aborted (divergence, ...). Message names the failing op/epoch.
class TrainError : public Error {
 public:
  using Error::Error;
};

}  // namespace awfnet

#pragma once

#include <stdexcept>
#include <string>

namespace lfc {

/// Precondition or shape violation on a public API.
class InvalidArgument : public std::invalid_argument {
public:
  explicit InvalidArgument(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Bitstream container cannot be decoded as a whole (bad magic, absent
/// reference record, inconsistent header).
class CorruptStream : public std::runtime_error {
public:
  explicit CorruptStream(const std::string& msg) : std::runtime_error(msg) {}
};

/// A single view payload cannot be parsed (truncation, out-of-range symbol).
class MalformedPayload : public std::runtime_error {
public:
  explicit MalformedPayload(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite loss or gradient during optimisation.
class TrainingDiverged : public std::runtime_error {
public:
  explicit TrainingDiverged(const std::string& msg) : std::runtime_error(msg) {}
};

/// External encoder process failed to run or produced unusable output.
class ProcessError : public std::runtime_error {
public:
  explicit ProcessError(const std::string& msg) : std::runtime_error(msg) {}
};

/// File format error (images, manifests, model files).
class FormatError : public std::runtime_error {
public:
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace lfc

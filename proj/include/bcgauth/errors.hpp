// Error taxonomy shared by all pipeline stages. Every failure carries a
// machine-readable kind so callers (and the CLI) can react without parsing
// message text.
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bcgauth {

enum class ErrorKind {
  Io,             // file open/read/write failures
  Parse,          // malformed file contents
  Integrity,      // data violates a stream invariant (e.g. non-monotonic time)
  NoOverlap,      // sensor streams share no time window
  Extrapolation,  // resample grid outside the raw timestamp range
  TooShort,       // input shorter than an operation's minimum length
  Shape,          // tensor/segment dimensions do not match a contract
  InvalidGenome,  // genome collapses the network's time axis
  Input,          // non-finite or otherwise unusable numeric input
  Training,       // training preconditions violated (e.g. empty class)
  Config,         // configuration invariants violated
  UndefinedRate,  // a rate requested over an empty outcome list
  Dataset,        // dataset manifest inconsistent or entry missing
  Duration,       // recording too short for the requested policy
};

std::string_view error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return "io";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Integrity: return "integrity";
    case ErrorKind::NoOverlap: return "no_overlap";
    case ErrorKind::Extrapolation: return "extrapolation";
    case ErrorKind::TooShort: return "too_short";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::InvalidGenome: return "invalid_genome";
    case ErrorKind::Input: return "input";
    case ErrorKind::Training: return "training";
    case ErrorKind::Config: return "config";
    case ErrorKind::UndefinedRate: return "undefined_rate";
    case ErrorKind::Dataset: return "dataset";
    case ErrorKind::Duration: return "duration";
  }
  return "unknown";
}

}  // namespace bcgauth

// Error types shared by every bundlemw module.

#pragma once

#include <stdexcept>
#include <string>

namespace bundlemw {

enum class ErrorKind {
  InvalidArgument,
  AntipodalPoint,
  NoConvergence,
  DegenerateFrame,
  NotSymmetric,
  NotPositiveSemidefinite,
  DimensionMismatch,
  InfeasibleWeights,
  FrameMismatch,
  ClusterTooSmall,
  DegenerateTriangle,
  DegenerateContour,
  SegmentTooSmall,
  Io,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::AntipodalPoint: return "AntipodalPoint";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::DegenerateFrame: return "DegenerateFrame";
    case ErrorKind::NotSymmetric: return "NotSymmetric";
    case ErrorKind::NotPositiveSemidefinite: return "NotPositiveSemidefinite";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InfeasibleWeights: return "InfeasibleWeights";
    case ErrorKind::FrameMismatch: return "FrameMismatch";
    case ErrorKind::ClusterTooSmall: return "ClusterTooSmall";
    case ErrorKind::DegenerateTriangle: return "DegenerateTriangle";
    case ErrorKind::DegenerateContour: return "DegenerateContour";
    case ErrorKind::SegmentTooSmall: return "SegmentTooSmall";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

/// Numerical failures (as opposed to bad input) map to a distinct CLI exit code.
inline bool is_numerical(ErrorKind kind) {
  return kind == ErrorKind::AntipodalPoint || kind == ErrorKind::NoConvergence ||
         kind == ErrorKind::DegenerateFrame;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

namespace detail {

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace detail
}  // namespace bundlemw

#pragma once

#include <stdexcept>
#include <string>

namespace fdeq {

enum class ErrorKind {
  Dimension,
  Singular,
  Bounds,
  Size,
  Order,
  Pole,
  Inversion,
  FixedPoint,
  Grid,
  Profile,
  Block,
  Degenerate,
  Domain,
  Support,
  Parameter,
  Coverage,
  Shape,
  Parse,
  Io,
};

inline const char* kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::Dimension: return "dimension";
    case ErrorKind::Singular: return "singularity";
    case ErrorKind::Bounds: return "bounds";
    case ErrorKind::Size: return "size";
    case ErrorKind::Order: return "order";
    case ErrorKind::Pole: return "pole";
    case ErrorKind::Inversion: return "inversion";
    case ErrorKind::FixedPoint: return "fixed-point";
    case ErrorKind::Grid: return "grid";
    case ErrorKind::Profile: return "profile";
    case ErrorKind::Block: return "block";
    case ErrorKind::Degenerate: return "degenerate-block";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Support: return "support";
    case ErrorKind::Parameter: return "parameter";
    case ErrorKind::Coverage: return "coverage";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(kind_name(kind)) + " error: " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  // true for failures caused by bad user input rather than by numerics
  bool is_input_error() const noexcept {
    return kind_ == ErrorKind::Parse || kind_ == ErrorKind::Io || kind_ == ErrorKind::Shape ||
           kind_ == ErrorKind::Dimension || kind_ == ErrorKind::Profile ||
           kind_ == ErrorKind::Grid || kind_ == ErrorKind::Parameter ||
           kind_ == ErrorKind::Support || kind_ == ErrorKind::Size;
  }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace fdeq

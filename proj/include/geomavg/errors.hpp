#pragma once

#include <stdexcept>
#include <string>

namespace geomavg {

/// Failure kinds surfaced by the geometry stack. Solvers throw instead of
/// returning sentinel values so callers cannot silently consume bad data.
enum class Err {
  NotCompatible,      // almost-complex candidate fails I^2 = -Id
  Degenerate,         // singular pairing / non-positive operator encountered
  LeftDomain,         // integration left the chart box
  LeftTube,           // flow trajectory left the certified tube
  NoConvergence,      // iterative solver ran out of iterations
  DimensionMismatch,  // operands of incompatible sizes
  OutsideTube,        // query point beyond a declared tube radius
  MultipleLifts,      // section lift is not unique at requested tolerance
  DomainError,        // scalar function evaluated outside its domain
  NotGentle,          // submanifold fails the tube-regularity screen
  ConfigError,        // malformed scenario / option input
};

const char* err_name(Err e);

class GeomError : public std::runtime_error {
 public:
  GeomError(Err kind, const std::string& msg)
      : std::runtime_error(std::string(err_name(kind)) + ": " + msg), kind_(kind) {}

  Err kind() const { return kind_; }

 private:
  Err kind_;
};

[[noreturn]] inline void fail(Err kind, const std::string& msg) { throw GeomError(kind, msg); }

inline const char* err_name(Err e) {
  switch (e) {
    case Err::NotCompatible: return "NotCompatible";
    case Err::Degenerate: return "Degenerate";
    case Err::LeftDomain: return "LeftDomain";
    case Err::LeftTube: return "LeftTube";
    case Err::NoConvergence: return "NoConvergence";
    case Err::DimensionMismatch: return "DimensionMismatch";
    case Err::OutsideTube: return "OutsideTube";
    case Err::MultipleLifts: return "MultipleLifts";
    case Err::DomainError: return "DomainError";
    case Err::NotGentle: return "NotGentle";
    case Err::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace geomavg

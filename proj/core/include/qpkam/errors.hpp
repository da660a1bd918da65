#pragma once

#include <stdexcept>
#include <string>

#include "qpkam/multi_index.hpp"

namespace qpkam {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ContractViolation : Error {
  using Error::Error;
};
struct EnvelopeViolation : Error {
  using Error::Error;
};
struct WidthViolation : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct DivergenceError : Error {
  using Error::Error;
};
struct InversionFailure : Error {
  using Error::Error;
};
struct SmallnessViolation : Error {
  using Error::Error;
};
struct CertificateFailure : Error {
  using Error::Error;
};

struct SmallDivisorError : Error {
  SmallDivisorError(const MultiIndex& l, double divisor, double floor)
      : Error("small divisor at l=" + l.to_string() + ": |omega.l|=" + std::to_string(divisor) +
              " below floor " + std::to_string(floor)),
        index(l),
        divisor(divisor),
        floor(floor) {}
  MultiIndex index;
  double divisor;
  double floor;
};

// Second Melnikov failure: omega falls in an excluded set at this rung.
struct MelnikovFailure : Error {
  MelnikovFailure(const MultiIndex& l, int j, int jp, double inv_norm, double bound)
      : Error("Melnikov condition fails at l=" + l.to_string() + " j=" + std::to_string(j) +
              " j'=" + std::to_string(jp) + ": ||O^-1||=" + std::to_string(inv_norm) + " > " +
              std::to_string(bound)),
        index(l),
        j(j),
        jp(jp),
        inverse_norm(inv_norm),
        bound(bound) {}
  MultiIndex index;
  int j;
  int jp;
  double inverse_norm;
  double bound;
};

}  // namespace qpkam

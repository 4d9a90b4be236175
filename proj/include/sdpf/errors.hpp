#ifndef SDPF_ERRORS_HPP_
#define SDPF_ERRORS_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sdpf {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// join/leq called on two different JoinValue variants (a misrouted increment).
class VariantMismatchError : public Error {
 public:
  using Error::Error;
};

/// join_all over an empty multiset; the bottom element is variant-specific
/// and must be supplied by the caller.
class EmptyJoinError : public Error {
 public:
  using Error::Error;
};

/// Op-code not present in the registry.
class UnknownOpError : public Error {
 public:
  using Error::Error;
};

/// Increment constructed without one of the five metadata fields.
class MissingFieldError : public Error {
 public:
  using Error::Error;
};

/// Increment addressed to a node that does not host the target.
class RoutingError : public Error {
 public:
  using Error::Error;
};

/// Malformed reduction request (rule/arity mismatch).
class ArityError : public Error {
 public:
  using Error::Error;
};

/// Dangling tile reference or tombstoned root during readback.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// Metrics query on an empty or degenerate ledger.
class LedgerError : public Error {
 public:
  using Error::Error;
};

/// Regression input unusable (too few points, non-positive values).
class FitError : public Error {
 public:
  using Error::Error;
};

/// Malformed increment wire bytes.
class CodecError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : Error(what + " at position " + std::to_string(position)),
        position_(position) {}

  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

}  // namespace sdpf

#endif  // SDPF_ERRORS_HPP_

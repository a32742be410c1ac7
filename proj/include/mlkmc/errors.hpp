#pragma once

#include <stdexcept>
#include <string>

namespace mlkmc {

/// Invalid lattice, coarse-graining, potential or run parameters.
class ConfigurationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// No event has a positive rate: the trajectory cannot advance.
class AbsorbingStateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A sampler asked for something its own invariants forbid
/// (e.g. a desorption reconstruction rate in an empty cell).
class InternalLogicError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// An exact computation was asked for a system too large to enumerate.
class SizeLimitError : public std::length_error {
 public:
  using std::length_error::length_error;
};

}  // namespace mlkmc

#pragma once

#include <stdexcept>

namespace varis {

/// A configured size limit (enumeration space, table entries) would be exceeded.
class CapExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The proposal gives zero probability to an instance the network supports.
class DominationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace varis

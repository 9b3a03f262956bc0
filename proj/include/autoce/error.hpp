#pragma once

#include <stdexcept>
#include <string>

namespace autoce {

// Base exception for every failure raised by the library. Messages are
// single-line so the CLI can forward them verbatim.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& message) {
  if (!ok) throw Error(message);
}

}  // namespace autoce

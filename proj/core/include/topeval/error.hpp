#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace topeval {

// Raised for malformed inputs, violated preconditions and I/O failures.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-fatal conditions collected while an operation runs ("flags").
using Flags = std::vector<std::string>;

}  // namespace topeval

#pragma once

#include <stdexcept>
#include <string>

namespace mitosyn {

// Bad input: malformed files, violated preconditions, inconsistent configs.
// The CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Failure while executing an otherwise valid request (I/O, numerical blow-up).
// The CLI maps this to exit code 2.
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mitosyn

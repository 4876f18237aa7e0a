#pragma once

#include <stdexcept>
#include <string>

namespace bdt {

// Input that violates a schema, precondition or invariant. CLI exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Missing, unreadable or unwritable files. CLI exit code 2.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace bdt

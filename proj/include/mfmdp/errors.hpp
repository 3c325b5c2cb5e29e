#pragma once

#include <stdexcept>
#include <string>

namespace mfmdp {

// Bad input data or configuration. The CLI maps this to exit code 1.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// A request exceeds a documented scale cap. The CLI maps this to exit code 2.
struct CapError : std::runtime_error {
  explicit CapError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mfmdp

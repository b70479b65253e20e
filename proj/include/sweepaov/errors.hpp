#pragma once

#include <stdexcept>
#include <string>

namespace sweepaov {

// Base class for everything this library throws.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad inputs: dimension mismatches, out-of-range parameters, malformed files.
// The CLI maps these to exit code 2.
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& msg) : Error(msg) {}
};

// Numerical failures: non-convergence, violated matrix identities, negative
// sums of squares beyond tolerance. The CLI maps these to exit code 3.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

}  // namespace sweepaov

#pragma once

#include <stdexcept>
#include <string>

namespace flab {

// Malformed input: files, headers, on-disk structures. The CLI maps this
// (together with std::invalid_argument) to exit code 2.
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure: training divergence, sampling constraints that cannot be
// satisfied. The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace flab

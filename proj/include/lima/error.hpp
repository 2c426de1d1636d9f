#pragma once

#include <stdexcept>
#include <string>

namespace lima {

/// Malformed or inconsistent input: bad geometry, bad files, bad arguments.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A statistic that cannot be formed for the given data, e.g. a zero normalizer.
class DegenerateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace lima

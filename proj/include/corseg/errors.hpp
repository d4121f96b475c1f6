#pragma once

#include <stdexcept>
#include <string>

namespace corseg {

// Base class for all engine errors.
// input_error maps to CLI exit code 1, numeric_error to exit code 2.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct input_error : error {
    using error::error;
};

struct bounds_error : input_error {
    using input_error::input_error;
};

struct numeric_error : error {
    using error::error;
};

} // namespace corseg

#pragma once

#include <stdexcept>
#include <string>

namespace cfuse {

// Bad user input: malformed files, config values, or arguments. The CLI maps
// this to exit code 1.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A numerical procedure could not produce a result (singular design, no
// bracket, empty acceptance region, infeasible matching).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace cfuse

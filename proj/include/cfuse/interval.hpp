#pragma once

#include <map>
#include <string>

namespace cfuse {

/// Alternative of a one-sided test. UPPER tests H1: beta > beta0 (its p-value
/// grows with beta0 and yields the lower confidence limit); LOWER tests
/// H1: beta < beta0 and is evaluated by negating the outcomes.
enum class Direction { kUpper, kLower };

inline char const* to_string(Direction d) { return d == Direction::kUpper ? "upper" : "lower"; }

struct SensitivityParams {
    double gamma = 1.0;
    double delta = 0.0;
};

struct IntervalResult {
    std::string method;  // os | rct | combined
    double lower = 0.0;
    double upper = 0.0;
    double alpha = 0.05;
    double gamma = 1.0;
    double delta = 0.0;
    double estimate = 0.0;
    std::map<std::string, double> diagnostics;

    double length() const { return upper - lower; }
    bool covers(double value) const { return lower <= value && value <= upper; }
};

}  // namespace cfuse

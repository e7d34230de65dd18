#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>

namespace tvcast {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

// Bad inputs: malformed files, invalid configuration, schema violations.
// The CLI maps this to exit code 2.
class DataError : public std::runtime_error {
  public:
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite intermediates, Cholesky breakdown, sampler divergence.
// The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
  public:
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw DataError(msg);
}

inline void require_numeric(bool cond, const std::string& msg) {
    if (!cond) throw NumericalError(msg);
}

// Shortest-ish decimal text for a double that still round-trips exactly.
inline std::string format_double(double x) {
    char buf[40];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, x);
        if (std::strtod(buf, nullptr) == x) return buf;
    }
    return buf;
}

inline std::string format_double(double x, int precision) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.*g", precision, x);
    return buf;
}

}  // namespace tvcast

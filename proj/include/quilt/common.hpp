#pragma once

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace quilt {

/// Bad inputs: malformed designs, out-of-range correlations, schema errors.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failure: solver non-convergence, singular systems, loss of PD.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& msg, double residual = 0.0)
        : std::runtime_error(msg), residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_;
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

namespace log {

enum class Level { off = 0, warn = 1, info = 2, debug = 3 };

// Level comes from the QUILT_LOG env var: off|warn|info|debug (default warn).
Level level();
void write(Level lvl, const std::string& msg);

inline void warn(const std::string& msg) { write(Level::warn, msg); }
inline void info(const std::string& msg) { write(Level::info, msg); }
inline void debug(const std::string& msg) { write(Level::debug, msg); }

}  // namespace log

}  // namespace quilt

#pragma once

#include <stdexcept>
#include <string>

namespace tailshape {

/// Invalid argument or configuration value.
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed or invalid configuration file. line and column are 1-based;
/// zero when the problem is not tied to one location.
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& what, int line = 0, int column = 0)
        : std::runtime_error(what), line_(line), column_(column) {}
    int line() const noexcept { return line_; }
    int column() const noexcept { return column_; }

private:
    int line_;
    int column_;
};

/// Matrix/vector shapes that do not fit together.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// An iterative method ran out of iterations. The message carries the
/// iterate diagnostics.
class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class RangeError : public std::range_error {
public:
    using std::range_error::range_error;
};

/// Adaptive step size fell below the representable minimum.
class StiffnessError : public std::runtime_error {
public:
    StiffnessError(const std::string& what, double t, double state_norm, double susceptibility)
        : std::runtime_error(what), t_(t), state_norm_(state_norm), susceptibility_(susceptibility) {}

    double time() const noexcept { return t_; }
    double state_norm() const noexcept { return state_norm_; }
    double susceptibility() const noexcept { return susceptibility_; }

private:
    double t_;
    double state_norm_;
    double susceptibility_;
};

/// The state became NaN or infinite.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, double t) : std::runtime_error(what), t_(t) {}
    double time() const noexcept { return t_; }

private:
    double t_;
};

}  // namespace tailshape

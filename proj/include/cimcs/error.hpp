#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cimcs {

/// Thrown when an operation receives malformed or out-of-range input.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// An SDE trajectory produced a non-finite value or an error variable left
/// the representable range. Carries where it happened.
class IntegrationFailure : public std::runtime_error {
public:
    IntegrationFailure(const std::string& what, std::size_t step, double time, std::size_t pulse)
        : std::runtime_error(what + " (step " + std::to_string(step) + ", t=" + std::to_string(time) +
                             ", pulse " + std::to_string(pulse) + ")"),
          step_(step), time_(time), pulse_(pulse) {}

    std::size_t step() const noexcept { return step_; }
    double time() const noexcept { return time_; }
    std::size_t pulse() const noexcept { return pulse_; }

private:
    std::size_t step_;
    double time_;
    std::size_t pulse_;
};

/// Failure inside one alternating-minimisation iteration.
class IterationFailure : public std::runtime_error {
public:
    IterationFailure(int iteration, const std::string& what)
        : std::runtime_error("iteration " + std::to_string(iteration) + ": " + what), iteration_(iteration) {}
    int iteration() const noexcept { return iteration_; }

private:
    int iteration_;
};

/// Experiment configuration failed schema validation.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const char* msg) {
    if (!cond) throw InvalidArgument(msg);
}

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw InvalidArgument(msg);
}

} // namespace cimcs

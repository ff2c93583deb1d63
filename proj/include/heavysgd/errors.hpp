#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace heavysgd {

/// Parameter outside its admissible domain (alpha not in (0,2], rho not in (0,1), ...).
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Not enough usable data for an estimator (too few samples, all-equal magnitudes, ...).
class InsufficientDataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A Monte-Carlo or statistical estimate could not be formed.
class EstimationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An iterative solver did not reach its tolerance within the iteration budget.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double achieved)
        : std::runtime_error(what), achieved_(achieved) {}
    double achieved() const noexcept { return achieved_; }

private:
    double achieved_;
};

/// A non-finite iterate appeared in a stochastic-approximation run.
class DivergenceError : public std::runtime_error {
public:
    explicit DivergenceError(std::uint64_t first_bad_index)
        : std::runtime_error("non-finite iterate at t = " + std::to_string(first_bad_index)),
          index_(first_bad_index) {}
    std::uint64_t index() const noexcept { return index_; }

private:
    std::uint64_t index_;
};

/// Configuration or input file failed validation.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace heavysgd

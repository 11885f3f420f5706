#pragma once

#include <stdexcept>
#include <string>

namespace ksdgof {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed arguments: dimension mismatches, empty inputs, out-of-range indices.
class InputError : public Error {
public:
    using Error::Error;
};

/// A computation produced a non-finite value.
class NumericError : public Error {
public:
    using Error::Error;
};

/// The median heuristic collapsed to zero (all points coincide).
class DegenerateBandwidthError : public NumericError {
public:
    using NumericError::NumericError;
};

/// The Stein moment matrix could not be inverted.
class EstimationError : public NumericError {
public:
    EstimationError(const std::string& what, double condition)
        : NumericError(what), condition_(condition) {}

    [[nodiscard]] double condition() const noexcept { return condition_; }

private:
    double condition_;
};

/// The grid sampler could not form a usable CDF.
class SamplingError : public NumericError {
public:
    using NumericError::NumericError;
};

/// A bootstrap replicate failed twice; the test is aborted rather than biased.
class BootstrapAbort : public NumericError {
public:
    BootstrapAbort(const std::string& what, std::size_t replicate)
        : NumericError(what), replicate_(replicate) {}

    [[nodiscard]] std::size_t replicate() const noexcept { return replicate_; }

private:
    std::size_t replicate_;
};

/// Bad data files: unparsable rows, wrong row counts, non-finite values.
class DataError : public Error {
public:
    using Error::Error;
};

/// Invalid experiment or CLI configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace ksdgof

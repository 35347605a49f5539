#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace nhpp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain of the operation (time outside the
/// study period, empty interval, split index out of range, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// More basis functions than bins.
class IdentifiabilityError : public Error {
public:
    IdentifiabilityError(std::size_t basis_size, std::size_t bins)
        : Error("identifiability: " + std::to_string(basis_size) +
                " basis functions (L) but only " + std::to_string(bins) +
                " bins (N); reduce the interior knot count so that L <= N"),
          basis_size_(basis_size),
          bins_(bins) {}

    [[nodiscard]] std::size_t basis_size() const noexcept { return basis_size_; }
    [[nodiscard]] std::size_t bins() const noexcept { return bins_; }

private:
    std::size_t basis_size_;
    std::size_t bins_;
};

/// Non-finite or overflowing linear predictor.
class NumericError : public Error {
public:
    NumericError(const std::string& what, std::size_t bin)
        : Error(what + " (bin " + std::to_string(bin + 1) + ")"), bin_(bin) {}

    /// Zero-based index of the offending bin.
    [[nodiscard]] std::size_t bin() const noexcept { return bin_; }

private:
    std::size_t bin_;
};

class RankDeficiencyError : public Error {
public:
    using Error::Error;
};

/// Fisher scoring ran out of iterations. Carries the last iterate.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, std::vector<double> iterate, double score_norm)
        : Error(what), iterate_(std::move(iterate)), score_norm_(score_norm) {}

    [[nodiscard]] const std::vector<double>& iterate() const noexcept { return iterate_; }
    [[nodiscard]] double score_norm() const noexcept { return score_norm_; }

private:
    std::vector<double> iterate_;
    double score_norm_;
};

/// The data carry no information for the requested computation
/// (all-zero series, zero total count).
class DegenerateDataError : public Error {
public:
    using Error::Error;
};

/// Malformed input file. `line()` is 1-based; 0 when not tied to a line.
class IngestError : public Error {
public:
    IngestError(const std::string& what, std::size_t line)
        : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Invalid simulation scenario.
class SpecError : public Error {
public:
    using Error::Error;
};

/// Too many bootstrap replicates failed for the resample to be trusted.
class OracleError : public Error {
public:
    using Error::Error;
};

}  // namespace nhpp

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace edgescout {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid configuration or mismatched shapes.
class ArgumentError : public Error {
public:
    using Error::Error;
};

enum class DataErrorKind { not_found, io, bad_magic, truncated, count_mismatch, bad_length };

class DataError : public Error {
public:
    DataError(DataErrorKind kind, const std::string& what) : Error(what), kind_(kind) {}
    DataErrorKind kind() const noexcept { return kind_; }

private:
    DataErrorKind kind_;
};

// Non-finite loss, gradient or iterate. `index` is the epoch, layer or
// iteration at which the failure was detected.
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, std::size_t index = 0) : Error(what), index_(index) {}
    std::size_t index() const noexcept { return index_; }

private:
    std::size_t index_;
};

}  // namespace edgescout

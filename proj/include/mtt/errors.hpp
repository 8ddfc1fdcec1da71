#pragma once

#include <stdexcept>
#include <string>

namespace mtt {

// Bad shapes, bad arguments, malformed files: the caller gave us something
// that can never work.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

class ShapeError : public ValidationError {
public:
    explicit ShapeError(const std::string& msg) : ValidationError(msg) {}
};

// A row of attention scores with every position masked out.
class MaskError : public ValidationError {
public:
    explicit MaskError(const std::string& msg) : ValidationError(msg) {}
};

// Misuse of the autodiff tape (non-scalar loss, double backward).
class TapeError : public std::runtime_error {
public:
    explicit TapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// An op produced NaN/Inf. Ops refuse to propagate non-finite values.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Problems in the data pipeline: duplicate timestamps, unfillable columns,
// empty extractions.
class DataError : public ValidationError {
public:
    explicit DataError(const std::string& msg) : ValidationError(msg) {}
};

// Training hit a non-finite loss.
class DivergedError : public std::runtime_error {
public:
    explicit DivergedError(const std::string& msg) : std::runtime_error(msg) {}
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mtt

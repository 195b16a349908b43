#pragma once

#include <stdexcept>
#include <string>

namespace deepsft {

/// Input outside the mathematical domain of an operation (point behind the camera, non-positive depth).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Values outside a declared range, e.g. foreground depth outside [z_min, z_max].
class RangeError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// Tensor or raster with the wrong shape.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed or inconsistent model / template / dataset description.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Failure reading or writing files.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical failure inside an iterative procedure (simulation blow-up, empty reductions).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace deepsft

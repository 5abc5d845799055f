#pragma once

#include <stdexcept>
#include <string>

namespace hmlab {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Stencil would leave the chart or cross a non-periodic boundary.
class BoundaryProximityError : public Error {
public:
    using Error::Error;
};

class SingularMetricError : public Error {
public:
    using Error::Error;
};

// Argument outside the mathematical domain of a formula.
class DomainError : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace hmlab

#pragma once

#include <stdexcept>
#include <string>

namespace attrib {

// Exception hierarchy. The CLI maps each family onto an exit code:
// ConfigError -> 2, DataError -> 3, NumericalError -> 4.

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Mismatched region counts, basis rows, draw widths, ...
class DimensionError : public DataError {
public:
    using DataError::DataError;
};

class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace attrib

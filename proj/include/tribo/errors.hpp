#pragma once

#include <stdexcept>
#include <string>

namespace tribo {

/// Invalid generator or mapping parameters.
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Input sequence violates an ordering precondition.
class OrderingError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Configuration could not be parsed or failed validation.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File-system failure; the message carries the offending path.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace tribo

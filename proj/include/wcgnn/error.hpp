#pragma once

#include <stdexcept>
#include <string>

namespace wcgnn {

// Invalid configuration or precondition violation on user-supplied input.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Shape or dimension mismatch between operands.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Persistence failures: unreadable files, bad magic, version mismatch.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A numerical routine produced a non-finite value.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace wcgnn

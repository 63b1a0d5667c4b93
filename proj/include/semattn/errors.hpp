#pragma once

#include <stdexcept>
#include <string>

namespace semattn {

// Error taxonomy shared by every module. Callers catch by the specific type
// when they need to map failures to exit codes (see tools/).

class ShapeError : public std::invalid_argument {
 public:
    using std::invalid_argument::invalid_argument;
};

class RangeError : public std::out_of_range {
 public:
    using std::out_of_range::out_of_range;
};

class FormatError : public std::runtime_error {
 public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public std::invalid_argument {
 public:
    using std::invalid_argument::invalid_argument;
};

class DependencyError : public std::runtime_error {
 public:
    using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
    using std::runtime_error::runtime_error;
};

}  // namespace semattn

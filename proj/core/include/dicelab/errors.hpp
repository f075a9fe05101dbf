#pragma once

#include <stdexcept>
#include <string>

namespace dicelab {

// Error taxonomy shared with the CLI exit codes:
//   config -> 1, data -> 2, numeric -> 3
enum class ErrorClass { config, data, numeric };

class Error : public std::runtime_error {
public:
    Error(ErrorClass cls, const std::string& msg) : std::runtime_error(msg), cls_(cls) {}
    ErrorClass cls() const { return cls_; }

private:
    ErrorClass cls_;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(ErrorClass::config, msg) {}
};

// Invalid shapes or mismatched dimensions between operands.
class DimensionError : public ConfigError {
public:
    explicit DimensionError(const std::string& msg) : ConfigError(msg) {}
};

// Missing, malformed, or inconsistent files and stored artifacts.
class DataError : public Error {
public:
    explicit DataError(const std::string& msg) : Error(ErrorClass::data, msg) {}
};

// Non-finite values where finite ones are required.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& msg) : Error(ErrorClass::numeric, msg) {}
};

inline const char* error_class_name(ErrorClass c) {
    switch (c) {
        case ErrorClass::config: return "config";
        case ErrorClass::data: return "data";
        case ErrorClass::numeric: return "numeric";
    }
    return "unknown";
}

}  // namespace dicelab

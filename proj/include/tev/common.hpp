#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace tev {

/// Malformed in-memory input (wrong channel count, mismatched dimensions, ...).
class MalformedInputError : public std::runtime_error {
public:
    explicit MalformedInputError(const std::string& what) : std::runtime_error(what) {}
};

/// Broken on-disk data: bad magic, truncation, out-of-range fields.
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

/// Tensor/layer shape disagreement.
class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid model or training configuration.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite loss or other numeric breakdown during training.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace tev

#ifndef BSENSE_ERRORS_HPP
#define BSENSE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace bsense {

// Feature schema of a model does not match the features being fed to it.
class SchemaError : public std::runtime_error {
public:
    explicit SchemaError(const std::string& what) : std::runtime_error(what) {}
};

// A sensor stream does not cover the time range required by an operation.
class CoverageError : public std::runtime_error {
public:
    explicit CoverageError(const std::string& what) : std::runtime_error(what) {}
};

// Inconsistent or missing run configuration (model bundles, splits, ...).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed persisted data (model files, session stores, wire frames).
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace bsense

#endif

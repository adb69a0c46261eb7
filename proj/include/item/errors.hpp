#pragma once

#include <stdexcept>
#include <string>

namespace item {

// Invalid domain object (bad spec field, out-of-range label, ...).
// `field` names the offending input.
class ValidationError : public std::runtime_error {
public:
    ValidationError(std::string field, const std::string& message)
        : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

// Malformed file content. `line` is 1-based, 0 when not line-specific.
class ParseError : public std::runtime_error {
public:
    ParseError(std::string path, long line, const std::string& message)
        : std::runtime_error(path + (line > 0 ? ":" + std::to_string(line) : "") + ": " + message),
          path_(std::move(path)),
          line_(line) {}
    const std::string& path() const { return path_; }
    long line() const { return line_; }

private:
    std::string path_;
    long line_;
};

// Bad run configuration. Maps to exit code 1 in the CLI.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& message)
        : std::runtime_error("config key '" + key + "': " + message), key_(std::move(key)) {}
    const std::string& key() const { return key_; }

private:
    std::string key_;
};

// Non-finite loss or parameters during training. Maps to exit code 2.
class TrainingDiverged : public std::runtime_error {
public:
    explicit TrainingDiverged(const std::string& message) : std::runtime_error(message) {}
};

} // namespace item

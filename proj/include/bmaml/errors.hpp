#pragma once

#include <stdexcept>
#include <string>

namespace bmaml {

/// Violated precondition or shape mismatch in a public API.
class ContractError : public std::invalid_argument {
public:
    explicit ContractError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Non-finite value produced during numeric evaluation.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid or inconsistent experiment configuration; message names the field.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& field, const std::string& msg)
        : std::runtime_error(field + ": " + msg), field_(field) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

/// Malformed or truncated checkpoint file.
class CheckpointParseError : public std::runtime_error {
public:
    explicit CheckpointParseError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Checkpoint payload does not match its recorded checksum.
class CheckpointChecksumError : public std::runtime_error {
public:
    explicit CheckpointChecksumError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Checkpoint written by an unsupported format version.
class CheckpointVersionError : public std::runtime_error {
public:
    explicit CheckpointVersionError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Training aborted because the meta-loss became non-finite.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(long iteration, const std::string& msg)
        : std::runtime_error(msg), iteration_(iteration) {}
    long iteration() const { return iteration_; }

private:
    long iteration_;
};

}  // namespace bmaml

#pragma once

#include <stdexcept>
#include <string>

namespace deepfuse {

/// Invalid shapes, channel chains, or option combinations.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// NaN/Inf encountered in a computation that must stay finite.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Unreadable, malformed, or mismatched input data (images, manifests).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// API misuse such as a backward pass against a stale forward cache.
class UsageError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class CheckpointError : public std::runtime_error {
public:
    enum class Kind { Io, BadMagic, VersionMismatch, Truncated, ChecksumMismatch, Malformed };

    CheckpointError(Kind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

}  // namespace deepfuse

#pragma once

#include <stdexcept>
#include <string>

namespace npae {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A caller violated an operation's preconditions (shape mismatch,
/// out-of-bounds box, infeasible size range, ...).
struct InvalidArgument : Error {
    using Error::Error;
};

/// A box grid admits no box under the requested parameters.
struct EmptyGridError : Error {
    using Error::Error;
};

/// Training produced a non-finite loss or gradient.
struct TrainingDiverged : Error {
    int epoch;
    explicit TrainingDiverged(const std::string& msg, int epoch_index)
        : Error(msg), epoch(epoch_index) {}
};

/// A checkpoint file failed structural validation; `field` names the
/// offending part (magic, version, blob name, crc, ...).
struct CorruptCheckpoint : Error {
    std::string field;
    CorruptCheckpoint(const std::string& msg, std::string offending_field)
        : Error(msg), field(std::move(offending_field)) {}
};

/// Filesystem problem: unreadable, unwritable or missing file.
struct IoError : Error {
    using Error::Error;
};

/// A downstream command was invoked before its upstream artifact exists.
struct MissingArtifact : Error {
    using Error::Error;
};

/// A corpus source yielded no usable images.
struct EmptyManifestError : Error {
    using Error::Error;
};

/// Invalid or malformed run configuration.
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace npae

#pragma once

#include <stdexcept>
#include <string>

namespace evo {

// Input with the wrong shape/size for the operation it was handed to.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Loss became non-finite during training; carries the epoch it happened in.
struct TrainingDiverged : std::runtime_error {
    int epoch;
    explicit TrainingDiverged(int epoch_idx)
        : std::runtime_error("training diverged: non-finite loss at epoch " +
                             std::to_string(epoch_idx)),
          epoch(epoch_idx) {}
};

// Sampling plus repair could not produce a connected descendant.
struct SynthesisFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Checkpoint failed checksum/shape validation on load.
struct CorruptCheckpoint : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dataset directory ingestion problem (unmatched or unreadable file).
struct IngestionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Run configuration file problem (missing section, unknown key, bad value).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace evo

#pragma once

#include <cstdint>
#include <string>

#include "evosynth/network.hpp"

namespace evo {

struct CheckpointMeta {
    int format_version = 1;
    int generation = 1;
    std::int64_t num_synapses = 0;
    double f_beta = 0.0;
    double mae = 0.0;
    double train_loss = 0.0;
    std::uint64_t synthesis_seed = 0;
    std::uint64_t init_seed = 0;
    std::uint64_t train_seed = 0;
};

// Writes manifest.json, weights.bin and mask.bin into `dir`. weights.bin is
// each weighted layer's weight tensor followed by its bias, row-major
// little-endian float32, in layer order; mask.bin packs each layer's mask
// bits LSB-first, padded to a byte boundary per layer. The manifest carries
// shapes, counts, seeds, metrics and an FNV-1a 64-bit checksum per blob.
void save_checkpoint(const Network& net, const CheckpointMeta& meta,
                     const std::string& dir);

struct LoadedCheckpoint {
    Network net;
    CheckpointMeta meta;
};

// Round-trips save_checkpoint bit-exactly. Throws CorruptCheckpoint on
// checksum, size or shape disagreement between manifest and blobs.
LoadedCheckpoint load_checkpoint(const std::string& dir);

std::uint64_t fnv1a64(const void* data, std::size_t size);

}  // namespace evo

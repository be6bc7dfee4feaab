#pragma once

#include <cstdint>
#include <vector>

#include "evosynth/network.hpp"

namespace evo {

// Per-synapse strength of a trained generation: strength = |weight|.
// Entries are stored aligned to the flat weight index of each layer and are
// meaningful only where the source mask is set.
struct SynapticStrengths {
    std::vector<std::vector<double>> values;       // per layer, flat-indexed
    std::vector<std::vector<std::uint8_t>> masks;  // source-generation masks
    int generation = 1;

    bool has(int layer, std::int64_t idx) const {
        return masks[layer][static_cast<std::size_t>(idx)] != 0;
    }
};

enum class ZMode { per_layer, global };

struct DnaLayer {
    double z = 1.0;                   // normalization constant
    std::vector<double> prob;         // flat-indexed; valid where mask is set
    std::vector<std::uint8_t> mask;   // synapses living in the source generation

    bool has(std::int64_t idx) const { return mask[static_cast<std::size_t>(idx)] != 0; }
    std::int64_t living_count() const {
        std::int64_t n = 0;
        for (auto b : mask) n += b;
        return n;
    }
};

// The "DNA" of a trained network: an independent inheritance probability
// p = exp(strength/Z - 1) per living synapse. Synapses masked off in the
// source generation carry no entry and can never be re-synthesized.
struct DnaModel {
    std::vector<DnaLayer> layers;
    int source_generation = 1;

    std::int64_t living_count() const {
        std::int64_t n = 0;
        for (const auto& l : layers) n += l.living_count();
        return n;
    }
};

SynapticStrengths extract_strengths(const Network& net);

// Z = max strength in the layer; degenerate layers (empty or all-zero) fall
// back to Z = 1 so the exponent stays defined.
double compute_normalization(const SynapticStrengths& strengths, int layer);

// The exponential inheritance factor. Requires 0 <= strength <= z; a
// strength above its own normalization constant is an internal inconsistency.
double synapse_probability(double strength, double z);

DnaModel encode_dna(const Network& net, ZMode mode = ZMode::per_layer);

}  // namespace evo

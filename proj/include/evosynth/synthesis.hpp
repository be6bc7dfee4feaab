#pragma once

#include <cstdint>
#include <vector>

#include "evosynth/heredity.hpp"
#include "evosynth/layers.hpp"

namespace evo {

// Environmental factor model. Only the constant retention budget is
// implemented: the scalar C caps every synapse's synthesis probability.
struct EnvConstraint {
    enum class Kind { constant_retention };
    Kind kind = Kind::constant_retention;
    double retention = 0.4;  // C in [0,1]
};

void validate(const EnvConstraint& env);

// Per-synapse synthesis probabilities p' = C * p, flat-aligned like the DNA.
struct ScaledProbabilities {
    std::vector<std::vector<double>> prob;
    std::vector<std::vector<std::uint8_t>> mask;  // synapses living in the ancestor
};

ScaledProbabilities synthesis_probabilities(const DnaModel& dna,
                                            const EnvConstraint& env);

// One independent u ~ U(0,1) per living synapse, drawn in layer order then
// flat-index order from a generator seeded with `seed`; the synapse is kept
// iff p' >= u. u is drawn from the open interval, so p' = 0 never keeps and
// p' = 1 always keeps.
std::vector<std::vector<std::uint8_t>> realize(const ScaledProbabilities& probs,
                                               std::uint64_t seed);

struct RepairEvent {
    enum class Kind { forced_synapse, dead_neuron };
    Kind kind = Kind::forced_synapse;
    int layer = 0;
    std::int64_t index = 0;  // synapse flat index, or neuron unit
};
using RepairLog = std::vector<RepairEvent>;

struct RepairResult {
    Architecture arch;
    RepairLog log;
    std::vector<std::int64_t> forced_per_layer;
    std::vector<std::int64_t> pruned_per_layer;
};

// Turns a raw sampled mask into a valid architecture: (a) a weighted layer
// sampled empty gets its single most probable synapse back (ties broken by
// lowest flat index); (b,c) dead-neuron elimination runs to fixpoint.
// Throws SynthesisFailure when no input-to-output path survives.
RepairResult repair(const std::vector<std::vector<std::uint8_t>>& raw_masks,
                    const DnaModel& dna, const Architecture& ancestor_arch);

struct SynthesisOptions {
    int retry_budget = 16;  // extra attempts, each bumping the seed by one
    ZMode zmode = ZMode::per_layer;
};

struct SynthesisOutcome {
    Architecture descendant;
    std::vector<std::int64_t> sampled_per_layer;  // kept by sampling, pre-repair
    std::vector<std::int64_t> forced_per_layer;
    std::vector<std::int64_t> pruned_per_layer;
    std::uint64_t seed_used = 0;
    RepairLog repair_log;

    std::int64_t sampled_total() const;
    std::int64_t forced_total() const;
    std::int64_t pruned_total() const;
};

// encode -> scale -> realize -> repair. Deterministic in (ancestor, env,
// seed); on repair failure retries with seed+1 up to the retry budget, then
// propagates SynthesisFailure.
SynthesisOutcome synthesize(const Network& ancestor, const EnvConstraint& env,
                            std::uint64_t seed,
                            const SynthesisOptions& opts = {});

}  // namespace evo

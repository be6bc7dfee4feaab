#include "evosynth/synthesis.hpp"

#include <random>
#include <stdexcept>

#include "evosynth/errors.hpp"
#include "evosynth/rng.hpp"

namespace evo {

void validate(const EnvConstraint& env) {
    if (env.kind != EnvConstraint::Kind::constant_retention)
        throw std::invalid_argument("unsupported environmental factor model");
    if (!(env.retention >= 0.0 && env.retention <= 1.0))
        throw std::invalid_argument("retention budget C must lie in [0,1]");
}

ScaledProbabilities synthesis_probabilities(const DnaModel& dna,
                                            const EnvConstraint& env) {
    validate(env);
    ScaledProbabilities out;
    out.prob.resize(dna.layers.size());
    out.mask.resize(dna.layers.size());
    for (std::size_t i = 0; i < dna.layers.size(); ++i) {
        out.mask[i] = dna.layers[i].mask;
        out.prob[i].assign(dna.layers[i].prob.size(), 0.0);
        for (std::size_t j = 0; j < out.prob[i].size(); ++j)
            if (out.mask[i][j])
                out.prob[i][j] = env.retention * dna.layers[i].prob[j];
    }
    return out;
}

std::vector<std::vector<std::uint8_t>> realize(const ScaledProbabilities& probs,
                                               std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::vector<std::uint8_t>> masks(probs.prob.size());
    for (std::size_t i = 0; i < probs.prob.size(); ++i) {
        masks[i].assign(probs.mask[i].size(), 0);
        for (std::size_t j = 0; j < probs.mask[i].size(); ++j) {
            if (!probs.mask[i][j]) continue;
            double p = probs.prob[i][j];
            if (!(p >= 0.0 && p <= 1.0))
                throw std::invalid_argument("synthesis probability outside [0,1]");
            masks[i][j] = (p >= uniform_open01(rng)) ? 1 : 0;
        }
    }
    return masks;
}

RepairResult repair(const std::vector<std::vector<std::uint8_t>>& raw_masks,
                    const DnaModel& dna, const Architecture& ancestor_arch) {
    const Architecture& arch = ancestor_arch;
    if (raw_masks.size() != arch.masks.size())
        throw std::invalid_argument("raw mask layer count mismatch");

    RepairResult res;
    res.forced_per_layer.assign(arch.layers.size(), 0);
    res.pruned_per_layer.assign(arch.layers.size(), 0);

    std::vector<std::vector<std::uint8_t>> masks = raw_masks;
    for (int i = 0; i < arch.num_layers(); ++i) {
        if (!arch.layers[i].has_weights()) continue;
        std::int64_t kept = 0;
        for (auto b : masks[i]) kept += b;
        if (kept > 0) continue;
        // sampled empty: force the single most probable living synapse
        const DnaLayer& layer = dna.layers[i];
        std::int64_t best = -1;
        double best_p = -1.0;
        for (std::size_t j = 0; j < layer.mask.size(); ++j) {
            if (!layer.mask[j]) continue;
            if (layer.prob[j] > best_p) {
                best_p = layer.prob[j];
                best = static_cast<std::int64_t>(j);
            }
        }
        if (best < 0) continue;  // layer already extinct in the ancestor
        masks[i][static_cast<std::size_t>(best)] = 1;
        res.forced_per_layer[i] = 1;
        res.log.push_back({RepairEvent::Kind::forced_synapse, i, best});
    }

    AlivenessResult settled = settle_aliveness(arch, std::move(masks));
    if (!settled.output_reachable)
        throw SynthesisFailure("no input-to-output path survives repair");
    res.pruned_per_layer = settled.pruned_per_layer;

    for (int i = 0; i < arch.num_layers(); ++i) {
        if (!arch.layers[i].has_weights()) continue;
        for (int u = 0; u < arch.layers[i].out.c; ++u)
            if (arch.alive[i][u] && !settled.alive[i][u])
                res.log.push_back({RepairEvent::Kind::dead_neuron, i, u});
    }

    res.arch = arch;
    res.arch.masks = std::move(settled.masks);
    res.arch.alive = std::move(settled.alive);
    res.arch.generation = dna.source_generation + 1;
    return res;
}

std::int64_t SynthesisOutcome::sampled_total() const {
    std::int64_t n = 0;
    for (auto v : sampled_per_layer) n += v;
    return n;
}
std::int64_t SynthesisOutcome::forced_total() const {
    std::int64_t n = 0;
    for (auto v : forced_per_layer) n += v;
    return n;
}
std::int64_t SynthesisOutcome::pruned_total() const {
    std::int64_t n = 0;
    for (auto v : pruned_per_layer) n += v;
    return n;
}

SynthesisOutcome synthesize(const Network& ancestor, const EnvConstraint& env,
                            std::uint64_t seed, const SynthesisOptions& opts) {
    validate(env);
    DnaModel dna = encode_dna(ancestor, opts.zmode);
    ScaledProbabilities probs = synthesis_probabilities(dna, env);

    for (int attempt = 0; attempt <= opts.retry_budget; ++attempt) {
        std::uint64_t attempt_seed = seed + static_cast<std::uint64_t>(attempt);
        auto raw = realize(probs, attempt_seed);
        SynthesisOutcome out;
        out.sampled_per_layer.assign(raw.size(), 0);
        for (std::size_t i = 0; i < raw.size(); ++i)
            for (auto b : raw[i]) out.sampled_per_layer[i] += b;
        try {
            RepairResult rep = repair(raw, dna, ancestor.arch);
            out.descendant = std::move(rep.arch);
            out.forced_per_layer = std::move(rep.forced_per_layer);
            out.pruned_per_layer = std::move(rep.pruned_per_layer);
            out.repair_log = std::move(rep.log);
            out.seed_used = attempt_seed;
            return out;
        } catch (const SynthesisFailure&) {
            if (attempt == opts.retry_budget) throw;
        }
    }
    throw SynthesisFailure("unreachable");  // loop always returns or throws
}

}  // namespace evo

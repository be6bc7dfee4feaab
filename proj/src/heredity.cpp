#include "evosynth/heredity.hpp"

#include <cmath>
#include <stdexcept>

namespace evo {

SynapticStrengths extract_strengths(const Network& net) {
    SynapticStrengths s;
    s.generation = net.arch.generation;
    s.masks = net.arch.masks;
    s.values.resize(net.arch.layers.size());
    for (int i = 0; i < net.arch.num_layers(); ++i) {
        const auto& mask = net.arch.masks[i];
        s.values[i].assign(mask.size(), 0.0);
        for (std::size_t j = 0; j < mask.size(); ++j)
            if (mask[j]) s.values[i][j] = std::abs(static_cast<double>(net.weights[i][j]));
    }
    return s;
}

double compute_normalization(const SynapticStrengths& strengths, int layer) {
    if (layer < 0 || layer >= static_cast<int>(strengths.values.size()))
        throw std::invalid_argument("no such layer: " + std::to_string(layer));
    double z = 0.0;
    const auto& vals = strengths.values[layer];
    const auto& mask = strengths.masks[layer];
    for (std::size_t j = 0; j < vals.size(); ++j)
        if (mask[j] && vals[j] > z) z = vals[j];
    return z > 0.0 ? z : 1.0;
}

double synapse_probability(double strength, double z) {
    if (z <= 0.0) throw std::logic_error("normalization constant must be positive");
    if (strength < 0.0) throw std::logic_error("synaptic strength must be nonnegative");
    if (strength > z)
        throw std::logic_error("synaptic strength exceeds its normalization constant");
    return std::exp(strength / z - 1.0);
}

DnaModel encode_dna(const Network& net, ZMode mode) {
    SynapticStrengths strengths = extract_strengths(net);
    DnaModel dna;
    dna.source_generation = net.arch.generation;
    dna.layers.resize(strengths.values.size());

    double global_z = 1.0;
    if (mode == ZMode::global) {
        double zmax = 0.0;
        for (int i = 0; i < static_cast<int>(strengths.values.size()); ++i)
            for (std::size_t j = 0; j < strengths.values[i].size(); ++j)
                if (strengths.masks[i][j] && strengths.values[i][j] > zmax)
                    zmax = strengths.values[i][j];
        global_z = zmax > 0.0 ? zmax : 1.0;
    }

    for (int i = 0; i < static_cast<int>(strengths.values.size()); ++i) {
        DnaLayer& layer = dna.layers[i];
        layer.mask = strengths.masks[i];
        layer.z = (mode == ZMode::global) ? global_z
                                          : compute_normalization(strengths, i);
        layer.prob.assign(layer.mask.size(), 0.0);
        for (std::size_t j = 0; j < layer.mask.size(); ++j)
            if (layer.mask[j])
                layer.prob[j] = synapse_probability(strengths.values[i][j], layer.z);
    }
    return dna;
}

}  // namespace evo

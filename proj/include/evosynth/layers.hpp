#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evosynth/tensor.hpp"

namespace evo {

enum class LayerKind { dense, conv2d, upsample, concat, nonlinearity };
enum class Activation { relu, sigmoid, identity };

const char* to_string(LayerKind k);
const char* to_string(Activation a);
LayerKind layer_kind_from_string(const std::string& s);
Activation activation_from_string(const std::string& s);

// Channels-first spatial shape. Dense vectors are (units,1,1).
struct Shape3 {
    int c = 0, h = 0, w = 0;
    std::int64_t numel() const {
        return static_cast<std::int64_t>(c) * h * w;
    }
    bool operator==(const Shape3& o) const {
        return c == o.c && h == o.h && w == o.w;
    }
    bool operator!=(const Shape3& o) const { return !(*this == o); }
    std::string str() const;
};

struct LayerSpec {
    LayerKind kind = LayerKind::dense;
    Shape3 in, out;  // declared; validate() recomputes and compares
    Activation act = Activation::identity;
    int kh = 0, kw = 0;  // conv2d kernel
    int stride = 1;      // conv2d
    int pad = 0;         // conv2d zero-padding, both spatial dims
    int factor = 1;      // upsample
    int from = -1;       // concat: earlier layer index, -1 = network input

    bool has_weights() const {
        return kind == LayerKind::dense || kind == LayerKind::conv2d;
    }
    // Weight elements = synapses of this layer. Biases are not synapses.
    std::int64_t weight_count() const;
    std::vector<int> weight_shape() const;

    // Unplaced prototypes; in/out get filled by make_architecture.
    static LayerSpec dense(int units, Activation act);
    static LayerSpec conv2d(int out_channels, int kh, int kw, int stride,
                            int pad, Activation act);
    static LayerSpec upsample(int factor);
    static LayerSpec concat(int from);
    static LayerSpec nonlinearity(Activation act);
};

// Layered graph of possible neurons and synapses: a sequential stack where
// concat layers may additionally pull in one earlier layer's output. Each
// weighted layer carries a per-weight-element boolean mask and per-output
// neuron-alive flags.
struct Architecture {
    Shape3 input;
    std::vector<LayerSpec> layers;
    std::vector<std::vector<std::uint8_t>> masks;  // per layer; empty if weightless
    std::vector<std::vector<std::uint8_t>> alive;  // per layer; one flag per out channel
    int generation = 1;

    Shape3 output() const { return layers.back().out; }
    int num_layers() const { return static_cast<int>(layers.size()); }
};

// Propagates shapes through the stack, checks parameter invariants, and
// returns a fully-masked (all synapses present, all neurons alive)
// architecture. Throws std::invalid_argument on a bad stack.
Architecture make_architecture(Shape3 input, std::vector<LayerSpec> protos,
                               int generation = 1);

// Full invariant check: declared vs computed shapes, mask/alive sizes,
// aliveness consistency (dead neurons have all incident synapses masked,
// alive ones are at their fixpoint), and an unmasked input-to-output path.
// Throws std::invalid_argument describing the first violation.
void validate(const Architecture& arch);

// Number of unmasked weight elements, biases excluded.
std::int64_t count_synapses(const Architecture& arch);
std::int64_t count_synapses_layer(const Architecture& arch, int layer);

// A neuron is a dense unit or a conv channel. layer == -1 addresses the
// network input channels, otherwise a weighted layer's output channels.
struct NeuronRef {
    int layer = -1;
    int unit = 0;
    bool operator==(const NeuronRef& o) const {
        return layer == o.layer && unit == o.unit;
    }
};

// The weighted-layer output (or network input channel) that produces channel
// `unit` of layer `layer`'s output; pass layer = -1 for the network input.
NeuronRef resolve_producer(const Architecture& arch, int layer, int unit);

// Network output channels traced back to their producing neurons. These are
// the neurons exempt from the no-outgoing-synapse elimination rule.
std::vector<NeuronRef> output_neurons(const Architecture& arch);

// Dead-neuron elimination to fixpoint over a candidate mask set: a neuron
// with no unmasked incoming synapses dies and drops its outgoing synapses; a
// non-output neuron with no unmasked outgoing synapses dies and drops its
// incoming ones. Pure with respect to `arch` (only its shapes are read).
struct AlivenessResult {
    std::vector<std::vector<std::uint8_t>> masks;
    std::vector<std::vector<std::uint8_t>> alive;
    std::vector<std::int64_t> pruned_per_layer;
    std::int64_t pruned = 0;        // synapses removed by elimination
    bool output_reachable = false;  // some output neuron still alive
};
AlivenessResult settle_aliveness(const Architecture& arch,
                                 std::vector<std::vector<std::uint8_t>> masks);

}  // namespace evo

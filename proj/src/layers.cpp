#include "evosynth/layers.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "evosynth/errors.hpp"

namespace evo {

const char* to_string(LayerKind k) {
    switch (k) {
        case LayerKind::dense: return "dense";
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::upsample: return "upsample";
        case LayerKind::concat: return "concat";
        case LayerKind::nonlinearity: return "nonlin";
    }
    return "?";
}

const char* to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::sigmoid: return "sigmoid";
        case Activation::identity: return "identity";
    }
    return "?";
}

LayerKind layer_kind_from_string(const std::string& s) {
    if (s == "dense") return LayerKind::dense;
    if (s == "conv2d") return LayerKind::conv2d;
    if (s == "upsample") return LayerKind::upsample;
    if (s == "concat") return LayerKind::concat;
    if (s == "nonlin" || s == "nonlinearity") return LayerKind::nonlinearity;
    throw std::invalid_argument("unknown layer kind '" + s + "'");
}

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "sigmoid") return Activation::sigmoid;
    if (s == "identity" || s == "none") return Activation::identity;
    throw std::invalid_argument("unknown activation '" + s + "'");
}

std::string Shape3::str() const {
    std::ostringstream os;
    os << c << "x" << h << "x" << w;
    return os.str();
}

std::int64_t LayerSpec::weight_count() const {
    switch (kind) {
        case LayerKind::dense: return static_cast<std::int64_t>(out.c) * in.numel();
        case LayerKind::conv2d:
            return static_cast<std::int64_t>(out.c) * in.c * kh * kw;
        default: return 0;
    }
}

std::vector<int> LayerSpec::weight_shape() const {
    switch (kind) {
        case LayerKind::dense: return {out.c, static_cast<int>(in.numel())};
        case LayerKind::conv2d: return {out.c, in.c, kh, kw};
        default: return {};
    }
}

LayerSpec LayerSpec::dense(int units, Activation act) {
    LayerSpec s;
    s.kind = LayerKind::dense;
    s.out.c = units;
    s.act = act;
    return s;
}

LayerSpec LayerSpec::conv2d(int out_channels, int kh, int kw, int stride,
                            int pad, Activation act) {
    LayerSpec s;
    s.kind = LayerKind::conv2d;
    s.out.c = out_channels;
    s.kh = kh;
    s.kw = kw;
    s.stride = stride;
    s.pad = pad;
    s.act = act;
    return s;
}

LayerSpec LayerSpec::upsample(int factor) {
    LayerSpec s;
    s.kind = LayerKind::upsample;
    s.factor = factor;
    return s;
}

LayerSpec LayerSpec::concat(int from) {
    LayerSpec s;
    s.kind = LayerKind::concat;
    s.from = from;
    return s;
}

LayerSpec LayerSpec::nonlinearity(Activation act) {
    LayerSpec s;
    s.kind = LayerKind::nonlinearity;
    s.act = act;
    return s;
}

namespace {

void fail(int layer, const std::string& what) {
    throw std::invalid_argument("layer " + std::to_string(layer) + ": " + what);
}

// Fills in/out of each spec from the input shape, checking parameter
// invariants along the way.
void propagate_shapes(Shape3 input, std::vector<LayerSpec>& specs) {
    if (input.c < 1 || input.h < 1 || input.w < 1)
        throw std::invalid_argument("input shape " + input.str() +
                                    ": all dimensions must be >= 1");
    Shape3 cur = input;
    for (int i = 0; i < static_cast<int>(specs.size()); ++i) {
        LayerSpec& s = specs[i];
        s.in = cur;
        switch (s.kind) {
            case LayerKind::dense:
                if (s.out.c < 1) fail(i, "dense units must be >= 1");
                s.out.h = s.out.w = 1;
                break;
            case LayerKind::conv2d: {
                if (s.out.c < 1) fail(i, "conv2d out-channels must be >= 1");
                if (s.kh < 1 || s.kw < 1) fail(i, "conv2d kernel dims must be >= 1");
                if (s.stride < 1) fail(i, "conv2d stride must be >= 1");
                if (s.pad < 0) fail(i, "conv2d padding must be >= 0");
                if (s.pad >= s.kh || s.pad >= s.kw)
                    fail(i, "conv2d padding must be smaller than the kernel");
                int oh = (cur.h + 2 * s.pad - s.kh) / s.stride + 1;
                int ow = (cur.w + 2 * s.pad - s.kw) / s.stride + 1;
                if (oh < 1 || ow < 1)
                    fail(i, "conv2d output collapses to zero size for input " +
                                cur.str());
                s.out.h = oh;
                s.out.w = ow;
                break;
            }
            case LayerKind::upsample:
                if (s.factor < 1) fail(i, "upsample factor must be >= 1");
                s.out = {cur.c, cur.h * s.factor, cur.w * s.factor};
                break;
            case LayerKind::concat: {
                if (s.from < -1 || s.from >= i)
                    fail(i, "concat source must be an earlier layer or -1 for the input");
                Shape3 src = (s.from == -1) ? input : specs[s.from].out;
                if (src.h != cur.h || src.w != cur.w)
                    fail(i, "concat spatial shapes differ: " + cur.str() +
                                " vs " + src.str());
                s.out = {cur.c + src.c, cur.h, cur.w};
                break;
            }
            case LayerKind::nonlinearity:
                s.out = cur;
                break;
        }
        if (s.out.c < 1 || s.out.h < 1 || s.out.w < 1)
            fail(i, "output shape " + s.out.str() + " has a dimension < 1");
        cur = s.out;
    }
}

// id space for neurons: network input channels first, then each weighted
// layer's output channels.
struct NeuronIds {
    std::vector<int> offset;  // indexed by layer+1
    int total = 0;

    explicit NeuronIds(const Architecture& arch) {
        offset.assign(arch.layers.size() + 1, -1);
        offset[0] = 0;
        total = arch.input.c;
        for (int i = 0; i < arch.num_layers(); ++i) {
            if (arch.layers[i].has_weights()) {
                offset[i + 1] = total;
                total += arch.layers[i].out.c;
            }
        }
    }
    int id(NeuronRef r) const { return offset[r.layer + 1] + r.unit; }
};

}  // namespace

NeuronRef resolve_producer(const Architecture& arch, int layer, int unit) {
    while (layer >= 0) {
        const LayerSpec& s = arch.layers[layer];
        switch (s.kind) {
            case LayerKind::dense:
            case LayerKind::conv2d:
                return {layer, unit};
            case LayerKind::nonlinearity:
            case LayerKind::upsample:
                --layer;
                break;
            case LayerKind::concat: {
                int prev_c = s.in.c;
                if (unit < prev_c) {
                    --layer;
                } else {
                    unit -= prev_c;
                    layer = s.from;
                }
                break;
            }
        }
    }
    return {-1, unit};
}

std::vector<NeuronRef> output_neurons(const Architecture& arch) {
    std::vector<NeuronRef> out;
    if (arch.layers.empty()) return out;
    int last = arch.num_layers() - 1;
    for (int c = 0; c < arch.layers[last].out.c; ++c) {
        NeuronRef r = resolve_producer(arch, last, c);
        if (std::find(out.begin(), out.end(), r) == out.end()) out.push_back(r);
    }
    return out;
}

AlivenessResult settle_aliveness(const Architecture& arch,
                                 std::vector<std::vector<std::uint8_t>> masks) {
    AlivenessResult res;
    NeuronIds ids(arch);

    std::vector<std::uint8_t> alive(ids.total, 1);
    std::vector<std::uint8_t> is_output(ids.total, 0);
    for (NeuronRef r : output_neurons(arch)) is_output[ids.id(r)] = 1;

    // Per weighted layer: source neuron id of each input channel.
    std::vector<std::vector<int>> in_src(arch.layers.size());
    for (int i = 0; i < arch.num_layers(); ++i) {
        if (!arch.layers[i].has_weights()) continue;
        in_src[i].resize(arch.layers[i].in.c);
        for (int c = 0; c < arch.layers[i].in.c; ++c)
            in_src[i][c] = ids.id(resolve_producer(arch, i - 1, c));
    }

    std::int64_t pruned_total = 0;
    std::vector<std::int64_t> pruned_layer(arch.layers.size(), 0);

    // Masks only shrink, so this converges.
    bool changed = true;
    while (changed) {
        changed = false;

        std::vector<std::int64_t> incoming(ids.total, 0);
        std::vector<std::int64_t> outgoing(ids.total, 0);
        for (int i = 0; i < arch.num_layers(); ++i) {
            const LayerSpec& s = arch.layers[i];
            if (!s.has_weights()) continue;
            const auto& m = masks[i];
            std::int64_t per_out = s.weight_count() / s.out.c;
            std::int64_t plane = (s.kind == LayerKind::conv2d)
                                     ? static_cast<std::int64_t>(s.kh) * s.kw
                                     : static_cast<std::int64_t>(s.in.h) * s.in.w;
            for (int o = 0; o < s.out.c; ++o) {
                const std::uint8_t* row = m.data() + o * per_out;
                std::int64_t oid = ids.offset[i + 1] + o;
                for (std::int64_t j = 0; j < per_out; ++j) {
                    if (!row[j]) continue;
                    ++incoming[oid];
                    int ch = static_cast<int>(j / plane);
                    ++outgoing[in_src[i][ch]];
                }
            }
        }

        for (int i = 0; i < arch.num_layers(); ++i) {
            const LayerSpec& s = arch.layers[i];
            if (!s.has_weights()) continue;
            for (int o = 0; o < s.out.c; ++o) {
                int nid = ids.offset[i + 1] + o;
                if (!alive[nid]) continue;
                bool dead_no_in = incoming[nid] == 0;
                bool dead_no_out = !is_output[nid] && outgoing[nid] == 0;
                if (!dead_no_in && !dead_no_out) continue;
                alive[nid] = 0;
                changed = true;
                if (dead_no_out) {
                    // drop incoming synapses of the dead neuron
                    std::int64_t per_out = s.weight_count() / s.out.c;
                    std::uint8_t* row = masks[i].data() + o * per_out;
                    for (std::int64_t j = 0; j < per_out; ++j) {
                        if (row[j]) {
                            row[j] = 0;
                            ++pruned_total;
                            ++pruned_layer[i];
                        }
                    }
                }
                // drop outgoing synapses wherever this neuron feeds a layer
                for (int m = 0; m < arch.num_layers(); ++m) {
                    const LayerSpec& t = arch.layers[m];
                    if (!t.has_weights()) continue;
                    std::int64_t plane =
                        (t.kind == LayerKind::conv2d)
                            ? static_cast<std::int64_t>(t.kh) * t.kw
                            : static_cast<std::int64_t>(t.in.h) * t.in.w;
                    std::int64_t per_out = t.weight_count() / t.out.c;
                    for (int c = 0; c < t.in.c; ++c) {
                        if (in_src[m][c] != nid) continue;
                        for (int to = 0; to < t.out.c; ++to) {
                            std::uint8_t* row = masks[m].data() + to * per_out;
                            for (std::int64_t j = c * plane; j < (c + 1) * plane; ++j) {
                                if (row[j]) {
                                    row[j] = 0;
                                    ++pruned_total;
                                    ++pruned_layer[m];
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    // Export per-layer alive flags; weightless layers derive from producers.
    res.alive.resize(arch.layers.size());
    for (int i = 0; i < arch.num_layers(); ++i) {
        res.alive[i].resize(arch.layers[i].out.c);
        for (int c = 0; c < arch.layers[i].out.c; ++c) {
            NeuronRef r = resolve_producer(arch, i, c);
            res.alive[i][c] = (r.layer == -1) ? 1 : alive[ids.id(r)];
        }
    }
    res.masks = std::move(masks);
    res.pruned = pruned_total;
    res.output_reachable = false;
    for (NeuronRef r : output_neurons(arch))
        if (r.layer == -1 || alive[ids.id(r)]) res.output_reachable = true;
    res.pruned_per_layer = std::move(pruned_layer);
    return res;
}

Architecture make_architecture(Shape3 input, std::vector<LayerSpec> protos,
                               int generation) {
    if (generation < 1)
        throw std::invalid_argument("generation index must be >= 1");
    propagate_shapes(input, protos);
    Architecture arch;
    arch.input = input;
    arch.layers = std::move(protos);
    arch.generation = generation;
    arch.masks.resize(arch.layers.size());
    arch.alive.resize(arch.layers.size());
    for (int i = 0; i < arch.num_layers(); ++i) {
        arch.masks[i].assign(static_cast<std::size_t>(arch.layers[i].weight_count()), 1);
        arch.alive[i].assign(static_cast<std::size_t>(arch.layers[i].out.c), 1);
    }
    return arch;
}

void validate(const Architecture& arch) {
    if (arch.generation < 1)
        throw std::invalid_argument("generation index must be >= 1");
    std::vector<LayerSpec> recomputed = arch.layers;
    propagate_shapes(arch.input, recomputed);
    for (int i = 0; i < arch.num_layers(); ++i) {
        if (recomputed[i].in != arch.layers[i].in ||
            recomputed[i].out != arch.layers[i].out)
            fail(i, "declared shape " + arch.layers[i].in.str() + "->" +
                        arch.layers[i].out.str() + " differs from computed " +
                        recomputed[i].in.str() + "->" + recomputed[i].out.str());
    }
    if (arch.masks.size() != arch.layers.size() ||
        arch.alive.size() != arch.layers.size())
        throw std::invalid_argument("mask/alive bookkeeping size mismatch");
    for (int i = 0; i < arch.num_layers(); ++i) {
        if (static_cast<std::int64_t>(arch.masks[i].size()) !=
            arch.layers[i].weight_count())
            fail(i, "mask length does not equal the weight element count");
        if (static_cast<int>(arch.alive[i].size()) != arch.layers[i].out.c)
            fail(i, "alive flag count does not equal the output channel count");
    }
    if (arch.layers.empty()) return;
    AlivenessResult settled = settle_aliveness(arch, arch.masks);
    if (!settled.output_reachable)
        throw std::invalid_argument("no unmasked input-to-output path");
    for (int i = 0; i < arch.num_layers(); ++i) {
        if (settled.masks[i] != arch.masks[i])
            fail(i, "mask keeps synapses incident to dead neurons");
        if (settled.alive[i] != arch.alive[i])
            fail(i, "stored neuron-alive flags are not at their fixpoint");
    }
}

std::int64_t count_synapses(const Architecture& arch) {
    std::int64_t n = 0;
    for (const auto& m : arch.masks)
        for (std::uint8_t b : m) n += b;
    return n;
}

std::int64_t count_synapses_layer(const Architecture& arch, int layer) {
    std::int64_t n = 0;
    for (std::uint8_t b : arch.masks[layer]) n += b;
    return n;
}

}  // namespace evo

#include "evosynth/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "evosynth/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are little-endian");

namespace fs = std::filesystem;
using nlohmann::json;

namespace evo {

std::uint64_t fnv1a64(const void* data, std::size_t size) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 14695981039346656037ull;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

namespace {

std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::vector<char> read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw CorruptCheckpoint("missing checkpoint file: " + p.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
    return bytes;
}

json shape_to_json(const Shape3& s) { return json::array({s.c, s.h, s.w}); }

Shape3 shape_from_json(const json& j) {
    if (!j.is_array() || j.size() != 3)
        throw CorruptCheckpoint("bad shape triple in manifest");
    return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>()};
}

}  // namespace

void save_checkpoint(const Network& net, const CheckpointMeta& meta,
                     const std::string& dir) {
    fs::create_directories(dir);
    const Architecture& arch = net.arch;

    std::vector<char> weights_blob;
    std::vector<char> mask_blob;
    for (int i = 0; i < arch.num_layers(); ++i) {
        if (!arch.layers[i].has_weights()) continue;
        const char* w = reinterpret_cast<const char*>(net.weights[i].ptr());
        weights_blob.insert(weights_blob.end(), w,
                            w + net.weights[i].numel() * sizeof(float));
        const char* b = reinterpret_cast<const char*>(net.biases[i].ptr());
        weights_blob.insert(weights_blob.end(), b,
                            b + net.biases[i].numel() * sizeof(float));

        const auto& mask = arch.masks[i];
        std::size_t nbytes = (mask.size() + 7) / 8;
        std::vector<char> packed(nbytes, 0);
        for (std::size_t j = 0; j < mask.size(); ++j)
            if (mask[j]) packed[j / 8] |= static_cast<char>(1 << (j % 8));
        mask_blob.insert(mask_blob.end(), packed.begin(), packed.end());
    }

    json manifest;
    manifest["format_version"] = meta.format_version;
    manifest["generation"] = meta.generation;
    manifest["input_shape"] = shape_to_json(arch.input);
    json layers = json::array();
    for (int i = 0; i < arch.num_layers(); ++i) {
        const LayerSpec& s = arch.layers[i];
        json l;
        l["kind"] = to_string(s.kind);
        l["activation"] = to_string(s.act);
        l["in"] = shape_to_json(s.in);
        l["out"] = shape_to_json(s.out);
        if (s.kind == LayerKind::conv2d) {
            l["kernel"] = json::array({s.kh, s.kw});
            l["stride"] = s.stride;
            l["pad"] = s.pad;
        }
        if (s.kind == LayerKind::upsample) l["factor"] = s.factor;
        if (s.kind == LayerKind::concat) l["from"] = s.from;
        if (s.has_weights()) {
            l["weight_shape"] = s.weight_shape();
            l["bias_shape"] = json::array({s.out.c});
            l["synapses"] = count_synapses_layer(arch, i);
        }
        layers.push_back(std::move(l));
    }
    manifest["layers"] = std::move(layers);
    manifest["num_synapses"] = count_synapses(arch);
    manifest["seeds"] = {{"synthesis", meta.synthesis_seed},
                         {"init", meta.init_seed},
                         {"train", meta.train_seed}};
    manifest["metrics"] = {{"f_beta", meta.f_beta},
                           {"mae", meta.mae},
                           {"train_loss", meta.train_loss}};
    manifest["checksums"] = {
        {"weights_bin", hex64(fnv1a64(weights_blob.data(), weights_blob.size()))},
        {"mask_bin", hex64(fnv1a64(mask_blob.data(), mask_blob.size()))}};

    std::ofstream wf(fs::path(dir) / "weights.bin", std::ios::binary);
    wf.write(weights_blob.data(), static_cast<std::streamsize>(weights_blob.size()));
    std::ofstream mf(fs::path(dir) / "mask.bin", std::ios::binary);
    mf.write(mask_blob.data(), static_cast<std::streamsize>(mask_blob.size()));
    std::ofstream jf(fs::path(dir) / "manifest.json");
    jf << manifest.dump(2) << "\n";
    if (!wf || !mf || !jf)
        throw std::runtime_error("failed writing checkpoint to '" + dir + "'");
}

LoadedCheckpoint load_checkpoint(const std::string& dir) {
    json manifest;
    {
        std::ifstream jf(fs::path(dir) / "manifest.json");
        if (!jf) throw CorruptCheckpoint("missing manifest.json in '" + dir + "'");
        try {
            jf >> manifest;
        } catch (const json::exception& e) {
            throw CorruptCheckpoint(std::string("manifest parse error: ") + e.what());
        }
    }

    LoadedCheckpoint out;
    try {
        if (manifest.at("format_version").get<int>() != 1)
            throw CorruptCheckpoint("unsupported checkpoint format version");
        out.meta.format_version = 1;
        out.meta.generation = manifest.at("generation").get<int>();
        out.meta.num_synapses = manifest.at("num_synapses").get<std::int64_t>();
        out.meta.f_beta = manifest.at("metrics").at("f_beta").get<double>();
        out.meta.mae = manifest.at("metrics").at("mae").get<double>();
        out.meta.train_loss = manifest.at("metrics").at("train_loss").get<double>();
        out.meta.synthesis_seed = manifest.at("seeds").at("synthesis").get<std::uint64_t>();
        out.meta.init_seed = manifest.at("seeds").at("init").get<std::uint64_t>();
        out.meta.train_seed = manifest.at("seeds").at("train").get<std::uint64_t>();

        Shape3 input = shape_from_json(manifest.at("input_shape"));
        std::vector<LayerSpec> protos;
        for (const json& l : manifest.at("layers")) {
            LayerKind kind = layer_kind_from_string(l.at("kind").get<std::string>());
            Activation act = activation_from_string(l.at("activation").get<std::string>());
            LayerSpec s;
            switch (kind) {
                case LayerKind::dense:
                    s = LayerSpec::dense(shape_from_json(l.at("out")).c, act);
                    break;
                case LayerKind::conv2d:
                    s = LayerSpec::conv2d(shape_from_json(l.at("out")).c,
                                          l.at("kernel")[0].get<int>(),
                                          l.at("kernel")[1].get<int>(),
                                          l.at("stride").get<int>(),
                                          l.at("pad").get<int>(), act);
                    break;
                case LayerKind::upsample:
                    s = LayerSpec::upsample(l.at("factor").get<int>());
                    break;
                case LayerKind::concat:
                    s = LayerSpec::concat(l.at("from").get<int>());
                    break;
                case LayerKind::nonlinearity:
                    s = LayerSpec::nonlinearity(act);
                    break;
            }
            protos.push_back(s);
        }

        Architecture arch;
        try {
            arch = make_architecture(input, std::move(protos),
                                     std::max(1, out.meta.generation));
        } catch (const std::invalid_argument& e) {
            throw CorruptCheckpoint(std::string("invalid layer stack: ") + e.what());
        }

        // declared shapes in the manifest must agree with recomputation
        int li = 0;
        for (const json& l : manifest.at("layers")) {
            if (shape_from_json(l.at("in")) != arch.layers[li].in ||
                shape_from_json(l.at("out")) != arch.layers[li].out)
                throw CorruptCheckpoint("manifest layer shapes disagree with stack");
            if (arch.layers[li].has_weights()) {
                std::vector<int> ws = l.at("weight_shape").get<std::vector<int>>();
                if (ws != arch.layers[li].weight_shape())
                    throw CorruptCheckpoint("manifest weight shape disagrees with stack");
            }
            ++li;
        }

        std::vector<char> weights_blob = read_file(fs::path(dir) / "weights.bin");
        std::vector<char> mask_blob = read_file(fs::path(dir) / "mask.bin");
        if (hex64(fnv1a64(weights_blob.data(), weights_blob.size())) !=
            manifest.at("checksums").at("weights_bin").get<std::string>())
            throw CorruptCheckpoint("weights.bin checksum mismatch");
        if (hex64(fnv1a64(mask_blob.data(), mask_blob.size())) !=
            manifest.at("checksums").at("mask_bin").get<std::string>())
            throw CorruptCheckpoint("mask.bin checksum mismatch");

        std::size_t expect_w = 0, expect_m = 0;
        for (int i = 0; i < arch.num_layers(); ++i) {
            if (!arch.layers[i].has_weights()) continue;
            expect_w += (static_cast<std::size_t>(arch.layers[i].weight_count()) +
                         static_cast<std::size_t>(arch.layers[i].out.c)) *
                        sizeof(float);
            expect_m += (static_cast<std::size_t>(arch.layers[i].weight_count()) + 7) / 8;
        }
        if (weights_blob.size() != expect_w)
            throw CorruptCheckpoint("weights.bin size disagrees with manifest tensors");
        if (mask_blob.size() != expect_m)
            throw CorruptCheckpoint("mask.bin size disagrees with manifest tensors");

        Network net;
        net.arch = std::move(arch);
        net.weights.resize(net.arch.layers.size());
        net.biases.resize(net.arch.layers.size());
        std::size_t wpos = 0, mpos = 0;
        for (int i = 0; i < net.arch.num_layers(); ++i) {
            const LayerSpec& s = net.arch.layers[i];
            if (!s.has_weights()) continue;
            net.weights[i] = Tensor(s.weight_shape());
            std::memcpy(net.weights[i].ptr(), weights_blob.data() + wpos,
                        static_cast<std::size_t>(net.weights[i].numel()) * sizeof(float));
            wpos += static_cast<std::size_t>(net.weights[i].numel()) * sizeof(float);
            net.biases[i] = Tensor({s.out.c});
            std::memcpy(net.biases[i].ptr(), weights_blob.data() + wpos,
                        static_cast<std::size_t>(s.out.c) * sizeof(float));
            wpos += static_cast<std::size_t>(s.out.c) * sizeof(float);

            auto& mask = net.arch.masks[i];
            for (std::size_t j = 0; j < mask.size(); ++j)
                mask[j] = (mask_blob[mpos + j / 8] >> (j % 8)) & 1;
            mpos += (mask.size() + 7) / 8;
        }

        AlivenessResult settled = settle_aliveness(net.arch, net.arch.masks);
        if (!settled.output_reachable)
            throw CorruptCheckpoint("checkpoint mask has no input-to-output path");
        net.arch.alive = std::move(settled.alive);
        net.arch.masks = std::move(settled.masks);
        apply_mask(net);

        if (count_synapses(net.arch) != out.meta.num_synapses)
            throw CorruptCheckpoint("synapse count disagrees with manifest");

        out.net = std::move(net);
    } catch (const json::exception& e) {
        throw CorruptCheckpoint(std::string("manifest field error: ") + e.what());
    }
    return out;
}

}  // namespace evo

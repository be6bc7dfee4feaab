#include "evosynth/evolution.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "evosynth/checkpoint.hpp"
#include "evosynth/errors.hpp"

namespace fs = std::filesystem;

namespace evo {

DatasetSplit resolve_dataset(const DataSpec& spec) {
    if (spec.kind == DataSpec::Kind::synthetic)
        return generate_synthetic(spec.seed, spec.count, spec.height, spec.width);
    return load_directory(spec.images_dir, spec.masks_dir, spec.train_frac,
                          spec.val_frac, spec.test_frac);
}

EvalReport evaluate(const Network& net, const std::vector<Sample>& samples,
                    const MetricsConfig& cfg) {
    EvalReport report;
    report.threshold_mode = cfg.mode_str();
    if (samples.empty()) return report;

    Shape3 out = net.arch.output();
    const int kBatch = 16;
    std::vector<Example> ex = to_examples(samples);
    for (std::size_t start = 0; start < ex.size(); start += kBatch) {
        std::size_t end = std::min(ex.size(), start + kBatch);
        std::vector<std::size_t> idx;
        for (std::size_t i = start; i < end; ++i) idx.push_back(i);
        Tensor y = forward(net, stack_inputs(ex, idx));
        if (out.c != 1)
            throw ShapeError("evaluation needs a single-channel output map, got " +
                             out.str());
        for (std::size_t n = 0; n < idx.size(); ++n) {
            const Sample& s = samples[idx[n]];
            if (out.h != s.mask.shape[0] || out.w != s.mask.shape[1])
                throw ShapeError("output map " + out.str() +
                                 " does not match mask " +
                                 std::to_string(s.mask.shape[0]) + "x" +
                                 std::to_string(s.mask.shape[1]));
            Tensor pred({out.h, out.w});
            std::copy(y.ptr() + n * out.numel(), y.ptr() + (n + 1) * out.numel(),
                      pred.ptr());
            report.per_image_f.push_back(f_beta(pred, s.mask, cfg));
            report.per_image_mae.push_back(mae(pred, s.mask));
        }
    }
    double fsum = 0, msum = 0;
    for (double v : report.per_image_f) fsum += v;
    for (double v : report.per_image_mae) msum += v;
    report.f_beta = fsum / static_cast<double>(report.per_image_f.size());
    report.mae = msum / static_cast<double>(report.per_image_mae.size());
    return report;
}

namespace {

constexpr std::uint64_t kInitSeedOffset = 1ull << 32;

Network inherit_weights_onto(const Network& ancestor, const Architecture& arch) {
    Network net;
    net.arch = arch;
    net.weights = ancestor.weights;
    net.biases = ancestor.biases;
    apply_mask(net);
    return net;
}

}  // namespace

LineageRecord run_evolution(const EvolutionConfig& cfg,
                            const GenerationHook& hook) {
    if (cfg.generations < 1)
        throw std::invalid_argument("generations must be >= 1");
    validate(cfg.env);
    validate(cfg.arch_template);
    fs::create_directories(cfg.output_dir);

    DatasetSplit dataset = resolve_dataset(cfg.data);
    std::vector<Example> train_examples = to_examples(dataset.train);

    LineageRecord record;
    Network previous;
    for (int g = 1; g <= cfg.generations; ++g) {
        auto t0 = std::chrono::steady_clock::now();
        GenerationRow row;
        row.generation = g;
        row.train_seed = cfg.train.seed ^ static_cast<std::uint64_t>(g);
        row.init_seed =
            cfg.base_seed ^ (static_cast<std::uint64_t>(g) + kInitSeedOffset);

        Architecture arch;
        if (g == 1) {
            arch = cfg.arch_template;
            row.synthesis_seed = 0;  // no synthesis for the ancestor
        } else {
            row.synthesis_seed = cfg.base_seed ^ static_cast<std::uint64_t>(g);
            SynthesisOptions opts;
            opts.zmode = cfg.zmode;
            SynthesisOutcome outcome =
                synthesize(previous, cfg.env, row.synthesis_seed, opts);
            arch = std::move(outcome.descendant);
        }

        Network net;
        if (cfg.inherit_weights && g > 1)
            net = inherit_weights_onto(previous, arch);
        else
            net = init_network(arch, cfg.train, row.init_seed);

        TrainConfig tc = cfg.train;
        tc.seed = row.train_seed;
        TrainResult trained = train(std::move(net), train_examples, tc);
        row.train_loss =
            trained.epoch_loss.empty() ? 0.0 : trained.epoch_loss.back();

        EvalReport eval = evaluate(trained.net, dataset.test, cfg.metrics);
        row.f_beta = eval.f_beta;
        row.mae = eval.mae;
        row.num_synapses = count_synapses(trained.net.arch);
        std::int64_t first = record.rows.empty() ? row.num_synapses
                                                 : record.rows[0].num_synapses;
        row.efficiency_x = architectural_efficiency(first, row.num_synapses);

        row.checkpoint_dir =
            (fs::path(cfg.output_dir) / ("gen-" + std::to_string(g))).string();
        CheckpointMeta meta;
        meta.generation = g;
        meta.num_synapses = row.num_synapses;
        meta.f_beta = row.f_beta;
        meta.mae = row.mae;
        meta.train_loss = row.train_loss;
        meta.synthesis_seed = row.synthesis_seed;
        meta.init_seed = row.init_seed;
        meta.train_seed = row.train_seed;
        save_checkpoint(trained.net, meta, row.checkpoint_dir);

        row.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        record.rows.push_back(row);
        write_lineage_csv((fs::path(cfg.output_dir) / "lineage.csv").string(),
                          record);
        if (hook) hook(trained.net, row, dataset);
        previous = std::move(trained.net);
    }
    return record;
}

static const char* kLineageColumns[] = {
    "generation", "num_synapses", "efficiency_x", "f_beta",
    "mae",        "train_loss",   "wall_time_s"};

void write_lineage_csv(const std::string& path, const LineageRecord& record) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "generation,num_synapses,efficiency_x,f_beta,mae,train_loss,wall_time_s\n";
    char buf[256];
    for (const GenerationRow& r : record.rows) {
        std::snprintf(buf, sizeof(buf), "%d,%lld,%.2f,%.6f,%.6f,%.6f,%.3f\n",
                      r.generation, static_cast<long long>(r.num_synapses),
                      r.efficiency_x, r.f_beta, r.mae, r.train_loss,
                      r.wall_time_s);
        out << buf;
    }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

ParsedLineage read_lineage_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::string header;
    if (!std::getline(in, header) || header.empty())
        throw ConfigError("lineage csv is empty: '" + path + "'");

    std::vector<std::string> cols = split_csv_line(header);
    ParsedLineage parsed;
    std::vector<int> where(std::size(kLineageColumns), -1);
    for (std::size_t c = 0; c < cols.size(); ++c) {
        bool known = false;
        for (std::size_t k = 0; k < std::size(kLineageColumns); ++k) {
            if (cols[c] == kLineageColumns[k]) {
                where[k] = static_cast<int>(c);
                known = true;
            }
        }
        if (!known) parsed.unknown_columns.push_back(cols[c]);
    }
    for (std::size_t k = 0; k < std::size(kLineageColumns); ++k)
        if (where[k] < 0)
            throw ConfigError(std::string("lineage csv missing column '") +
                              kLineageColumns[k] + "'");

    std::string line;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> vals = split_csv_line(line);
        if (vals.size() != cols.size())
            throw ConfigError("lineage csv line " + std::to_string(lineno) +
                              ": expected " + std::to_string(cols.size()) +
                              " fields, got " + std::to_string(vals.size()));
        GenerationRow r;
        try {
            r.generation = std::stoi(vals[where[0]]);
            r.num_synapses = std::stoll(vals[where[1]]);
            r.efficiency_x = std::stod(vals[where[2]]);
            r.f_beta = std::stod(vals[where[3]]);
            r.mae = std::stod(vals[where[4]]);
            r.train_loss = std::stod(vals[where[5]]);
            r.wall_time_s = std::stod(vals[where[6]]);
        } catch (const std::exception&) {
            throw ConfigError("lineage csv line " + std::to_string(lineno) +
                              ": unparsable value");
        }
        parsed.record.rows.push_back(r);
    }
    if (parsed.record.rows.empty())
        throw ConfigError("lineage csv has no data rows: '" + path + "'");
    return parsed;
}

std::string render_lineage_table(const LineageRecord& record) {
    std::ostringstream os;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-12s %14s %12s %10s %10s\n", "generation",
                  "synapses", "efficiency", "f_beta", "mae");
    os << buf;
    for (const GenerationRow& r : record.rows) {
        std::snprintf(buf, sizeof(buf), "%-12d %14lld %11.2fX %10.4f %10.4f\n",
                      r.generation, static_cast<long long>(r.num_synapses),
                      r.efficiency_x, r.f_beta, r.mae);
        os << buf;
    }
    return os.str();
}

}  // namespace evo

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "evosynth/data.hpp"
#include "evosynth/heredity.hpp"
#include "evosynth/metrics.hpp"
#include "evosynth/network.hpp"
#include "evosynth/synthesis.hpp"

namespace evo {

// Where the training/evaluation data comes from.
struct DataSpec {
    enum class Kind { synthetic, directory };
    Kind kind = Kind::synthetic;
    // synthetic
    std::uint64_t seed = 0;
    int count = 0, height = 0, width = 0;
    // directory
    std::string images_dir, masks_dir;
    double train_frac = 0.5, val_frac = 0.1, test_frac = 0.4;
};

DatasetSplit resolve_dataset(const DataSpec& spec);

struct EvolutionConfig {
    int generations = 1;
    EnvConstraint env;
    TrainConfig train;
    std::uint64_t base_seed = 0;
    Architecture arch_template;  // generation 1, fully masked-in
    DataSpec data;
    bool inherit_weights = false;  // default off: every generation trains fresh
    std::string output_dir;
    MetricsConfig metrics;
    ZMode zmode = ZMode::per_layer;
};

struct GenerationRow {
    int generation = 1;
    std::int64_t num_synapses = 0;
    double efficiency_x = 1.0;  // vs generation 1, truncated to two decimals
    double f_beta = 0.0;
    double mae = 0.0;
    double train_loss = 0.0;
    double wall_time_s = 0.0;
    std::uint64_t synthesis_seed = 0;
    std::uint64_t init_seed = 0;
    std::uint64_t train_seed = 0;
    std::string checkpoint_dir;
};

struct LineageRecord {
    std::vector<GenerationRow> rows;
};

// Forward the test split through the network and score each prediction map.
// The network output must be a single-channel map matching the mask shape.
EvalReport evaluate(const Network& net, const std::vector<Sample>& samples,
                    const MetricsConfig& cfg);

// Called after each generation is trained, evaluated and checkpointed.
using GenerationHook = std::function<void(
    const Network& trained, const GenerationRow& row, const DatasetSplit& data)>;

// The generation loop: train the ancestor, then synthesize -> train ->
// evaluate -> checkpoint for each following generation. Per-generation seeds
// derive from the base seed (synthesis: base^g, initialization:
// base^(g+2^32)) and the training seed from train.seed^g. lineage.csv is
// rewritten after every completed generation, so an aborted run leaves a
// valid partial record behind before TrainingDiverged/SynthesisFailure
// propagates out.
LineageRecord run_evolution(const EvolutionConfig& cfg,
                            const GenerationHook& hook = {});

// lineage.csv: header plus one row per generation, columns
// generation,num_synapses,efficiency_x,f_beta,mae,train_loss,wall_time_s.
void write_lineage_csv(const std::string& path, const LineageRecord& record);

struct ParsedLineage {
    LineageRecord record;
    std::vector<std::string> unknown_columns;  // ignored, reported upward
};
// Throws ConfigError on missing header, missing known columns or unparsable
// values.
ParsedLineage read_lineage_csv(const std::string& path);

// Aligned per-generation text table of a lineage record.
std::string render_lineage_table(const LineageRecord& record);

}  // namespace evo

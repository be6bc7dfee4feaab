#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "evosynth/checkpoint.hpp"
#include "evosynth/errors.hpp"
#include "evosynth/evolution.hpp"
#include "test_helpers.hpp"

using namespace evo;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() /
               ("evosynth_evo_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

Architecture toy_conv_arch() {
    return make_architecture(
        {1, 16, 16}, {LayerSpec::conv2d(8, 3, 3, 1, 1, Activation::relu),
                      LayerSpec::conv2d(12, 3, 3, 1, 1, Activation::relu),
                      LayerSpec::conv2d(1, 3, 3, 1, 1, Activation::sigmoid)});
}

EvolutionConfig toy_config(const std::string& out_dir) {
    EvolutionConfig cfg;
    cfg.generations = 4;
    cfg.env.retention = 0.4;
    cfg.train.learning_rate = 0.5f;
    cfg.train.epochs = 2;
    cfg.train.batch_size = 8;
    cfg.train.loss = Loss::binary_cross_entropy;
    cfg.train.seed = 5;
    cfg.base_seed = 40;
    cfg.arch_template = toy_conv_arch();
    cfg.data.kind = DataSpec::Kind::synthetic;
    cfg.data.seed = 7;
    cfg.data.count = 30;
    cfg.data.height = 16;
    cfg.data.width = 16;
    cfg.output_dir = out_dir;
    return cfg;
}

}  // namespace

TEST_CASE("checkpoint: round trip is bit-exact and preserves forward outputs") {
    Architecture arch = make_architecture(
        {2, 8, 8}, {LayerSpec::conv2d(4, 3, 3, 2, 1, Activation::relu),
                    LayerSpec::upsample(2),
                    LayerSpec::concat(-1),
                    LayerSpec::conv2d(1, 3, 3, 1, 1, Activation::sigmoid)});
    std::mt19937_64 rng(61);
    // a valid sparse mask: sample then settle
    testutil::randomize_mask(arch, 0.4, rng);
    AlivenessResult settled = settle_aliveness(arch, arch.masks);
    REQUIRE(settled.output_reachable);
    arch.masks = settled.masks;
    arch.alive = settled.alive;
    Network net = testutil::random_net(arch, 62);

    TempDir tmp("roundtrip");
    CheckpointMeta meta;
    meta.generation = 3;
    meta.num_synapses = count_synapses(arch);
    meta.f_beta = 0.5;
    meta.synthesis_seed = 11;
    save_checkpoint(net, meta, tmp.path.string());
    LoadedCheckpoint loaded = load_checkpoint(tmp.path.string());

    CHECK(loaded.meta.generation == 3);
    CHECK(loaded.meta.num_synapses == meta.num_synapses);
    CHECK(loaded.meta.synthesis_seed == 11);
    CHECK(loaded.net.arch.masks == net.arch.masks);
    CHECK(loaded.net.arch.alive == net.arch.alive);
    for (int i = 0; i < arch.num_layers(); ++i) {
        CHECK(loaded.net.weights[i].data == net.weights[i].data);
        CHECK(loaded.net.biases[i].data == net.biases[i].data);
    }

    Tensor probe = testutil::random_tensor({3, 2, 8, 8}, rng);
    Tensor y0 = forward(net, probe);
    Tensor y1 = forward(loaded.net, probe);
    CHECK(std::memcmp(y0.ptr(), y1.ptr(), y0.data.size() * sizeof(float)) == 0);
}

TEST_CASE("checkpoint: truncated weight blob is rejected") {
    Architecture arch = make_architecture(
        {3, 1, 1}, {LayerSpec::dense(4, Activation::sigmoid)});
    Network net = testutil::random_net(arch, 1);
    TempDir tmp("truncate");
    save_checkpoint(net, CheckpointMeta{}, tmp.path.string());

    fs::path wpath = tmp.path / "weights.bin";
    auto size = fs::file_size(wpath);
    fs::resize_file(wpath, size - 4);
    CHECK_THROWS_AS(load_checkpoint(tmp.path.string()), CorruptCheckpoint);
}

TEST_CASE("checkpoint: manifest layer list disagreeing with blobs is rejected") {
    Architecture arch = make_architecture(
        {3, 1, 1}, {LayerSpec::dense(4, Activation::relu),
                    LayerSpec::dense(2, Activation::sigmoid)});
    Network net = testutil::random_net(arch, 2);
    TempDir tmp("manifest");
    save_checkpoint(net, CheckpointMeta{}, tmp.path.string());

    // drop the last layer from the manifest; blob sizes no longer agree
    std::ifstream in(tmp.path / "manifest.json");
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    in.close();
    std::size_t layers_pos = text.find("\"layers\"");
    REQUIRE(layers_pos != std::string::npos);
    std::size_t cut_from = text.rfind("{", text.find("\"dense\"", text.find(
        "\"dense\"", layers_pos) + 1));
    std::size_t cut_to = text.find("}", cut_from) + 1;
    text.erase(cut_from - 0, cut_to - cut_from);
    // remove the dangling comma that precedes the erased object
    std::size_t comma = text.rfind(',', cut_from);
    text.erase(comma, 1);
    std::ofstream out(tmp.path / "manifest.json");
    out << text;
    out.close();
    CHECK_THROWS_AS(load_checkpoint(tmp.path.string()), CorruptCheckpoint);
}

TEST_CASE("checkpoint: checksum tampering is rejected") {
    Architecture arch = make_architecture(
        {3, 1, 1}, {LayerSpec::dense(4, Activation::sigmoid)});
    Network net = testutil::random_net(arch, 3);
    TempDir tmp("checksum");
    save_checkpoint(net, CheckpointMeta{}, tmp.path.string());
    std::fstream f(tmp.path / "weights.bin",
                   std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    char flip = 0x5a;
    f.write(&flip, 1);
    f.close();
    CHECK_THROWS_AS(load_checkpoint(tmp.path.string()), CorruptCheckpoint);
}

TEST_CASE("run_evolution: G=1 trains and evaluates only the ancestor") {
    TempDir tmp("gen1");
    EvolutionConfig cfg = toy_config(tmp.path.string());
    cfg.generations = 1;
    LineageRecord record = run_evolution(cfg);
    REQUIRE(record.rows.size() == 1);
    CHECK(record.rows[0].generation == 1);
    CHECK(record.rows[0].synthesis_seed == 0);  // none performed
    CHECK(record.rows[0].efficiency_x == 1.0);
    CHECK(record.rows[0].num_synapses == count_synapses(cfg.arch_template));
    CHECK(fs::exists(tmp.path / "gen-1" / "manifest.json"));
    CHECK(fs::exists(tmp.path / "lineage.csv"));
}

TEST_CASE("run_evolution: compression compounds across four generations") {
    TempDir tmp("gen4");
    EvolutionConfig cfg = toy_config(tmp.path.string());
    LineageRecord record = run_evolution(cfg);
    REQUIRE(record.rows.size() == 4);
    std::int64_t c1 = record.rows[0].num_synapses;
    for (int g = 2; g <= 4; ++g) {
        const GenerationRow& row = record.rows[static_cast<std::size_t>(g - 1)];
        CHECK(row.num_synapses <=
              static_cast<std::int64_t>(std::ceil(c1 * std::pow(0.45, g - 1))));
        CHECK(row.efficiency_x > record.rows[static_cast<std::size_t>(g - 2)].efficiency_x);
        CHECK(row.num_synapses <
              record.rows[static_cast<std::size_t>(g - 2)].num_synapses);
    }
    // every generation leaves a loadable checkpoint
    for (int g = 1; g <= 4; ++g) {
        LoadedCheckpoint cp =
            load_checkpoint((tmp.path / ("gen-" + std::to_string(g))).string());
        CHECK(cp.meta.generation == g);
        CHECK(cp.meta.num_synapses ==
              record.rows[static_cast<std::size_t>(g - 1)].num_synapses);
    }
}

TEST_CASE("run_evolution: rerun with an identical config matches except wall time") {
    TempDir tmp_a("rerun_a");
    TempDir tmp_b("rerun_b");
    EvolutionConfig ca = toy_config(tmp_a.path.string());
    ca.generations = 3;
    EvolutionConfig cb = toy_config(tmp_b.path.string());
    cb.generations = 3;
    LineageRecord a = run_evolution(ca);
    LineageRecord b = run_evolution(cb);
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].num_synapses == b.rows[i].num_synapses);
        CHECK(a.rows[i].efficiency_x == b.rows[i].efficiency_x);
        CHECK(a.rows[i].f_beta == b.rows[i].f_beta);
        CHECK(a.rows[i].mae == b.rows[i].mae);
        CHECK(a.rows[i].train_loss == b.rows[i].train_loss);
        CHECK(a.rows[i].synthesis_seed == b.rows[i].synthesis_seed);
        CHECK(a.rows[i].init_seed == b.rows[i].init_seed);
        CHECK(a.rows[i].train_seed == b.rows[i].train_seed);
    }
    // weight blobs must agree bit for bit
    for (int g = 1; g <= 3; ++g) {
        std::ifstream fa(tmp_a.path / ("gen-" + std::to_string(g)) / "weights.bin",
                         std::ios::binary);
        std::ifstream fb(tmp_b.path / ("gen-" + std::to_string(g)) / "weights.bin",
                         std::ios::binary);
        std::string ba((std::istreambuf_iterator<char>(fa)),
                       std::istreambuf_iterator<char>());
        std::string bb((std::istreambuf_iterator<char>(fb)),
                       std::istreambuf_iterator<char>());
        CHECK(ba == bb);
    }
}

TEST_CASE("run_evolution: lineage.csv is persisted after every generation") {
    TempDir tmp("incremental");
    EvolutionConfig cfg = toy_config(tmp.path.string());
    cfg.generations = 2;
    std::vector<std::size_t> rows_seen;
    run_evolution(cfg, [&](const Network&, const GenerationRow&,
                           const DatasetSplit&) {
        ParsedLineage parsed =
            read_lineage_csv((tmp.path / "lineage.csv").string());
        rows_seen.push_back(parsed.record.rows.size());
    });
    CHECK(rows_seen == std::vector<std::size_t>{1, 2});
}

TEST_CASE("run_evolution: divergence aborts with TrainingDiverged") {
    TempDir tmp("diverge");
    EvolutionConfig cfg = toy_config(tmp.path.string());
    cfg.train.loss = Loss::mean_squared_error;
    cfg.train.learning_rate = 1e20f;
    CHECK_THROWS_AS(run_evolution(cfg), TrainingDiverged);
}

TEST_CASE("run_evolution: inherit-weights keeps surviving ancestor weights") {
    TempDir tmp("inherit");
    EvolutionConfig cfg = toy_config(tmp.path.string());
    cfg.generations = 2;
    cfg.train.epochs = 0;  // isolate the inheritance copy
    cfg.train.learning_rate = 0.0f;
    cfg.train.init = InitMode::constant;
    cfg.train.init_constant = 0.125f;
    cfg.inherit_weights = true;
    run_evolution(cfg);
    LoadedCheckpoint g1 = load_checkpoint((tmp.path / "gen-1").string());
    LoadedCheckpoint g2 = load_checkpoint((tmp.path / "gen-2").string());
    for (int i = 0; i < g2.net.arch.num_layers(); ++i) {
        const auto& mask = g2.net.arch.masks[i];
        for (std::size_t j = 0; j < mask.size(); ++j) {
            if (mask[j])
                CHECK(g2.net.weights[i][j] == g1.net.weights[i][j]);
            else
                CHECK(g2.net.weights[i][j] == 0.0f);
        }
    }
}

TEST_CASE("evaluate: aggregate is the mean of per-image scores") {
    TempDir tmp("eval");
    EvolutionConfig cfg = toy_config(tmp.path.string());
    cfg.generations = 1;
    run_evolution(cfg);
    LoadedCheckpoint cp = load_checkpoint((tmp.path / "gen-1").string());
    DatasetSplit data = resolve_dataset(cfg.data);
    EvalReport rep = evaluate(cp.net, data.test, cfg.metrics);
    REQUIRE(rep.per_image_f.size() == data.test.size());
    double fsum = 0, msum = 0;
    for (double v : rep.per_image_f) fsum += v;
    for (double v : rep.per_image_mae) msum += v;
    CHECK(rep.f_beta == doctest::Approx(fsum / data.test.size()).epsilon(1e-12));
    CHECK(rep.mae == doctest::Approx(msum / data.test.size()).epsilon(1e-12));
}

TEST_CASE("lineage csv: write/read round trip and malformed input handling") {
    TempDir tmp("csv");
    LineageRecord record;
    for (int g = 1; g <= 3; ++g) {
        GenerationRow r;
        r.generation = g;
        r.num_synapses = 1000 / g;
        r.efficiency_x = architectural_efficiency(1000, 1000 / g);
        r.f_beta = 0.9 - 0.01 * g;
        r.mae = 0.05 + 0.01 * g;
        r.train_loss = 0.2 / g;
        r.wall_time_s = 1.5 * g;
        record.rows.push_back(r);
    }
    fs::path p = tmp.path / "lineage.csv";
    write_lineage_csv(p.string(), record);
    ParsedLineage parsed = read_lineage_csv(p.string());
    REQUIRE(parsed.record.rows.size() == 3);
    CHECK(parsed.unknown_columns.empty());
    CHECK(parsed.record.rows[1].num_synapses == 500);
    CHECK(parsed.record.rows[1].efficiency_x == 2.0);

    // unknown extra column is reported, not fatal
    std::ofstream extra(tmp.path / "extra.csv");
    extra << "generation,num_synapses,efficiency_x,f_beta,mae,train_loss,"
             "wall_time_s,bonus\n1,10,1.00,0.5,0.1,0.2,0.3,hi\n";
    extra.close();
    ParsedLineage with_extra = read_lineage_csv((tmp.path / "extra.csv").string());
    CHECK(with_extra.unknown_columns == std::vector<std::string>{"bonus"});
    CHECK(with_extra.record.rows.size() == 1);

    // empty and malformed files throw
    std::ofstream empty(tmp.path / "empty.csv");
    empty.close();
    CHECK_THROWS_AS(read_lineage_csv((tmp.path / "empty.csv").string()), ConfigError);
    std::ofstream bad(tmp.path / "bad.csv");
    bad << "generation,num_synapses\n1,10\n";
    bad.close();
    CHECK_THROWS_AS(read_lineage_csv((tmp.path / "bad.csv").string()), ConfigError);
    std::ofstream garbled(tmp.path / "garbled.csv");
    garbled << "generation,num_synapses,efficiency_x,f_beta,mae,train_loss,"
               "wall_time_s\nxyz,10,1.0,0.5,0.1,0.2,0.3\n";
    garbled.close();
    CHECK_THROWS_AS(read_lineage_csv((tmp.path / "garbled.csv").string()),
                    ConfigError);
}

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "evosynth/checkpoint.hpp"
#include "evosynth/config.hpp"
#include "evosynth/errors.hpp"
#include "evosynth/evolution.hpp"
#include "evosynth/image_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Exit statuses, stable across releases:
//   0 success, 2 configuration/input error, 3 run aborted, 4 corrupt artifact
constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kRunAborted = 3;
constexpr int kCorruptArtifact = 4;

int run_gen_data(std::uint64_t seed, int count, const std::string& size,
                 const std::string& out_dir) {
    int h = 0, w = 0;
    std::size_t x = size.find('x');
    if (x == std::string::npos) {
        h = w = std::stoi(size);
    } else {
        h = std::stoi(size.substr(0, x));
        w = std::stoi(size.substr(x + 1));
    }
    evo::DatasetSplit split = evo::generate_synthetic(seed, count, h, w);
    evo::write_dataset(split, out_dir);
    std::cout << "wrote " << count << " samples (" << split.train.size() << "/"
              << split.validation.size() << "/" << split.test.size()
              << " train/val/test) to " << out_dir << "\n";
    return kOk;
}

void dump_probe_maps(const evo::Network& net, const evo::GenerationRow& row,
                     const evo::DatasetSplit& data) {
    // first five test images by split order, fixed across generations
    std::size_t n_probe = std::min<std::size_t>(5, data.test.size());
    if (n_probe == 0) return;
    fs::path dir = fs::path(row.checkpoint_dir) / "saliency";
    fs::create_directories(dir);
    std::vector<evo::Example> ex =
        evo::to_examples({data.test.begin(), data.test.begin() + n_probe});
    std::vector<std::size_t> idx(n_probe);
    for (std::size_t i = 0; i < n_probe; ++i) idx[i] = i;
    evo::Tensor y = evo::forward(net, evo::stack_inputs(ex, idx));
    evo::Shape3 out = net.arch.output();
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(out.h) * out.w);
    for (std::size_t i = 0; i < n_probe; ++i) {
        const float* p = y.ptr() + i * out.numel();
        for (int j = 0; j < out.h * out.w; ++j) {
            float v = std::clamp(p[j], 0.0f, 1.0f);
            bytes[static_cast<std::size_t>(j)] =
                static_cast<std::uint8_t>(std::lround(v * 255.0f));
        }
        evo::write_png_gray((dir / (data.test[i].name + ".png")).string(),
                            bytes.data(), out.w, out.h);
    }
}

int run_evolve(const std::string& config_path) {
    evo::EvolutionConfig cfg = evo::load_run_config(config_path);
    try {
        evo::LineageRecord record = evo::run_evolution(cfg, dump_probe_maps);
        std::cout << evo::render_lineage_table(record);
        std::cout << "lineage written to "
                  << (fs::path(cfg.output_dir) / "lineage.csv").string() << "\n";
        return kOk;
    } catch (const evo::TrainingDiverged& e) {
        std::cerr << "run aborted: " << e.what() << " (partial lineage kept)\n";
        return kRunAborted;
    } catch (const evo::SynthesisFailure& e) {
        std::cerr << "run aborted: " << e.what() << " (partial lineage kept)\n";
        return kRunAborted;
    }
}

int run_eval(const std::string& checkpoint_dir, const std::string& data_arg,
             const std::string& out_path) {
    evo::LoadedCheckpoint cp = evo::load_checkpoint(checkpoint_dir);

    evo::DatasetSplit data;
    evo::MetricsConfig metrics;
    if (fs::is_directory(data_arg)) {
        data = evo::load_directory((fs::path(data_arg) / "images").string(),
                                   (fs::path(data_arg) / "masks").string(), 0.5,
                                   0.1, 0.4);
    } else {
        evo::EvolutionConfig cfg = evo::load_run_config(data_arg);
        data = evo::resolve_dataset(cfg.data);
        metrics = cfg.metrics;
    }

    evo::EvalReport report = evo::evaluate(cp.net, data.test, metrics);
    char buf[128];
    std::snprintf(buf, sizeof(buf),
                  "generation %d  images %zu  f_beta %.6f  mae %.6f  (%s)\n",
                  cp.meta.generation, data.test.size(), report.f_beta,
                  report.mae, report.threshold_mode.c_str());
    std::cout << buf;

    json j;
    j["generation"] = cp.meta.generation;
    j["num_synapses"] = cp.meta.num_synapses;
    j["f_beta"] = report.f_beta;
    j["mae"] = report.mae;
    j["threshold_mode"] = report.threshold_mode;
    j["per_image_f_beta"] = report.per_image_f;
    j["per_image_mae"] = report.per_image_mae;
    std::ofstream out(out_path);
    out << j.dump(2) << "\n";
    if (!out) throw std::runtime_error("cannot write '" + out_path + "'");
    return kOk;
}

int run_report(const std::string& lineage_path) {
    evo::ParsedLineage parsed = evo::read_lineage_csv(lineage_path);
    for (const std::string& col : parsed.unknown_columns)
        std::cerr << "warning: ignoring unknown column '" << col << "'\n";
    std::cout << evo::render_lineage_table(parsed.record);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"evolutionary synthesis of sparse neural networks"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset directory");
    std::uint64_t seed = 0;
    int count = 0;
    std::string size = "64", out_dir;
    gen->add_option("--seed", seed, "generator seed");
    gen->add_option("--count", count, "number of samples")->required();
    gen->add_option("--size", size, "H or HxW");
    gen->add_option("--out", out_dir, "output directory")->required();

    auto* evolve = app.add_subcommand("evolve", "run the generation loop from a config file");
    std::string config_path;
    evolve->add_option("--config", config_path, "run configuration file")->required();

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
    std::string checkpoint_dir, data_arg, eval_out = "eval.json";
    eval->add_option("--checkpoint", checkpoint_dir, "checkpoint directory (gen-<g>)")
        ->required();
    eval->add_option("--data", data_arg, "dataset directory or run config file")
        ->required();
    eval->add_option("--out", eval_out, "report output path");

    auto* report = app.add_subcommand("report", "print a lineage csv as a table");
    std::string lineage_path;
    report->add_option("--lineage", lineage_path, "lineage.csv path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfigError;
    }

    try {
        if (gen->parsed()) return run_gen_data(seed, count, size, out_dir);
        if (evolve->parsed()) return run_evolve(config_path);
        if (eval->parsed()) return run_eval(checkpoint_dir, data_arg, eval_out);
        if (report->parsed()) return run_report(lineage_path);
    } catch (const evo::CorruptCheckpoint& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kCorruptArtifact;
    } catch (const evo::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    } catch (const evo::IngestionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    } catch (const evo::ShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return kOk;
}

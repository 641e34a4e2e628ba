// moegate command line: dataset generation, training, and analysis for the
// inhibited mixture-of-experts experiments.

#include <cstdio>
#include <filesystem>
#include <string>

#include <CLI11.hpp>

#include "moegate/moegate.hpp"

namespace fs = std::filesystem;
using namespace moegate;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

fs::path find_idx_file(const fs::path& dir, const std::string& stem) {
    // Accepts both common extractions: train-images-idx3-ubyte and
    // train-images.idx3-ubyte.
    const std::string dashed = stem + "-ubyte";
    const std::string dotted = stem;
    for (const auto& name : {dashed, dotted}) {
        fs::path p = dir / name;
        if (fs::exists(p)) return p;
    }
    std::string probe = (dir / dashed).string();
    auto dot = probe.rfind("-idx");
    if (dot != std::string::npos) probe[dot] = '.';
    if (fs::exists(probe)) return fs::path(probe);
    return dir / dashed;  // canonical path for the error message
}

int cmd_gen_digits(const std::string& out_dir, int count, std::uint64_t seed) {
    fs::create_directories(out_dir);
    const Dataset digits = gen_digit_samples(count, seed);
    const fs::path images = fs::path(out_dir) / "train-images-idx3-ubyte";
    const fs::path labels = fs::path(out_dir) / "train-labels-idx1-ubyte";
    write_idx_files(digits, images.string(), labels.string());
    std::printf("wrote %d digit samples to %s and %s\n", digits.count(), images.c_str(), labels.c_str());
    return kExitOk;
}

int cmd_gen_data(const std::string& mnist_dir, const std::string& out_file, std::uint64_t seed) {
    const fs::path images = find_idx_file(mnist_dir, "train-images-idx3");
    const fs::path labels = find_idx_file(mnist_dir, "train-labels-idx1");
    for (const auto& p : {images, labels}) {
        if (!fs::exists(p)) {
            std::fprintf(stderr, "error: missing MNIST file: %s\n", p.c_str());
            return kExitUsage;
        }
    }
    const Dataset digits = load_mnist_idx(images.string(), labels.string());
    std::printf("loaded %d digit samples\n", digits.count());
    const Dataset squares = gen_squares(digits.count(), seed);
    std::printf("generated %d squares samples\n", squares.count());
    auto [mixed, split] = build_mixed_dataset(digits, squares, seed);
    if (const fs::path parent = fs::path(out_file).parent_path(); !parent.empty())
        fs::create_directories(parent);
    save_mixn(out_file, mixed);

    long per_type[2] = {0, 0};
    long per_label[10] = {0};
    for (int i = 0; i < mixed.count(); ++i) {
        ++per_type[mixed.types[static_cast<std::size_t>(i)]];
        ++per_label[mixed.labels[static_cast<std::size_t>(i)]];
    }
    std::printf("wrote %s: %d samples (digits %ld, squares %ld); split %zu/%zu/%zu\n", out_file.c_str(),
                mixed.count(), per_type[0], per_type[1], split.train.size(), split.val.size(), split.test.size());
    std::printf("labels:");
    for (int l = 0; l < 10; ++l) std::printf(" %d:%ld", l, per_label[l]);
    std::printf("\n");
    return kExitOk;
}

int cmd_train(const std::string& config_path, const std::string& inhibition, int seed, const std::string& name) {
    RunConfig cfg = config_path.empty() ? RunConfig() : RunConfig::from_file(config_path);
    if (!inhibition.empty()) {
        inhibition_mode_from_string(inhibition);  // validate before mutating
        cfg.inhibition = inhibition;
        if (name.empty()) cfg.name += "-" + inhibition;
    }
    if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    if (!name.empty()) cfg.name = name;
    const auto art = run_training(cfg);
    std::printf("run directory: %s\n", art.run_dir.c_str());
    return kExitOk;
}

int cmd_analyze(const std::string& checkpoint, const std::string& dataset, std::string config_path,
                std::string out_dir) {
    if (config_path.empty())
        config_path = (fs::path(checkpoint).parent_path() / "config.txt").string();
    if (!fs::exists(config_path)) {
        std::fprintf(stderr, "error: no run config at %s (pass --config explicitly)\n", config_path.c_str());
        return kExitUsage;
    }
    RunConfig cfg = RunConfig::from_file(config_path);
    if (out_dir.empty()) out_dir = fs::path(checkpoint).parent_path().string();
    const auto art = run_analysis(checkpoint, dataset, cfg, out_dir);
    std::printf("wrote %s (%zu neurons) and %s (%zu thresholds)\n", art.figure2.c_str(), art.stats.size(),
                art.figure3.c_str(), art.sweep.size());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"inhibited mixture-of-experts training and analysis"};
    app.require_subcommand(0, 1);

    bool print_defaults = false;
    app.add_flag("--print-defaults", print_defaults, "print the default run configuration and exit");

    auto* gen_digits = app.add_subcommand("gen-digits", "render a synthetic handwritten-digit corpus as IDX files");
    std::string gd_out = "data/digits";
    int gd_count = 60000;
    std::uint64_t gd_seed = 1;
    gen_digits->add_option("--out", gd_out, "output directory for the IDX pair");
    gen_digits->add_option("--count", gd_count, "number of samples");
    gen_digits->add_option("--seed", gd_seed, "generator seed");

    auto* gen_data = app.add_subcommand("gen-data", "build the mixed digits+squares dataset (MIXN)");
    std::string mnist_dir = "data/digits";
    std::string mix_out = "data/mixed.mixn";
    std::uint64_t mix_seed = 1;
    gen_data->add_option("--mnist-dir", mnist_dir, "directory holding the IDX image/label pair");
    gen_data->add_option("--out", mix_out, "output MIXN file");
    gen_data->add_option("--seed", mix_seed, "shuffle and synthesis seed");

    auto* train = app.add_subcommand("train", "train per the run configuration");
    std::string config_path, inhibition, run_name;
    int seed_override = -1;
    train->add_option("--config", config_path, "run configuration file");
    train->add_option("--inhibition", inhibition, "override inhibition mode: none,dropout,glu,pretext,posttext,global");
    train->add_option("--seed", seed_override, "override base seed");
    train->add_option("--name", run_name, "override run name");

    auto* analyze = app.add_subcommand("analyze", "emit per-neuron correlation and threshold-sweep CSVs");
    std::string ckpt, dataset_path, an_config, an_out;
    analyze->add_option("--checkpoint", ckpt, "MCKP checkpoint from a gate-bearing run")->required();
    analyze->add_option("--dataset", dataset_path, "MIXN dataset file")->required();
    analyze->add_option("--config", an_config, "run config (default: config.txt beside the checkpoint)");
    analyze->add_option("--out", an_out, "output directory (default: checkpoint directory)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (print_defaults) {
            std::printf("%s", RunConfig().to_text().c_str());
            return kExitOk;
        }
        if (gen_digits->parsed()) return cmd_gen_digits(gd_out, gd_count, gd_seed);
        if (gen_data->parsed()) return cmd_gen_data(mnist_dir, mix_out, mix_seed);
        if (train->parsed()) return cmd_train(config_path, inhibition, seed_override, run_name);
        if (analyze->parsed()) return cmd_analyze(ckpt, dataset_path, an_config, an_out);
        std::fprintf(stderr, "%s", app.help().c_str());
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const FormatError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
}

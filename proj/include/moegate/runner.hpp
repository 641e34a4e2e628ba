#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include "moegate/analysis.hpp"
#include "moegate/config.hpp"
#include "moegate/train.hpp"

namespace moegate {

// Output root: relative out_dir values resolve under $MOEGATE_OUT when set.
inline std::filesystem::path resolve_out_dir(const std::string& out_dir) {
    std::filesystem::path p(out_dir);
    if (p.is_relative()) {
        if (const char* root = std::getenv("MOEGATE_OUT")) return std::filesystem::path(root) / p;
    }
    return p;
}

struct RunArtifacts {
    std::filesystem::path run_dir;
    std::filesystem::path report_path;
    std::vector<std::filesystem::path> checkpoints;
    RunReport report;
};

// Trains cfg.seeds models and lays down a reproducible run directory:
// config snapshot, per-epoch CSV report, one checkpoint per seed.
inline RunArtifacts run_training(const RunConfig& cfg, bool verbose = true) {
    const auto model_cfg = cfg.model_config();
    const auto train_cfg = cfg.train_config();

    Dataset data = load_mixn(cfg.dataset);
    const DatasetSplit split = subset_split(data.count(), cfg.subset, cfg.seed);

    RunArtifacts art;
    art.run_dir = resolve_out_dir(cfg.out_dir) / cfg.name;
    std::filesystem::create_directories(art.run_dir);
    {
        std::ofstream snap(art.run_dir / "config.txt");
        snap << cfg.to_text();
    }

    for (int s = 0; s < train_cfg.seeds; ++s) {
        const std::uint64_t seed = train_cfg.base_seed + static_cast<std::uint64_t>(s);
        Classifier<float> model;
        art.report.runs.push_back(train_single<float>(model_cfg, train_cfg, data, split, seed, &model));
        const auto ckpt = art.run_dir / ("checkpoint_seed" + std::to_string(seed) + ".mckp");
        save_checkpoint(ckpt.string(), model);
        art.checkpoints.push_back(ckpt);
        if (verbose)
            std::printf("seed %llu: test accuracy %.4f, test nll %.4f\n", static_cast<unsigned long long>(seed),
                        art.report.runs.back().test_accuracy, art.report.runs.back().test_nll);
    }

    art.report_path = art.run_dir / "report.csv";
    write_report_csv(art.report_path.string(), art.report);
    if (verbose)
        std::printf("%s: final test accuracy %.4f +/- %.4f over %d seeds\n", cfg.name.c_str(),
                    art.report.mean_accuracy(), art.report.std_accuracy(), train_cfg.seeds);
    return art;
}

struct AnalysisArtifacts {
    std::filesystem::path figure2;
    std::filesystem::path figure3;
    std::vector<NeuronStats> stats;
    std::vector<SuppressionCount> sweep;
};

// Rebuilds the model from a run config, loads the checkpoint, and emits the
// per-neuron report plus the inhibition-threshold sweep as CSV plot data.
// The analysis consumes the test split of the configured subset.
inline AnalysisArtifacts run_analysis(const std::string& checkpoint_path, const std::string& dataset_path,
                                      const RunConfig& cfg, const std::filesystem::path& out_dir) {
    const auto model_cfg = cfg.model_config();
    if (!mode_has_gate(model_cfg.mode))
        throw ConfigError(std::string("checkpoint was trained with inhibition mode '") + cfg.inhibition +
                          "', which has no gate activations to analyze");

    Dataset data = load_mixn(dataset_path);
    const DatasetSplit split = subset_split(data.count(), cfg.subset, cfg.seed);

    Classifier<float> model(model_cfg, cfg.seed);
    load_checkpoint(checkpoint_path, model);

    AnalysisArtifacts art;
    art.stats = neuron_report(model, data, split.test, cfg.eval_batch);
    art.sweep = threshold_sweep(art.stats, default_thresholds());
    std::filesystem::create_directories(out_dir);
    art.figure2 = out_dir / "figure2.csv";
    art.figure3 = out_dir / "figure3.csv";
    write_figure2_csv(art.figure2.string(), art.stats);
    write_figure3_csv(art.figure3.string(), art.sweep);
    return art;
}

}  // namespace moegate

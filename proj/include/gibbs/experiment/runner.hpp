#pragma once

#include "gibbs/experiment/config.hpp"
#include "gibbs/experiment/mask_io.hpp"
#include "gibbs/experiment/report.hpp"

#include <filesystem>
#include <utility>

namespace gibbs::exp {

struct RunResult {
    Report report;
    std::vector<NamedMask> masks;
    double final_accuracy = 0;
    std::filesystem::path csv_path, mask_path, checkpoint_path;
};

/// Synthetic data from data_seed, or CIFAR-10 from data_dir / $GIBBS_PRUNE_DATA.
std::pair<nn::DatasetSplit, nn::DatasetSplit> load_dataset(const ExperimentConfig& cfg);

/// Runs Gibbs training or the configured baseline. With write_artifacts, output_dir receives
/// history.csv, masks.txt, checkpoint.bin and config.txt.
RunResult run_experiment(const ExperimentConfig& cfg, bool write_artifacts = true);

RunResult baseline_random_mask(ExperimentConfig cfg, bool write_artifacts = true);
RunResult baseline_reinit_retrain(ExperimentConfig cfg, const std::string& mask_file, bool write_artifacts = true);
RunResult baseline_oneshot_magnitude(ExperimentConfig cfg, bool write_artifacts = true);
RunResult baseline_l1_reg(ExperimentConfig cfg, bool write_artifacts = true);

/// Uniformly random mask with the converged mask's pruned count (or neighbourhood count).
PruneMask random_mask(const nn::PrunedLayer& layer, RandomSource& rng);

struct DemoRow {
    int point = 0;
    int epoch = 0;
    double beta = 0;
    double agreement = 0;
    double pruned_fraction = 0;
};

/// Samples masks from a frozen weight snapshot at demo_points betas spread over the anneal phase.
std::vector<DemoRow> sample_demo(const ExperimentConfig& cfg);
std::string format_demo(const std::vector<DemoRow>& rows);

}  // namespace gibbs::exp

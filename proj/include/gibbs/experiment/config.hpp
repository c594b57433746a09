#pragma once

#include "gibbs/nn/train.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gibbs::exp {

/// Per-layer overrides from "layer.<name>.<key>" lines; unset fields inherit the defaults.
struct LayerOverride {
    std::optional<bool> prune;
    std::optional<double> p;
    std::optional<nn::Structure> structure;
    std::optional<std::string> hamiltonian;
    std::optional<double> c;
    std::optional<int> rebuild_every;
};

struct ExperimentConfig {
    std::string experiment_id = "default";
    std::string model = "toy-cnn";
    std::string dataset = "synthetic";  // synthetic, cifar10 or cifar10:<subset>
    std::string data_dir;               // falls back to $GIBBS_PRUNE_DATA
    Index synthetic_per_class = 250;
    double synthetic_noise = 0.3;
    std::uint64_t data_seed = 1234;
    std::uint64_t seed = 0;

    int epochs = 200;
    Index batch_size = 64;
    int stretch = 1;

    double p = 0.9;
    nn::Structure structure = nn::Structure::Unstructured;
    std::string hamiltonian = "linear-square";
    double c = 0.01;
    int rebuild_every = 1;

    BetaSchedule beta;
    bool beta_end_set = false;
    double beta_end_stretched = 1e6;
    LrSchedule lr;

    std::string baseline = "none";  // none, random-mask, reinit-retrain, oneshot-magnitude, l1-reg
    int finetune_epochs = 0;
    double finetune_lr = 1e-5;
    double l1_penalty = 0.001;

    SamplerOptions sampler;
    bool augment = true;
    bool skip_1x1 = false;
    int threads = 0;
    bool record_wall_time = true;

    std::string output_dir = "runs";
    std::string mask_file;
    std::string checkpoint;
    int demo_points = 16;
    int demo_draws = 1;

    std::map<std::string, LayerOverride> layers;

    void validate() const;
    /// Schedules after applying the stretch factor (and the stretched beta_end).
    BetaSchedule effective_beta() const;
    LrSchedule effective_lr() const;
    int effective_epochs() const { return epochs * stretch; }
    int effective_finetune_epochs() const { return finetune_epochs * stretch; }
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
/// Applies one key=value pair; throws on unknown keys or bad values.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);
/// Every key with its current value, one "key=value" line each, in a fixed order.
std::string format_config(const ExperimentConfig& cfg);

/// Resolves the hamiltonian name against a structure ("binary" becomes binary-structured for structured runs).
Variant resolve_variant(const std::string& name, nn::Structure structure);

/// Weights to prune after the default layer policy and the per-layer overrides.
std::vector<nn::LayerPrune> resolve_prunes(const ExperimentConfig& cfg, nn::Network& net);

/// "conv2.weight" -> "conv2".
std::string layer_label(const std::string& param_name);

std::string format_double(double v);

}  // namespace gibbs::exp

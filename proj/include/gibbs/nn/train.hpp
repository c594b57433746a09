#pragma once

#include "gibbs/hamiltonians.hpp"
#include "gibbs/nn/data.hpp"
#include "gibbs/nn/network.hpp"
#include "gibbs/samplers.hpp"
#include "gibbs/schedules.hpp"

#include <memory>
#include <string>
#include <vector>

namespace gibbs::nn {

enum class Structure { Unstructured, Kernel, Filter };

std::string to_string(Structure s);
Structure parse_structure(const std::string& name);

struct PruneConfig {
    double p = 0.9;
    Structure structure = Structure::Unstructured;
    Variant variant = Variant::LinearSquare;
    double c = 0.01;
    int rebuild_every = 1;

    void validate() const;
};

/// Neighbourhoods of a weight tensor. Conv (C_out, K, K, C_in): kernel = one K x K slice per
/// (out, in) pair, filter = all K*K*C_in weights of one output channel. Dense (out, in): filter = one row.
std::shared_ptr<const Partition> make_partition(const Param& weight, Structure structure);

struct LayerPrune {
    std::string param;
    PruneConfig cfg;
};

/// Per-layer pruning state: config, neighbourhoods and the current Hamiltonian.
struct PrunedLayer {
    Param* param = nullptr;
    PruneConfig cfg;
    std::shared_ptr<const Partition> partition;
    Hamiltonian hamiltonian;

    void rebuild();
    PruneMask converged() const;
    PruneMask sample(double beta, RandomSource& rng, const SamplerOptions& opts) const;
};

std::vector<PrunedLayer> resolve_pruned_layers(Network& net, const std::vector<LayerPrune>& prunes);

enum class MaskMode {
    Gibbs,      // sample a fresh mask every step
    Converged,  // hard pruning with the running converged mask
    Fixed,      // masks already on the params are held constant
    Dense       // no masks
};

struct TrainOptions {
    int epochs = 200;
    Index batch_size = 64;
    BetaSchedule beta;
    LrSchedule lr;
    /// Constant learning rate overriding the schedule when positive.
    double constant_lr = 0;
    bool augment = true;
    SamplerOptions sampler;
    /// Adds penalty * sum |w| over the pruned layers' weights to the loss.
    double l1_penalty = 0;
    MaskMode mode = MaskMode::Gibbs;
    std::string phase = "train";
    int epoch_offset = 0;
    bool record_wall_time = true;
    bool final_row = true;
};

struct EpochRecord {
    int epoch = 0;
    std::string phase;
    double train_loss = 0;
    double val_accuracy = 0;
    double beta = 0;
    double lr = 0;
    std::vector<double> pruned_fraction;
    std::vector<double> agreement;
    double wall_time_s = 0;
};

struct TrainResult {
    std::vector<std::string> layer_names;
    std::vector<EpochRecord> history;
    std::vector<PruneMask> final_masks;
    double final_accuracy = 0;
};

/// Trains net; in Gibbs and Converged modes the final masks are the converged masks of the final
/// weights and remain applied on the params afterwards.
TrainResult train_and_prune(Network& net, const DatasetSplit& train, const DatasetSplit& val,
                            const std::vector<LayerPrune>& prunes, const TrainOptions& opts, const RandomSource& rng);

double evaluate(Network& net, const DatasetSplit& split, bool mask_applied = true, Index batch_size = 256);
double dataset_loss(Network& net, const DatasetSplit& split, bool mask_applied = true, Index batch_size = 256);

}  // namespace gibbs::nn

#pragma once

// Annealing (beta) and learning-rate schedules as functions of the epoch.
// A stretch factor s replays either schedule at epoch floor(n / s).

#include <cstdint>

namespace gibbs {

enum class AnnealMode { Log, Linear };

struct BetaSchedule {
    double beta_start = 0.7;
    double beta_end = 1e4;
    int anneal_epochs = 128;
    AnnealMode mode = AnnealMode::Log;
    int stretch = 1;

    void validate() const;
};

struct LrSchedule {
    double initial_lr = 1e-3;
    int drop_epoch = 80;
    int drop_interval = 40;
    /// Learning rate is divided by this factor at every drop.
    double drop_factor = 10.0;
    int stretch = 1;

    void validate() const;
};

/// Geometric (log mode) or linear interpolation from beta_start to beta_end
/// over anneal_epochs, held at beta_end afterwards.
double beta_at(const BetaSchedule& s, std::int64_t epoch);

/// initial_lr until drop_epoch, then divided by drop_factor at drop_epoch and
/// every drop_interval epochs after.
double lr_at(const LrSchedule& s, std::int64_t epoch);

BetaSchedule stretched(BetaSchedule s, int factor);
LrSchedule stretched(LrSchedule s, int factor);

}  // namespace gibbs

#include "gibbs/schedules.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gibbs {

namespace {

std::int64_t replay_epoch(std::int64_t epoch, int stretch) {
    if (epoch < 0) throw std::invalid_argument("epoch must be non-negative");
    return epoch / stretch;
}

}  // namespace

void BetaSchedule::validate() const {
    if (!(beta_start > 0) || !(beta_end > 0)) throw std::invalid_argument("beta bounds must be positive");
    if (beta_start > beta_end) throw std::invalid_argument("beta_start must not exceed beta_end");
    if (anneal_epochs < 1) throw std::invalid_argument("anneal_epochs must be at least 1");
    if (stretch < 1) throw std::invalid_argument("stretch must be at least 1");
}

void LrSchedule::validate() const {
    if (!(initial_lr > 0)) throw std::invalid_argument("learning rate must be positive");
    if (drop_epoch < 0 || drop_interval < 1) throw std::invalid_argument("invalid learning-rate drop epochs");
    if (!(drop_factor > 0)) throw std::invalid_argument("drop_factor must be positive");
    if (stretch < 1) throw std::invalid_argument("stretch must be at least 1");
}

double beta_at(const BetaSchedule& s, std::int64_t epoch) {
    const std::int64_t m = replay_epoch(epoch, s.stretch);
    if (m >= s.anneal_epochs) return s.beta_end;
    const double t = static_cast<double>(m) / static_cast<double>(s.anneal_epochs);
    if (s.mode == AnnealMode::Log) return s.beta_start * std::pow(s.beta_end / s.beta_start, t);
    return s.beta_start + t * (s.beta_end - s.beta_start);
}

double lr_at(const LrSchedule& s, std::int64_t epoch) {
    const std::int64_t m = replay_epoch(epoch, s.stretch);
    if (m < s.drop_epoch) return s.initial_lr;
    const std::int64_t drops = 1 + (m - s.drop_epoch) / s.drop_interval;
    return s.initial_lr / std::pow(s.drop_factor, static_cast<double>(drops));
}

BetaSchedule stretched(BetaSchedule s, int factor) {
    if (factor < 1) throw std::invalid_argument("stretch factor must be at least 1");
    s.stretch = factor;
    return s;
}

LrSchedule stretched(LrSchedule s, int factor) {
    if (factor < 1) throw std::invalid_argument("stretch factor must be at least 1");
    s.stretch = factor;
    return s;
}

}  // namespace gibbs

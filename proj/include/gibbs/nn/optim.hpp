#pragma once

#include "gibbs/nn/layers.hpp"

#include <vector>

namespace gibbs::nn {

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long t = 0;
    std::vector<Eigen::VectorXd> m, v;
};

/// One bias-corrected Adam update over params (non-trainable entries are skipped).
void adam_step(AdamState& state, const std::vector<Param*>& params, double lr);

class Adam {
public:
    explicit Adam(std::vector<Param*> params) : params_(std::move(params)) {}
    void step(double lr) { adam_step(state_, params_, lr); }
    const AdamState& state() const { return state_; }

private:
    std::vector<Param*> params_;
    AdamState state_;
};

}  // namespace gibbs::nn

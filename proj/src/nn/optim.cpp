#include "gibbs/nn/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace gibbs::nn {

void adam_step(AdamState& s, const std::vector<Param*>& params, double lr) {
    if (s.m.empty()) {
        for (const Param* p : params) {
            s.m.push_back(Eigen::VectorXd::Zero(p->size()));
            s.v.push_back(Eigen::VectorXd::Zero(p->size()));
        }
    }
    if (s.m.size() != params.size()) throw std::invalid_argument("adam state does not match parameter list");
    ++s.t;
    const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
    const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Param& p = *params[i];
        if (!p.trainable) continue;
        if (s.m[i].size() != p.size()) throw std::invalid_argument("adam state size mismatch for " + p.name);
        s.m[i] = s.beta1 * s.m[i] + (1 - s.beta1) * p.grad;
        s.v[i] = s.beta2 * s.v[i] + (1 - s.beta2) * p.grad.cwiseAbs2();
        p.value.array() -= lr * (s.m[i].array() / c1) / ((s.v[i].array() / c2).sqrt() + s.eps);
    }
}

}  // namespace gibbs::nn

#pragma once

#include "gibbs/nn/network.hpp"

#include <string>
#include <vector>

namespace gibbs::nn {

/// toy-mlp, toy-cnn or small-resnet for (H, W, C) images.
Network build_model(const std::string& name, const Shape& image_shape, int classes);

/// Default layer policy: every conv weight except the first conv, never the dense head.
/// For toy-mlp, the hidden dense layers between the first and the head.
/// skip_1x1 leaves 1x1 projection convs unpruned.
std::vector<std::string> default_pruned_params(Network& net, bool skip_1x1 = false);

}  // namespace gibbs::nn

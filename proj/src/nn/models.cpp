#include "gibbs/nn/models.hpp"

#include <stdexcept>

namespace gibbs::nn {

Network build_model(const std::string& name, const Shape& image_shape, int classes) {
    if (image_shape.size() != 3) throw std::invalid_argument("image shape must be (H, W, C)");
    const Index c = image_shape[2];
    Network net(image_shape);
    if (name == "toy-mlp") {
        net.emplace<Flatten>("flatten");
        net.emplace<Dense>("fc1", shape_size(image_shape), 64);
        net.emplace<Relu>("relu1");
        net.emplace<Dense>("fc2", 64, 64);
        net.emplace<Relu>("relu2");
        net.emplace<Dense>("head", 64, classes);
    } else if (name == "toy-cnn") {
        net.emplace<Conv2d>("conv1", c, 8, 3, false);
        net.emplace<BatchNorm>("bn1", 8);
        net.emplace<Relu>("relu1");
        net.emplace<Conv2d>("conv2", 8, 16, 3, false);
        net.emplace<BatchNorm>("bn2", 16);
        net.emplace<Relu>("relu2");
        net.emplace<MaxPool2>("pool");
        net.emplace<Conv2d>("conv3", 16, 16, 3, false);
        net.emplace<BatchNorm>("bn3", 16);
        net.emplace<Relu>("relu3");
        net.emplace<GlobalAvgPool>("gap");
        net.emplace<Dense>("head", 16, classes);
    } else if (name == "small-resnet") {
        net.emplace<Conv2d>("conv1", c, 16, 3, false);
        net.emplace<BatchNorm>("bn1", 16);
        net.emplace<Relu>("relu1");
        net.emplace<ResidualBlock>("res1", 16, 16);
        net.emplace<MaxPool2>("pool1");
        net.emplace<ResidualBlock>("res2", 16, 32);
        net.emplace<MaxPool2>("pool2");
        net.emplace<ResidualBlock>("res3", 32, 32);
        net.emplace<GlobalAvgPool>("gap");
        net.emplace<Dense>("head", 32, classes);
    } else {
        throw std::invalid_argument("unknown model " + name + " (expected toy-mlp, toy-cnn or small-resnet)");
    }
    return net;
}

std::vector<std::string> default_pruned_params(Network& net, bool skip_1x1) {
    std::vector<std::string> convs, denses;
    std::vector<bool> is_1x1;
    for (Param* p : net.prunable_params()) {
        if (p->shape.size() == 4) {
            convs.push_back(p->name);
            is_1x1.push_back(p->shape[1] == 1);
        } else {
            denses.push_back(p->name);
        }
    }
    std::vector<std::string> out;
    if (!convs.empty()) {
        for (std::size_t i = 1; i < convs.size(); ++i) {
            if (!(skip_1x1 && is_1x1[i])) out.push_back(convs[i]);
        }
    } else if (denses.size() > 2) {
        out.assign(denses.begin() + 1, denses.end() - 1);
    }
    return out;
}

}  // namespace gibbs::nn

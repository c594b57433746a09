#pragma once

#include "gibbs/nn/layers.hpp"

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace gibbs::nn {

struct ForwardCache {
    std::vector<Cache> layers;
};

class Network {
public:
    /// input_shape excludes the batch axis, e.g. (H, W, C).
    explicit Network(Shape input_shape = {}) : input_shape_(std::move(input_shape)) {}

    Network(const Network&) = delete;
    Network& operator=(const Network&) = delete;
    Network(Network&&) = default;
    Network& operator=(Network&&) = default;

    template <class L, class... Args>
    L& emplace(Args&&... args) {
        auto layer = std::make_unique<L>(std::forward<Args>(args)...);
        L& ref = *layer;
        add(std::move(layer));
        return ref;
    }
    void add(std::unique_ptr<Layer> layer);

    const Shape& input_shape() const { return input_shape_; }
    /// Output shape for a batch of size 1, excluding the batch axis.
    Shape output_shape() const;
    std::size_t layer_count() const { return layers_.size(); }
    Layer& layer(std::size_t i) { return *layers_.at(i); }

    Tensor forward(const Tensor& batch, bool training, ForwardCache& cache, bool use_masks = true);
    Tensor forward(const Tensor& batch, bool training = false, bool use_masks = true);
    /// Accumulates parameter gradients from d(loss)/d(logits).
    void backward(const ForwardCache& cache, const Tensor& dlogits);

    std::vector<Param*> params();
    std::vector<Param*> trainable_params();
    std::vector<Param*> prunable_params();
    Param& param(const std::string& name);
    bool has_param(const std::string& name);

    void zero_grad();
    void clear_masks();
    void init(RandomSource& rng);

private:
    Shape input_shape_;
    std::vector<std::unique_ptr<Layer>> layers_;
};

/// Softmax cross-entropy loss with gradients accumulated into the network (grads are zeroed first).
double loss_and_gradients(Network& net, const Tensor& batch, const std::vector<int>& labels, bool training = true,
                          bool use_masks = true);

}  // namespace gibbs::nn

#include "gibbs/nn/network.hpp"

#include <set>
#include <stdexcept>

namespace gibbs::nn {

namespace {

Shape batched(const Shape& s) {
    Shape out{1};
    out.insert(out.end(), s.begin(), s.end());
    return out;
}

}  // namespace

void Network::add(std::unique_ptr<Layer> layer) {
    Shape s = batched(output_shape());
    layer->output_shape(s);  // throws if the shapes do not compose
    std::set<std::string> names;
    for (Param* p : params()) names.insert(p->name);
    for (Param* p : layer->params()) {
        if (!names.insert(p->name).second) throw std::invalid_argument("duplicate parameter name " + p->name);
    }
    layers_.push_back(std::move(layer));
}

Shape Network::output_shape() const {
    Shape s = batched(input_shape_);
    for (const auto& l : layers_) s = l->output_shape(s);
    return Shape(s.begin() + 1, s.end());
}

Tensor Network::forward(const Tensor& batch, bool training, ForwardCache& cache, bool use_masks) {
    if (batch.rank() != static_cast<Index>(input_shape_.size()) + 1 ||
        !std::equal(input_shape_.begin(), input_shape_.end(), batch.shape.begin() + 1)) {
        throw std::invalid_argument("batch shape " + shape_string(batch.shape) + " does not match network input " +
                                    shape_string(input_shape_));
    }
    cache.layers.assign(layers_.size(), Cache{});
    Tensor x = batch;
    for (std::size_t i = 0; i < layers_.size(); ++i) x = layers_[i]->forward(x, training, use_masks, cache.layers[i]);
    return x;
}

Tensor Network::forward(const Tensor& batch, bool training, bool use_masks) {
    ForwardCache cache;
    return forward(batch, training, cache, use_masks);
}

void Network::backward(const ForwardCache& cache, const Tensor& dlogits) {
    if (cache.layers.size() != layers_.size()) throw std::invalid_argument("cache does not match network");
    Tensor d = dlogits;
    for (std::size_t i = layers_.size(); i-- > 0;) d = layers_[i]->backward(d, cache.layers[i]);
}

std::vector<Param*> Network::params() {
    std::vector<Param*> out;
    for (auto& l : layers_) {
        for (Param* p : l->params()) out.push_back(p);
    }
    return out;
}

std::vector<Param*> Network::trainable_params() {
    std::vector<Param*> out;
    for (Param* p : params()) {
        if (p->trainable) out.push_back(p);
    }
    return out;
}

std::vector<Param*> Network::prunable_params() {
    std::vector<Param*> out;
    for (Param* p : params()) {
        if (p->prunable) out.push_back(p);
    }
    return out;
}

Param& Network::param(const std::string& name) {
    for (Param* p : params()) {
        if (p->name == name) return *p;
    }
    throw std::invalid_argument("no parameter named " + name);
}

bool Network::has_param(const std::string& name) {
    for (Param* p : params()) {
        if (p->name == name) return true;
    }
    return false;
}

void Network::zero_grad() {
    for (Param* p : params()) p->grad.setZero();
}

void Network::clear_masks() {
    for (Param* p : params()) p->mask.reset();
}

void Network::init(RandomSource& rng) {
    for (auto& l : layers_) l->init(rng);
}

double loss_and_gradients(Network& net, const Tensor& batch, const std::vector<int>& labels, bool training,
                          bool use_masks) {
    ForwardCache cache;
    const Tensor logits = net.forward(batch, training, cache, use_masks);
    LossResult r = softmax_cross_entropy(logits, labels);
    net.zero_grad();
    net.backward(cache, r.dlogits);
    return r.loss;
}

}  // namespace gibbs::nn

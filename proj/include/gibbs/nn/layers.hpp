#pragma once

#include "gibbs/mask_core.hpp"
#include "gibbs/nn/tensor.hpp"
#include "gibbs/random.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace gibbs::nn {

struct Param {
    std::string name;
    Shape shape;
    Eigen::VectorXd value;
    Eigen::VectorXd grad;
    bool trainable = true;
    bool prunable = false;
    std::optional<PruneMask> mask;

    Param() = default;
    Param(std::string n, Shape s, bool prunable_weight = false)
        : name(std::move(n)), shape(std::move(s)), value(Eigen::VectorXd::Zero(shape_size(shape))),
          grad(Eigen::VectorXd::Zero(shape_size(shape))), prunable(prunable_weight) {}

    Index size() const { return value.size(); }

    /// Weights as seen by the forward pass.
    Eigen::VectorXd effective(bool use_mask) const {
        if (use_mask && mask) return apply_mask(value, *mask);
        return value;
    }

    /// Accumulates d(loss)/d(effective) into grad; masked entries receive exactly 0.
    void accumulate(const Eigen::Ref<const Eigen::VectorXd>& d_effective, bool use_mask) {
        if (use_mask && mask) {
            grad += apply_mask(Eigen::VectorXd(d_effective), *mask);
        } else {
            grad += d_effective;
        }
    }
};

struct Cache {
    Tensor input;
    Tensor aux;
    std::vector<Index> argmax;
    Eigen::VectorXd inv_std;
    bool training = false;
    bool masked = true;
    std::vector<Cache> children;
};

class Layer {
public:
    explicit Layer(std::string name) : name_(std::move(name)) {}
    virtual ~Layer() = default;

    const std::string& name() const { return name_; }
    virtual std::string kind() const = 0;
    virtual Shape output_shape(const Shape& in) const = 0;
    virtual Tensor forward(const Tensor& x, bool training, bool use_masks, Cache& cache) = 0;
    /// Returns d(loss)/d(input); parameter gradients are accumulated.
    virtual Tensor backward(const Tensor& dy, const Cache& cache) = 0;
    virtual std::vector<Param*> params() { return {}; }
    virtual void init(RandomSource&) {}

private:
    std::string name_;
};

/// 2-D convolution, stride 1, same padding, odd K. Weight layout (C_out, K, K, C_in).
class Conv2d final : public Layer {
public:
    Conv2d(std::string name, Index in_channels, Index out_channels, Index kernel, bool bias = true);

    std::string kind() const override { return "conv2d"; }
    Shape output_shape(const Shape& in) const override;
    Tensor forward(const Tensor& x, bool training, bool use_masks, Cache& cache) override;
    Tensor backward(const Tensor& dy, const Cache& cache) override;
    std::vector<Param*> params() override;
    void init(RandomSource& rng) override;

    Index in_channels() const { return cin_; }
    Index out_channels() const { return cout_; }
    Index kernel() const { return k_; }
    Param& weight() { return weight_; }
    Param* bias() { return bias_ ? &*bias_ : nullptr; }

private:
    RowMatrix im2col(const Tensor& x) const;
    Tensor col2im(const RowMatrix& cols, const Shape& in) const;

    Index cin_, cout_, k_;
    Param weight_;
    std::optional<Param> bias_;
};

/// y = x W^T + b with W of shape (out, in).
class Dense final : public Layer {
public:
    Dense(std::string name, Index in, Index out, bool bias = true);

    std::string kind() const override { return "dense"; }
    Shape output_shape(const Shape& in) const override;
    Tensor forward(const Tensor& x, bool training, bool use_masks, Cache& cache) override;
    Tensor backward(const Tensor& dy, const Cache& cache) override;
    std::vector<Param*> params() override;
    void init(RandomSource& rng) override;

    Param& weight() { return weight_; }
    Param* bias() { return bias_ ? &*bias_ : nullptr; }

private:
    Index in_, out_;
    Param weight_;
    std::optional<Param> bias_;
};

class Relu final : public Layer {
public:
    using Layer::Layer;
    std::string kind() const override { return "relu"; }
    Shape output_shape(const Shape& in) const override { return in; }
    Tensor forward(const Tensor& x, bool training, bool use_masks, Cache& cache) override;
    Tensor backward(const Tensor& dy, const Cache& cache) override;
};

/// 2x2 max pooling, stride 2; odd trailing rows/columns are dropped.
class MaxPool2 final : public Layer {
public:
    using Layer::Layer;
    std::string kind() const override { return "maxpool2"; }
    Shape output_shape(const Shape& in) const override;
    Tensor forward(const Tensor& x, bool training, bool use_masks, Cache& cache) override;
    Tensor backward(const Tensor& dy, const Cache& cache) override;
};

class GlobalAvgPool final : public Layer {
public:
    using Layer::Layer;
    std::string kind() const override { return "global-avg-pool"; }
    Shape output_shape(const Shape& in) const override;
    Tensor forward(const Tensor& x, bool training, bool use_masks, Cache& cache) override;
    Tensor backward(const Tensor& dy, const Cache& cache) override;
};

class Flatten final : public Layer {
public:
    using Layer::Layer;
    std::string kind() const override { return "flatten"; }
    Shape output_shape(const Shape& in) const override;
    Tensor forward(const Tensor& x, bool training, bool use_masks, Cache& cache) override;
    Tensor backward(const Tensor& dy, const Cache& cache) override;
};

/// Per-channel normalisation over every axis but the last, with running moments for inference.
class BatchNorm final : public Layer {
public:
    BatchNorm(std::string name, Index channels, double momentum = 0.9, double eps = 1e-5);

    std::string kind() const override { return "batch-norm"; }
    Shape output_shape(const Shape& in) const override;
    Tensor forward(const Tensor& x, bool training, bool use_masks, Cache& cache) override;
    Tensor backward(const Tensor& dy, const Cache& cache) override;
    std::vector<Param*> params() override;
    void init(RandomSource& rng) override;

private:
    Index channels_;
    double momentum_, eps_;
    Param gamma_, beta_, running_mean_, running_var_;
};

/// relu(bn(conv(relu(bn(conv(x))))) + shortcut(x)); the shortcut is a 1x1 conv when channels change.
class ResidualBlock final : public Layer {
public:
    ResidualBlock(std::string name, Index in_channels, Index out_channels);

    std::string kind() const override { return "residual"; }
    Shape output_shape(const Shape& in) const override;
    Tensor forward(const Tensor& x, bool training, bool use_masks, Cache& cache) override;
    Tensor backward(const Tensor& dy, const Cache& cache) override;
    std::vector<Param*> params() override;
    void init(RandomSource& rng) override;

    Conv2d* projection() { return proj_.get(); }

private:
    Conv2d conv_a_;
    BatchNorm bn_a_;
    Conv2d conv_b_;
    BatchNorm bn_b_;
    std::unique_ptr<Conv2d> proj_;
};

struct LossResult {
    double loss = 0;
    Tensor dlogits;
};

/// Mean softmax cross-entropy over the batch.
LossResult softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels);

}  // namespace gibbs::nn

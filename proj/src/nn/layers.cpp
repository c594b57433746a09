#include "gibbs/nn/layers.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace gibbs::nn {

std::string shape_string(const Shape& s) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ')';
    return os.str();
}

namespace {

void expect_rank(const Shape& s, std::size_t rank, const std::string& who) {
    if (s.size() != rank) throw std::invalid_argument(who + ": expected rank " + std::to_string(rank) + " input, got " + shape_string(s));
}

void he_normal(Param& p, Index fan_in, RandomSource& rng) {
    const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (Index i = 0; i < p.size(); ++i) p.value[i] = sd * rng.normal();
}

}  // namespace

// ---- Conv2d ----

Conv2d::Conv2d(std::string name, Index in_channels, Index out_channels, Index kernel, bool bias)
    : Layer(std::move(name)), cin_(in_channels), cout_(out_channels), k_(kernel),
      weight_(this->name() + ".weight", {out_channels, kernel, kernel, in_channels}, true) {
    if (kernel < 1 || kernel % 2 == 0) throw std::invalid_argument("conv2d kernel must be odd");
    if (in_channels < 1 || out_channels < 1) throw std::invalid_argument("conv2d channel counts must be positive");
    if (bias) bias_.emplace(this->name() + ".bias", Shape{out_channels});
}

Shape Conv2d::output_shape(const Shape& in) const {
    expect_rank(in, 4, name());
    if (in[3] != cin_) throw std::invalid_argument(name() + ": expected " + std::to_string(cin_) + " input channels, got " + shape_string(in));
    return {in[0], in[1], in[2], cout_};
}

RowMatrix Conv2d::im2col(const Tensor& x) const {
    const Index b = x.dim(0), h = x.dim(1), w = x.dim(2), pad = k_ / 2;
    RowMatrix cols = RowMatrix::Zero(b * h * w, k_ * k_ * cin_);
    for (Index n = 0; n < b; ++n) {
        for (Index y = 0; y < h; ++y) {
            for (Index xx = 0; xx < w; ++xx) {
                double* row = cols.row((n * h + y) * w + xx).data();
                for (Index ky = 0; ky < k_; ++ky) {
                    const Index sy = y + ky - pad;
                    if (sy < 0 || sy >= h) continue;
                    for (Index kx = 0; kx < k_; ++kx) {
                        const Index sx = xx + kx - pad;
                        if (sx < 0 || sx >= w) continue;
                        const double* src = x.values.data() + ((n * h + sy) * w + sx) * cin_;
                        std::copy(src, src + cin_, row + (ky * k_ + kx) * cin_);
                    }
                }
            }
        }
    }
    return cols;
}

Tensor Conv2d::col2im(const RowMatrix& cols, const Shape& in) const {
    const Index b = in[0], h = in[1], w = in[2], pad = k_ / 2;
    Tensor dx(in);
    for (Index n = 0; n < b; ++n) {
        for (Index y = 0; y < h; ++y) {
            for (Index xx = 0; xx < w; ++xx) {
                const double* row = cols.row((n * h + y) * w + xx).data();
                for (Index ky = 0; ky < k_; ++ky) {
                    const Index sy = y + ky - pad;
                    if (sy < 0 || sy >= h) continue;
                    for (Index kx = 0; kx < k_; ++kx) {
                        const Index sx = xx + kx - pad;
                        if (sx < 0 || sx >= w) continue;
                        double* dst = dx.values.data() + ((n * h + sy) * w + sx) * cin_;
                        const double* src = row + (ky * k_ + kx) * cin_;
                        for (Index c = 0; c < cin_; ++c) dst[c] += src[c];
                    }
                }
            }
        }
    }
    return dx;
}

Tensor Conv2d::forward(const Tensor& x, bool training, bool use_masks, Cache& cache) {
    (void)training;
    const Shape out_shape = output_shape(x.shape);
    const Eigen::VectorXd weff = weight_.effective(use_masks);
    const Eigen::Map<const RowMatrix> wm(weff.data(), cout_, k_ * k_ * cin_);
    Tensor out(out_shape);
    auto om = out.matrix(x.dim(0) * x.dim(1) * x.dim(2));
    om.noalias() = im2col(x) * wm.transpose();
    if (bias_) om.rowwise() += bias_->value.transpose();
    cache.input = x;
    cache.masked = use_masks;
    return out;
}

Tensor Conv2d::backward(const Tensor& dy, const Cache& cache) {
    const Tensor& x = cache.input;
    const Index rows = x.dim(0) * x.dim(1) * x.dim(2);
    const auto dym = dy.matrix(rows);
    const RowMatrix cols = im2col(x);
    const RowMatrix dw = dym.transpose() * cols;
    weight_.accumulate(Eigen::Map<const Eigen::VectorXd>(dw.data(), dw.size()), cache.masked);
    if (bias_) bias_->grad += dym.colwise().sum().transpose();
    const Eigen::VectorXd weff = weight_.effective(cache.masked);
    const Eigen::Map<const RowMatrix> wm(weff.data(), cout_, k_ * k_ * cin_);
    const RowMatrix dcols = dym * wm;
    return col2im(dcols, x.shape);
}

std::vector<Param*> Conv2d::params() {
    std::vector<Param*> out{&weight_};
    if (bias_) out.push_back(&*bias_);
    return out;
}

void Conv2d::init(RandomSource& rng) {
    he_normal(weight_, k_ * k_ * cin_, rng);
    if (bias_) bias_->value.setZero();
}

// ---- Dense ----

Dense::Dense(std::string name, Index in, Index out, bool bias)
    : Layer(std::move(name)), in_(in), out_(out), weight_(this->name() + ".weight", {out, in}, true) {
    if (in < 1 || out < 1) throw std::invalid_argument("dense sizes must be positive");
    if (bias) bias_.emplace(this->name() + ".bias", Shape{out});
}

Shape Dense::output_shape(const Shape& in) const {
    expect_rank(in, 2, name());
    if (in[1] != in_) throw std::invalid_argument(name() + ": expected " + std::to_string(in_) + " features, got " + shape_string(in));
    return {in[0], out_};
}

Tensor Dense::forward(const Tensor& x, bool training, bool use_masks, Cache& cache) {
    (void)training;
    Tensor out(output_shape(x.shape));
    const Eigen::VectorXd weff = weight_.effective(use_masks);
    const Eigen::Map<const RowMatrix> wm(weff.data(), out_, in_);
    auto om = out.matrix(x.dim(0));
    om.noalias() = x.matrix(x.dim(0)) * wm.transpose();
    if (bias_) om.rowwise() += bias_->value.transpose();
    cache.input = x;
    cache.masked = use_masks;
    return out;
}

Tensor Dense::backward(const Tensor& dy, const Cache& cache) {
    const Tensor& x = cache.input;
    const auto dym = dy.matrix(x.dim(0));
    const RowMatrix dw = dym.transpose() * x.matrix(x.dim(0));
    weight_.accumulate(Eigen::Map<const Eigen::VectorXd>(dw.data(), dw.size()), cache.masked);
    if (bias_) bias_->grad += dym.colwise().sum().transpose();
    const Eigen::VectorXd weff = weight_.effective(cache.masked);
    const Eigen::Map<const RowMatrix> wm(weff.data(), out_, in_);
    Tensor dx(x.shape);
    dx.matrix(x.dim(0)).noalias() = dym * wm;
    return dx;
}

std::vector<Param*> Dense::params() {
    std::vector<Param*> out{&weight_};
    if (bias_) out.push_back(&*bias_);
    return out;
}

void Dense::init(RandomSource& rng) {
    he_normal(weight_, in_, rng);
    if (bias_) bias_->value.setZero();
}

// ---- elementwise and pooling ----

Tensor Relu::forward(const Tensor& x, bool, bool, Cache& cache) {
    Tensor out(x.shape, x.values.cwiseMax(0.0));
    cache.input = x;
    return out;
}

Tensor Relu::backward(const Tensor& dy, const Cache& cache) {
    return Tensor(dy.shape, (cache.input.values.array() > 0).select(dy.values, 0.0));
}

Shape MaxPool2::output_shape(const Shape& in) const {
    expect_rank(in, 4, name());
    if (in[1] < 2 || in[2] < 2) throw std::invalid_argument(name() + ": input too small to pool " + shape_string(in));
    return {in[0], in[1] / 2, in[2] / 2, in[3]};
}

Tensor MaxPool2::forward(const Tensor& x, bool, bool, Cache& cache) {
    const Shape os = output_shape(x.shape);
    const Index h = x.dim(1), w = x.dim(2), c = x.dim(3);
    Tensor out(os);
    cache.argmax.assign(static_cast<std::size_t>(out.size()), 0);
    Index o = 0;
    for (Index n = 0; n < os[0]; ++n) {
        for (Index y = 0; y < os[1]; ++y) {
            for (Index xx = 0; xx < os[2]; ++xx) {
                for (Index ch = 0; ch < c; ++ch, ++o) {
                    Index best = ((n * h + 2 * y) * w + 2 * xx) * c + ch;
                    for (Index dy = 0; dy < 2; ++dy) {
                        for (Index dx = 0; dx < 2; ++dx) {
                            const Index idx = ((n * h + 2 * y + dy) * w + 2 * xx + dx) * c + ch;
                            if (x.values[idx] > x.values[best]) best = idx;
                        }
                    }
                    out.values[o] = x.values[best];
                    cache.argmax[static_cast<std::size_t>(o)] = best;
                }
            }
        }
    }
    cache.input.shape = x.shape;
    return out;
}

Tensor MaxPool2::backward(const Tensor& dy, const Cache& cache) {
    Tensor dx(cache.input.shape);
    for (Index o = 0; o < dy.size(); ++o) dx.values[cache.argmax[static_cast<std::size_t>(o)]] += dy.values[o];
    return dx;
}

Shape GlobalAvgPool::output_shape(const Shape& in) const {
    expect_rank(in, 4, name());
    return {in[0], in[3]};
}

Tensor GlobalAvgPool::forward(const Tensor& x, bool, bool, Cache& cache) {
    const Index b = x.dim(0), hw = x.dim(1) * x.dim(2), c = x.dim(3);
    Tensor out(output_shape(x.shape));
    for (Index n = 0; n < b; ++n) {
        const Eigen::Map<const RowMatrix> img(x.values.data() + n * hw * c, hw, c);
        out.values.segment(n * c, c) = img.colwise().mean().transpose();
    }
    cache.input.shape = x.shape;
    return out;
}

Tensor GlobalAvgPool::backward(const Tensor& dy, const Cache& cache) {
    const Shape& s = cache.input.shape;
    const Index b = s[0], hw = s[1] * s[2], c = s[3];
    Tensor dx(s);
    for (Index n = 0; n < b; ++n) {
        Eigen::Map<RowMatrix> img(dx.values.data() + n * hw * c, hw, c);
        img.rowwise() = dy.values.segment(n * c, c).transpose() / static_cast<double>(hw);
    }
    return dx;
}

Shape Flatten::output_shape(const Shape& in) const {
    if (in.empty()) throw std::invalid_argument(name() + ": empty shape");
    return {in[0], shape_size(in) / in[0]};
}

Tensor Flatten::forward(const Tensor& x, bool, bool, Cache& cache) {
    cache.input.shape = x.shape;
    return x.reshaped(output_shape(x.shape));
}

Tensor Flatten::backward(const Tensor& dy, const Cache& cache) { return dy.reshaped(cache.input.shape); }

// ---- BatchNorm ----

BatchNorm::BatchNorm(std::string name, Index channels, double momentum, double eps)
    : Layer(std::move(name)), channels_(channels), momentum_(momentum), eps_(eps),
      gamma_(this->name() + ".gamma", {channels}), beta_(this->name() + ".beta", {channels}),
      running_mean_(this->name() + ".running_mean", {channels}),
      running_var_(this->name() + ".running_var", {channels}) {
    running_mean_.trainable = false;
    running_var_.trainable = false;
    gamma_.value.setOnes();
    running_var_.value.setOnes();
}

Shape BatchNorm::output_shape(const Shape& in) const {
    if (in.size() < 2 || in.back() != channels_) {
        throw std::invalid_argument(name() + ": expected " + std::to_string(channels_) + " channels, got " + shape_string(in));
    }
    return in;
}

Tensor BatchNorm::forward(const Tensor& x, bool training, bool, Cache& cache) {
    output_shape(x.shape);
    const Index rows = x.size() / channels_;
    const auto xm = x.matrix(rows);
    Eigen::RowVectorXd mean, var;
    if (training) {
        mean = xm.colwise().mean();
        var = (xm.rowwise() - mean).array().square().colwise().mean();
        running_mean_.value = momentum_ * running_mean_.value + (1 - momentum_) * mean.transpose();
        running_var_.value = momentum_ * running_var_.value + (1 - momentum_) * var.transpose();
    } else {
        mean = running_mean_.value.transpose();
        var = running_var_.value.transpose();
    }
    const Eigen::RowVectorXd inv = (var.array() + eps_).rsqrt();
    Tensor xhat(x.shape);
    auto hm = xhat.matrix(rows);
    hm = (xm.rowwise() - mean).array().rowwise() * inv.array();
    Tensor out(x.shape);
    out.matrix(rows) = (hm.array().rowwise() * gamma_.value.transpose().array()).rowwise() + beta_.value.transpose().array();
    cache.aux = std::move(xhat);
    cache.inv_std = inv.transpose();
    cache.training = training;
    return out;
}

Tensor BatchNorm::backward(const Tensor& dy, const Cache& cache) {
    const Index rows = dy.size() / channels_;
    const auto dym = dy.matrix(rows);
    const auto hm = cache.aux.matrix(rows);
    gamma_.grad += (dym.array() * hm.array()).colwise().sum().transpose().matrix();
    beta_.grad += dym.colwise().sum().transpose();
    Tensor dx(dy.shape);
    auto dxm = dx.matrix(rows);
    const Eigen::RowVectorXd scale = (gamma_.value.array() * cache.inv_std.array()).transpose();
    if (!cache.training) {
        dxm = dym.array().rowwise() * scale.array();
        return dx;
    }
    const Eigen::RowVectorXd mean_dy = dym.colwise().mean();
    const Eigen::RowVectorXd mean_dy_h = (dym.array() * hm.array()).colwise().mean();
    dxm = ((dym.rowwise() - mean_dy).array() - hm.array().rowwise() * mean_dy_h.array()).rowwise() * scale.array();
    return dx;
}

std::vector<Param*> BatchNorm::params() { return {&gamma_, &beta_, &running_mean_, &running_var_}; }

void BatchNorm::init(RandomSource&) {
    gamma_.value.setOnes();
    beta_.value.setZero();
    running_mean_.value.setZero();
    running_var_.value.setOnes();
}

// ---- ResidualBlock ----

ResidualBlock::ResidualBlock(std::string name, Index in_channels, Index out_channels)
    : Layer(name), conv_a_(name + ".conv_a", in_channels, out_channels, 3, false), bn_a_(name + ".bn_a", out_channels),
      conv_b_(name + ".conv_b", out_channels, out_channels, 3, false), bn_b_(name + ".bn_b", out_channels) {
    if (in_channels != out_channels) proj_ = std::make_unique<Conv2d>(name + ".proj", in_channels, out_channels, 1, true);
}

Shape ResidualBlock::output_shape(const Shape& in) const { return conv_a_.output_shape(in); }

Tensor ResidualBlock::forward(const Tensor& x, bool training, bool use_masks, Cache& cache) {
    cache.children.assign(proj_ ? 5 : 4, Cache{});
    auto& ch = cache.children;
    Tensor h = conv_a_.forward(x, training, use_masks, ch[0]);
    h = bn_a_.forward(h, training, use_masks, ch[1]);
    cache.aux = h;  // pre-activation of the inner relu
    h.values = h.values.cwiseMax(0.0);
    h = conv_b_.forward(h, training, use_masks, ch[2]);
    h = bn_b_.forward(h, training, use_masks, ch[3]);
    if (proj_) {
        h.values += proj_->forward(x, training, use_masks, ch[4]).values;
    } else {
        h.values += x.values;
    }
    cache.input = h;  // pre-activation of the output relu
    h.values = h.values.cwiseMax(0.0);
    return h;
}

Tensor ResidualBlock::backward(const Tensor& dy, const Cache& cache) {
    const auto& ch = cache.children;
    Tensor g(dy.shape, (cache.input.values.array() > 0).select(dy.values, 0.0));
    Tensor dx = proj_ ? proj_->backward(g, ch[4]) : g;
    Tensor d = bn_b_.backward(g, ch[3]);
    d = conv_b_.backward(d, ch[2]);
    d.values = (cache.aux.values.array() > 0).select(d.values, 0.0);
    d = bn_a_.backward(d, ch[1]);
    d = conv_a_.backward(d, ch[0]);
    dx.values += d.values;
    return dx;
}

std::vector<Param*> ResidualBlock::params() {
    std::vector<Param*> out;
    for (Layer* l : std::initializer_list<Layer*>{&conv_a_, &bn_a_, &conv_b_, &bn_b_}) {
        for (Param* p : l->params()) out.push_back(p);
    }
    if (proj_) {
        for (Param* p : proj_->params()) out.push_back(p);
    }
    return out;
}

void ResidualBlock::init(RandomSource& rng) {
    conv_a_.init(rng);
    bn_a_.init(rng);
    conv_b_.init(rng);
    bn_b_.init(rng);
    if (proj_) proj_->init(rng);
}

// ---- loss ----

LossResult softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2) throw std::invalid_argument("logits must be (batch, classes), got " + shape_string(logits.shape));
    const Index b = logits.dim(0), k = logits.dim(1);
    if (static_cast<Index>(labels.size()) != b) throw std::invalid_argument("label count does not match batch size");
    LossResult r;
    r.dlogits = Tensor(logits.shape);
    const auto lm = logits.matrix(b);
    auto dm = r.dlogits.matrix(b);
    for (Index n = 0; n < b; ++n) {
        const int y = labels[static_cast<std::size_t>(n)];
        if (y < 0 || y >= k) throw std::invalid_argument("label out of range");
        const double mx = lm.row(n).maxCoeff();
        const Eigen::RowVectorXd e = (lm.row(n).array() - mx).exp();
        const double z = e.sum();
        r.loss += std::log(z) + mx - lm(n, y);
        dm.row(n) = e / z;
        dm(n, y) -= 1.0;
    }
    r.loss /= static_cast<double>(b);
    dm /= static_cast<double>(b);
    return r;
}

}  // namespace gibbs::nn

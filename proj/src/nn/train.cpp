#include "gibbs/nn/train.hpp"
#include "gibbs/nn/optim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace gibbs::nn {

std::string to_string(Structure s) {
    switch (s) {
        case Structure::Unstructured: return "unstructured";
        case Structure::Kernel: return "kernel";
        case Structure::Filter: return "filter";
    }
    return "?";
}

Structure parse_structure(const std::string& name) {
    if (name == "unstructured") return Structure::Unstructured;
    if (name == "kernel") return Structure::Kernel;
    if (name == "filter") return Structure::Filter;
    throw std::invalid_argument("unknown structure " + name + " (expected unstructured, kernel or filter)");
}

void PruneConfig::validate() const {
    if (!(p >= 0 && p <= 1)) throw std::invalid_argument("p must lie in [0, 1]");
    if (rebuild_every < 1) throw std::invalid_argument("rebuild_every must be at least 1");
    if (variant == Variant::StructuredQuadratic && !(c > 0)) throw std::invalid_argument("quadratic hamiltonian needs c > 0");
    const bool structured = structure != Structure::Unstructured;
    if (structured != is_structured(variant)) {
        throw std::invalid_argument("hamiltonian " + std::string(gibbs::to_string(variant)) + " does not fit structure " +
                                    to_string(structure));
    }
}

std::shared_ptr<const Partition> make_partition(const Param& weight, Structure structure) {
    const Shape& s = weight.shape;
    if (structure == Structure::Unstructured) return std::make_shared<const Partition>(Partition::singletons(weight.size()));
    if (s.size() == 2) {
        if (structure == Structure::Kernel) throw std::invalid_argument(weight.name + ": kernel structure needs a conv weight");
        return std::make_shared<const Partition>(Partition::contiguous(weight.size(), s[1]));
    }
    if (s.size() != 4) throw std::invalid_argument(weight.name + ": unsupported weight rank");
    const Index cout = s[0], kk = s[1] * s[2], cin = s[3];
    if (structure == Structure::Filter) {
        std::vector<int> channel(static_cast<std::size_t>(weight.size()));
        for (Index i = 0; i < weight.size(); ++i) channel[static_cast<std::size_t>(i)] = static_cast<int>(i % cin);
        std::vector<std::vector<Index>> groups(static_cast<std::size_t>(cout));
        for (Index o = 0; o < cout; ++o) {
            auto& g = groups[static_cast<std::size_t>(o)];
            g.resize(static_cast<std::size_t>(kk * cin));
            std::iota(g.begin(), g.end(), o * kk * cin);
        }
        return std::make_shared<const Partition>(weight.size(), std::move(groups), std::move(channel));
    }
    std::vector<std::vector<Index>> groups;
    groups.reserve(static_cast<std::size_t>(cout * cin));
    for (Index o = 0; o < cout; ++o) {
        for (Index c = 0; c < cin; ++c) {
            std::vector<Index> g;
            for (Index k = 0; k < kk; ++k) g.push_back((o * kk + k) * cin + c);
            groups.push_back(std::move(g));
        }
    }
    return std::make_shared<const Partition>(weight.size(), std::move(groups));
}

void PrunedLayer::rebuild() {
    auto part = cfg.structure == Structure::Unstructured ? nullptr : partition;
    hamiltonian = build_hamiltonian(cfg.variant, cfg.p, param->value, part, cfg.c);
}

PruneMask PrunedLayer::converged() const {
    if (cfg.p == 0) return all_kept(param->size());
    if (cfg.structure != Structure::Unstructured) return converged_mask_structured(cfg.p, param->value, *partition);
    return converged_mask_unstructured(cfg.p, param->value);
}

PruneMask PrunedLayer::sample(double beta, RandomSource& rng, const SamplerOptions& opts) const {
    if (cfg.p == 0) return all_kept(param->size());
    return sample_mask(hamiltonian, beta, rng, opts);
}

std::vector<PrunedLayer> resolve_pruned_layers(Network& net, const std::vector<LayerPrune>& prunes) {
    std::vector<PrunedLayer> out;
    for (const LayerPrune& lp : prunes) {
        lp.cfg.validate();
        Param& p = net.param(lp.param);
        if (!p.prunable) throw std::invalid_argument(lp.param + " is not a prunable weight");
        for (const PrunedLayer& other : out) {
            if (other.param == &p) throw std::invalid_argument(lp.param + " listed twice");
        }
        PrunedLayer l;
        l.param = &p;
        l.cfg = lp.cfg;
        l.partition = make_partition(p, lp.cfg.structure);
        out.push_back(std::move(l));
    }
    return out;
}

namespace {

template <class F>
void for_batches(const DatasetSplit& split, Index batch_size, F&& f) {
    std::vector<Index> idx(static_cast<std::size_t>(split.count()));
    std::iota(idx.begin(), idx.end(), Index{0});
    for (Index start = 0; start < split.count(); start += batch_size) {
        const Index n = std::min(batch_size, split.count() - start);
        f(std::span<const Index>(idx.data() + start, static_cast<std::size_t>(n)));
    }
}

Index argmax_row(const Eigen::Map<const RowMatrix>& m, Index r) {
    Index best = 0;
    for (Index j = 1; j < m.cols(); ++j) {
        if (m(r, j) > m(r, best)) best = j;
    }
    return best;
}

}  // namespace

double evaluate(Network& net, const DatasetSplit& split, bool mask_applied, Index batch_size) {
    if (split.count() == 0) return 0;
    Index correct = 0;
    for_batches(split, batch_size, [&](std::span<const Index> idx) {
        const Tensor logits = net.forward(gather_images(split, idx), false, mask_applied);
        const auto m = logits.matrix(logits.dim(0));
        for (std::size_t i = 0; i < idx.size(); ++i) {
            correct += argmax_row(m, static_cast<Index>(i)) == split.labels[static_cast<std::size_t>(idx[i])];
        }
    });
    return static_cast<double>(correct) / static_cast<double>(split.count());
}

double dataset_loss(Network& net, const DatasetSplit& split, bool mask_applied, Index batch_size) {
    if (split.count() == 0) return 0;
    double total = 0;
    for_batches(split, batch_size, [&](std::span<const Index> idx) {
        const Tensor logits = net.forward(gather_images(split, idx), false, mask_applied);
        total += softmax_cross_entropy(logits, gather_labels(split, idx)).loss * static_cast<double>(idx.size());
    });
    return total / static_cast<double>(split.count());
}

TrainResult train_and_prune(Network& net, const DatasetSplit& train, const DatasetSplit& val,
                            const std::vector<LayerPrune>& prunes, const TrainOptions& opts, const RandomSource& rng) {
    opts.beta.validate();
    opts.lr.validate();
    if (opts.epochs < 0) throw std::invalid_argument("epochs must be non-negative");
    if (opts.batch_size < 1) throw std::invalid_argument("batch_size must be positive");
    if (train.count() == 0) throw std::invalid_argument("empty training split");

    std::vector<PrunedLayer> layers = resolve_pruned_layers(net, prunes);
    TrainResult result;
    for (const PrunedLayer& l : layers) result.layer_names.push_back(l.param->name);

    const bool sampled = opts.mode == MaskMode::Gibbs || opts.mode == MaskMode::Converged;
    if (opts.mode == MaskMode::Dense) {
        for (PrunedLayer& l : layers) l.param->mask.reset();
    }
    if (sampled) {
        for (PrunedLayer& l : layers) l.param->mask = all_kept(l.param->size());
    }

    Adam adam(net.trainable_params());
    const RandomSource shuffle_rng = rng.substream(1);
    const RandomSource augment_rng = rng.substream(2);
    const RandomSource mask_rng = rng.substream(3);
    const auto t0 = std::chrono::steady_clock::now();
    auto wall = [&] {
        if (!opts.record_wall_time) return 0.0;
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };
    auto current_mask = [](const PrunedLayer& l) { return l.param->mask ? *l.param->mask : all_kept(l.param->size()); };

    std::vector<Index> order(static_cast<std::size_t>(train.count()));
    std::iota(order.begin(), order.end(), Index{0});
    std::int64_t step = 0;
    double lr = 0;
    for (int e = 0; e < opts.epochs; ++e) {
        const double beta = beta_at(opts.beta, e);
        lr = opts.constant_lr > 0 ? opts.constant_lr : lr_at(opts.lr, e);
        RandomSource sh = shuffle_rng.substream(static_cast<std::uint64_t>(e));
        std::shuffle(order.begin(), order.end(), sh);

        double loss_sum = 0;
        for (Index start = 0; start < train.count(); start += opts.batch_size) {
            const Index n = std::min(opts.batch_size, train.count() - start);
            const std::span<const Index> idx(order.data() + start, static_cast<std::size_t>(n));
            Tensor batch = gather_images(train, idx);
            if (opts.augment) {
                const Index sz = train.image_size();
                for (Index i = 0; i < n; ++i) {
                    RandomSource ar = augment_rng.substream(static_cast<std::uint64_t>(step)).substream(static_cast<std::uint64_t>(i));
                    const Tensor img(train.image_shape(), batch.values.segment(i * sz, sz));
                    batch.values.segment(i * sz, sz) = augment(img, ar).values;
                }
            }
            if (sampled) {
                for (std::size_t li = 0; li < layers.size(); ++li) {
                    PrunedLayer& l = layers[li];
                    if (opts.mode == MaskMode::Converged) {
                        l.param->mask = l.converged();
                        continue;
                    }
                    if (step % l.cfg.rebuild_every == 0) l.rebuild();
                    RandomSource r = mask_rng.substream(static_cast<std::uint64_t>(step)).substream(li);
                    l.param->mask = l.sample(beta, r, opts.sampler);
                }
            }
            double loss = loss_and_gradients(net, batch, gather_labels(train, idx), true, true);
            if (opts.l1_penalty > 0) {
                for (PrunedLayer& l : layers) {
                    loss += opts.l1_penalty * l.param->value.lpNorm<1>();
                    l.param->grad += opts.l1_penalty * l.param->value.cwiseSign();
                }
            }
            adam.step(lr);
            loss_sum += loss * static_cast<double>(n);
            ++step;
        }

        EpochRecord rec;
        rec.epoch = opts.epoch_offset + e;
        rec.phase = opts.phase;
        rec.train_loss = loss_sum / static_cast<double>(train.count());
        rec.beta = opts.mode == MaskMode::Gibbs ? beta : 0.0;
        rec.lr = lr;
        std::vector<PruneMask> cvg;
        for (const PrunedLayer& l : layers) {
            const PruneMask x = current_mask(l);
            cvg.push_back(l.converged());
            rec.pruned_fraction.push_back(pruned_fraction(x));
            rec.agreement.push_back(mask_agreement(x, cvg.back()));
        }
        if (sampled) {
            for (std::size_t li = 0; li < layers.size(); ++li) layers[li].param->mask = cvg[li];
        }
        rec.val_accuracy = evaluate(net, val);
        rec.wall_time_s = wall();
        result.history.push_back(std::move(rec));
    }

    for (PrunedLayer& l : layers) {
        if (sampled) l.param->mask = l.converged();
        result.final_masks.push_back(current_mask(l));
    }
    result.final_accuracy = evaluate(net, val);
    if (opts.final_row) {
        EpochRecord rec;
        rec.epoch = opts.epoch_offset + opts.epochs;
        rec.phase = "final";
        rec.train_loss = dataset_loss(net, train);
        rec.val_accuracy = result.final_accuracy;
        rec.beta = opts.mode == MaskMode::Gibbs ? beta_at(opts.beta, opts.epochs) : 0.0;
        rec.lr = opts.epochs > 0 ? lr : (opts.constant_lr > 0 ? opts.constant_lr : lr_at(opts.lr, 0));
        for (std::size_t li = 0; li < layers.size(); ++li) {
            const PruneMask& x = result.final_masks[li];
            rec.pruned_fraction.push_back(pruned_fraction(x));
            rec.agreement.push_back(mask_agreement(x, layers[li].converged()));
        }
        rec.wall_time_s = wall();
        result.history.push_back(std::move(rec));
    }
    return result;
}

}  // namespace gibbs::nn

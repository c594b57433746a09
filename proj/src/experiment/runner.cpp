#include "gibbs/experiment/runner.hpp"

#include "gibbs/nn/checkpoint.hpp"
#include "gibbs/nn/models.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gibbs::exp {

namespace {

enum Stream : std::uint64_t { kInit = 10, kTrain = 20, kFinetune = 21, kRandomMask = 30, kDemo = 40 };

std::filesystem::path data_root(const ExperimentConfig& cfg) {
    if (!cfg.data_dir.empty()) return cfg.data_dir;
    if (const char* env = std::getenv("GIBBS_PRUNE_DATA")) return env;
    throw std::runtime_error("CIFAR-10 needs data_dir or the GIBBS_PRUNE_DATA environment variable");
}

nn::TrainOptions base_options(const ExperimentConfig& cfg) {
    nn::TrainOptions o;
    o.epochs = cfg.effective_epochs();
    o.batch_size = cfg.batch_size;
    o.beta = cfg.effective_beta();
    o.lr = cfg.effective_lr();
    o.augment = cfg.augment;
    o.sampler = cfg.sampler;
    o.record_wall_time = cfg.record_wall_time;
    return o;
}

nn::TrainOptions finetune_options(const ExperimentConfig& cfg) {
    nn::TrainOptions o = base_options(cfg);
    o.mode = nn::MaskMode::Fixed;
    o.epochs = cfg.effective_finetune_epochs();
    o.constant_lr = cfg.finetune_lr;
    o.phase = "finetune";
    o.epoch_offset = cfg.effective_epochs();
    return o;
}

void append(Report& report, const ExperimentConfig& cfg, const nn::TrainResult& r) {
    for (const nn::EpochRecord& e : r.history) {
        report.rows.push_back(ReportRow{cfg.experiment_id, cfg.seed, e.epoch, e.phase, e.train_loss, e.val_accuracy, e.beta, e.lr,
                                        e.pruned_fraction, e.agreement, e.wall_time_s});
    }
}

struct Session {
    ExperimentConfig cfg;
    nn::DatasetSplit train, test;
    nn::Network net;
    std::vector<nn::LayerPrune> prunes;
    RandomSource root;

    explicit Session(const ExperimentConfig& c) : cfg(c), root(c.seed) {
        cfg.validate();
#ifdef _OPENMP
        if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
#endif
        std::tie(train, test) = load_dataset(cfg);
        net = nn::build_model(cfg.model, train.image_shape(), train.classes);
        RandomSource init = root.substream(kInit);
        net.init(init);
        prunes = resolve_prunes(cfg, net);
    }

    RunResult finish(std::vector<nn::TrainResult> phases, bool write) {
        RunResult out;
        for (const auto& l : phases.front().layer_names) out.report.layers.push_back(layer_label(l));
        for (const auto& ph : phases) append(out.report, cfg, ph);
        const nn::TrainResult& last = phases.back();
        for (std::size_t i = 0; i < last.final_masks.size(); ++i) {
            out.masks.push_back({layer_label(last.layer_names[i]), last.final_masks[i]});
        }
        out.final_accuracy = last.final_accuracy;
        if (write) {
            const std::filesystem::path dir = cfg.output_dir;
            std::filesystem::create_directories(dir);
            out.csv_path = dir / "history.csv";
            out.mask_path = dir / "masks.txt";
            out.checkpoint_path = dir / "checkpoint.bin";
            write_report(out.report, out.csv_path);
            export_mask(out.masks, out.mask_path);
            nn::save_checkpoint(net, out.checkpoint_path);
            std::ofstream(dir / "config.txt", std::ios::binary | std::ios::trunc) << format_config(cfg);
        }
        return out;
    }

    /// Dense training, then the converged mask applied once and optionally fine-tuned.
    RunResult prune_after_training(double l1, bool write) {
        nn::TrainOptions o = base_options(cfg);
        o.mode = nn::MaskMode::Dense;
        o.l1_penalty = l1;
        o.final_row = false;
        std::vector<nn::TrainResult> phases{nn::train_and_prune(net, train, test, prunes, o, root.substream(kTrain))};
        for (nn::PrunedLayer& l : nn::resolve_pruned_layers(net, prunes)) l.param->mask = l.converged();
        phases.push_back(nn::train_and_prune(net, train, test, prunes, finetune_options(cfg), root.substream(kFinetune)));
        return finish(std::move(phases), write);
    }

    RunResult train_fixed(bool write) {
        nn::TrainOptions o = base_options(cfg);
        o.mode = nn::MaskMode::Fixed;
        return finish({nn::train_and_prune(net, train, test, prunes, o, root.substream(kTrain))}, write);
    }
};

}  // namespace

std::pair<nn::DatasetSplit, nn::DatasetSplit> load_dataset(const ExperimentConfig& cfg) {
    if (cfg.dataset == "synthetic") return nn::synthetic_dataset(cfg.data_seed, cfg.synthetic_per_class, cfg.synthetic_noise);
    Index subset = 0;
    if (cfg.dataset.starts_with("cifar10:")) subset = std::stoll(cfg.dataset.substr(8));
    return nn::load_cifar10_dir(data_root(cfg), subset);
}

PruneMask random_mask(const nn::PrunedLayer& layer, RandomSource& rng) {
    const Index n = layer.param->size();
    PruneMask x = all_kept(n);
    if (layer.cfg.p == 0) return x;
    if (layer.cfg.structure == nn::Structure::Unstructured) {
        std::vector<Index> idx(static_cast<std::size_t>(n));
        std::iota(idx.begin(), idx.end(), Index{0});
        std::shuffle(idx.begin(), idx.end(), rng);
        const auto count = achievable_pruned_count(layer.cfg.p, n);
        for (std::int64_t i = 0; i < count; ++i) x[idx[static_cast<std::size_t>(i)]] = -1;
        return x;
    }
    const Partition& part = *layer.partition;
    std::vector<Index> order(static_cast<std::size_t>(part.group_count()));
    std::iota(order.begin(), order.end(), Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    const Index groups = achievable_pruned_groups(layer.cfg.p, part, order);
    for (Index j = 0; j < groups; ++j) {
        for (Index i : part.group(order[static_cast<std::size_t>(j)])) x[i] = -1;
    }
    return x;
}

RunResult run_experiment(const ExperimentConfig& cfg, bool write_artifacts) {
    if (cfg.baseline == "random-mask") return baseline_random_mask(cfg, write_artifacts);
    if (cfg.baseline == "reinit-retrain") return baseline_reinit_retrain(cfg, cfg.mask_file, write_artifacts);
    if (cfg.baseline == "oneshot-magnitude") return baseline_oneshot_magnitude(cfg, write_artifacts);
    if (cfg.baseline == "l1-reg") return baseline_l1_reg(cfg, write_artifacts);

    Session s(cfg);
    nn::TrainOptions o = base_options(s.cfg);
    o.mode = nn::MaskMode::Gibbs;
    o.final_row = s.cfg.finetune_epochs == 0;
    std::vector<nn::TrainResult> phases{nn::train_and_prune(s.net, s.train, s.test, s.prunes, o, s.root.substream(kTrain))};
    if (s.cfg.finetune_epochs > 0) {
        phases.push_back(nn::train_and_prune(s.net, s.train, s.test, s.prunes, finetune_options(s.cfg), s.root.substream(kFinetune)));
    }
    return s.finish(std::move(phases), write_artifacts);
}

RunResult baseline_random_mask(ExperimentConfig cfg, bool write_artifacts) {
    cfg.baseline = "random-mask";
    Session s(cfg);
    RandomSource rng = s.root.substream(kRandomMask);
    for (const nn::PrunedLayer& l : nn::resolve_pruned_layers(s.net, s.prunes)) l.param->mask = random_mask(l, rng);
    return s.train_fixed(write_artifacts);
}

RunResult baseline_reinit_retrain(ExperimentConfig cfg, const std::string& mask_file, bool write_artifacts) {
    cfg.baseline = "reinit-retrain";
    cfg.mask_file = mask_file;
    Session s(cfg);
    const std::vector<NamedMask> masks = import_mask(mask_file);
    std::vector<nn::LayerPrune> prunes;
    for (const NamedMask& m : masks) {
        const std::string param = m.name + ".weight";
        if (!s.net.has_param(param)) throw std::runtime_error("mask file names unknown layer " + m.name);
        nn::Param& p = s.net.param(param);
        if (!p.prunable) throw std::runtime_error("mask file names unprunable layer " + m.name);
        if (p.size() != m.mask.size()) {
            throw std::runtime_error("mask for " + m.name + " has " + std::to_string(m.mask.size()) + " entries, layer has " +
                                     std::to_string(p.size()));
        }
        p.mask = m.mask;
        const auto it = std::find_if(s.prunes.begin(), s.prunes.end(), [&](const nn::LayerPrune& lp) { return lp.param == param; });
        prunes.push_back(it != s.prunes.end() ? *it : nn::LayerPrune{param, s.prunes.empty() ? nn::PruneConfig{} : s.prunes.front().cfg});
    }
    s.prunes = std::move(prunes);
    return s.train_fixed(write_artifacts);
}

RunResult baseline_oneshot_magnitude(ExperimentConfig cfg, bool write_artifacts) {
    cfg.baseline = "oneshot-magnitude";
    Session s(cfg);
    return s.prune_after_training(0.0, write_artifacts);
}

RunResult baseline_l1_reg(ExperimentConfig cfg, bool write_artifacts) {
    cfg.baseline = "l1-reg";
    Session s(cfg);
    return s.prune_after_training(s.cfg.l1_penalty, write_artifacts);
}

std::vector<DemoRow> sample_demo(const ExperimentConfig& cfg) {
    Session s(cfg);
    if (!s.cfg.checkpoint.empty()) nn::load_checkpoint(s.net, s.cfg.checkpoint);
    std::vector<nn::PrunedLayer> layers = nn::resolve_pruned_layers(s.net, s.prunes);
    if (layers.empty()) throw std::runtime_error("sample-demo needs at least one pruned layer");
    std::vector<PruneMask> cvg;
    Index total = 0;
    for (nn::PrunedLayer& l : layers) {
        l.rebuild();
        cvg.push_back(l.converged());
        total += l.param->size();
    }
    const BetaSchedule beta = s.cfg.effective_beta();
    const int span = beta.anneal_epochs * beta.stretch;
    const RandomSource demo = s.root.substream(kDemo);
    std::vector<DemoRow> rows;
    for (int j = 0; j < s.cfg.demo_points; ++j) {
        DemoRow r;
        r.point = j;
        r.epoch = s.cfg.demo_points == 1 ? 0 : static_cast<int>(std::lround(static_cast<double>(j) * span / (s.cfg.demo_points - 1)));
        r.beta = beta_at(beta, r.epoch);
        double agree = 0, pruned = 0;
        for (int d = 0; d < s.cfg.demo_draws; ++d) {
            for (std::size_t li = 0; li < layers.size(); ++li) {
                RandomSource rng = demo.substream(static_cast<std::uint64_t>(j)).substream(static_cast<std::uint64_t>(d) * layers.size() + li);
                const PruneMask x = layers[li].sample(r.beta, rng, s.cfg.sampler);
                agree += static_cast<double>((x.array() == cvg[li].array()).count());
                pruned += static_cast<double>((x.array() == -1).count());
            }
        }
        const double denom = static_cast<double>(total) * s.cfg.demo_draws;
        r.agreement = agree / denom;
        r.pruned_fraction = pruned / denom;
        rows.push_back(r);
    }
    return rows;
}

std::string format_demo(const std::vector<DemoRow>& rows) {
    std::string out = "point,epoch,beta,agreement,pruned_fraction\r\n";
    for (const DemoRow& r : rows) {
        out += std::to_string(r.point) + "," + std::to_string(r.epoch) + "," + format_double(r.beta) + "," +
               format_double(r.agreement) + "," + format_double(r.pruned_fraction) + "\r\n";
    }
    return out;
}

}  // namespace gibbs::exp

#include "gibbs/experiment/config.hpp"

#include "gibbs/nn/models.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>

namespace gibbs::exp {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
    T out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw std::invalid_argument(key + ": expected a number, got '" + v + "'");
    }
    return out;
}

double parse_real(const std::string& key, const std::string& v) {
    const double d = parse_number<double>(key, v);
    if (!std::isfinite(d)) throw std::invalid_argument(key + ": value must be finite");
    return d;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument(key + ": expected true or false, got '" + v + "'");
}

AnnealMode parse_anneal(const std::string& v) {
    if (v == "log") return AnnealMode::Log;
    if (v == "linear") return AnnealMode::Linear;
    throw std::invalid_argument("beta_mode: expected log or linear, got '" + v + "'");
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

struct Key {
    std::string name;
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

#define GP_STRING(field) \
    Key { #field, [](ExperimentConfig& c, const std::string& v) { c.field = v; }, [](const ExperimentConfig& c) { return c.field; } }
#define GP_INT(field, T)                                                                             \
    Key {                                                                                            \
        #field, [](ExperimentConfig& c, const std::string& v) { c.field = parse_number<T>(#field, v); }, \
            [](const ExperimentConfig& c) { return std::to_string(c.field); }                         \
    }
#define GP_REAL(field)                                                                            \
    Key {                                                                                         \
        #field, [](ExperimentConfig& c, const std::string& v) { c.field = parse_real(#field, v); }, \
            [](const ExperimentConfig& c) { return format_double(c.field); }                       \
    }
#define GP_BOOL(field)                                                                            \
    Key {                                                                                         \
        #field, [](ExperimentConfig& c, const std::string& v) { c.field = parse_bool(#field, v); }, \
            [](const ExperimentConfig& c) { return bool_str(c.field); }                            \
    }

const std::vector<Key>& keys() {
    static const std::vector<Key> table = {
        GP_STRING(experiment_id),
        GP_STRING(model),
        GP_STRING(dataset),
        GP_STRING(data_dir),
        GP_INT(synthetic_per_class, Index),
        GP_REAL(synthetic_noise),
        GP_INT(data_seed, std::uint64_t),
        GP_INT(seed, std::uint64_t),
        GP_INT(epochs, int),
        GP_INT(batch_size, Index),
        GP_INT(stretch, int),
        GP_REAL(p),
        Key{"structure", [](ExperimentConfig& c, const std::string& v) { c.structure = nn::parse_structure(v); },
            [](const ExperimentConfig& c) { return nn::to_string(c.structure); }},
        GP_STRING(hamiltonian),
        GP_REAL(c),
        GP_INT(rebuild_every, int),
        Key{"beta_start", [](ExperimentConfig& c, const std::string& v) { c.beta.beta_start = parse_real("beta_start", v); },
            [](const ExperimentConfig& c) { return format_double(c.beta.beta_start); }},
        Key{"beta_end",
            [](ExperimentConfig& c, const std::string& v) {
                c.beta.beta_end = parse_real("beta_end", v);
                c.beta_end_set = true;
            },
            [](const ExperimentConfig& c) { return format_double(c.beta.beta_end); }},
        GP_REAL(beta_end_stretched),
        Key{"anneal_epochs", [](ExperimentConfig& c, const std::string& v) { c.beta.anneal_epochs = parse_number<int>("anneal_epochs", v); },
            [](const ExperimentConfig& c) { return std::to_string(c.beta.anneal_epochs); }},
        Key{"beta_mode", [](ExperimentConfig& c, const std::string& v) { c.beta.mode = parse_anneal(v); },
            [](const ExperimentConfig& c) { return std::string(c.beta.mode == AnnealMode::Log ? "log" : "linear"); }},
        Key{"lr", [](ExperimentConfig& c, const std::string& v) { c.lr.initial_lr = parse_real("lr", v); },
            [](const ExperimentConfig& c) { return format_double(c.lr.initial_lr); }},
        Key{"lr_drop_epoch", [](ExperimentConfig& c, const std::string& v) { c.lr.drop_epoch = parse_number<int>("lr_drop_epoch", v); },
            [](const ExperimentConfig& c) { return std::to_string(c.lr.drop_epoch); }},
        Key{"lr_drop_interval",
            [](ExperimentConfig& c, const std::string& v) { c.lr.drop_interval = parse_number<int>("lr_drop_interval", v); },
            [](const ExperimentConfig& c) { return std::to_string(c.lr.drop_interval); }},
        Key{"lr_drop_factor", [](ExperimentConfig& c, const std::string& v) { c.lr.drop_factor = parse_real("lr_drop_factor", v); },
            [](const ExperimentConfig& c) { return format_double(c.lr.drop_factor); }},
        GP_STRING(baseline),
        GP_INT(finetune_epochs, int),
        GP_REAL(finetune_lr),
        GP_REAL(l1_penalty),
        Key{"mcmc_iters", [](ExperimentConfig& c, const std::string& v) { c.sampler.mcmc_iters = parse_number<int>("mcmc_iters", v); },
            [](const ExperimentConfig& c) { return std::to_string(c.sampler.mcmc_iters); }},
        Key{"max_block", [](ExperimentConfig& c, const std::string& v) { c.sampler.max_block = parse_number<Index>("max_block", v); },
            [](const ExperimentConfig& c) { return std::to_string(c.sampler.max_block); }},
        GP_BOOL(augment),
        GP_BOOL(skip_1x1),
        GP_INT(threads, int),
        GP_BOOL(record_wall_time),
        GP_STRING(output_dir),
        GP_STRING(mask_file),
        GP_STRING(checkpoint),
        GP_INT(demo_points, int),
        GP_INT(demo_draws, int),
    };
    return table;
}

#undef GP_STRING
#undef GP_INT
#undef GP_REAL
#undef GP_BOOL

void set_layer_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    const std::string rest = key.substr(6);
    const auto dot = rest.rfind('.');
    if (dot == std::string::npos || dot == 0) throw std::invalid_argument("malformed layer override '" + key + "'");
    const std::string layer = rest.substr(0, dot), field = rest.substr(dot + 1);
    LayerOverride& o = cfg.layers[layer];
    if (field == "prune") {
        o.prune = parse_bool(key, value);
    } else if (field == "p") {
        o.p = parse_real(key, value);
    } else if (field == "structure") {
        o.structure = nn::parse_structure(value);
    } else if (field == "hamiltonian") {
        o.hamiltonian = value;
    } else if (field == "c") {
        o.c = parse_real(key, value);
    } else if (field == "rebuild_every") {
        o.rebuild_every = parse_number<int>(key, value);
    } else {
        throw std::invalid_argument("unknown layer key '" + field + "' in '" + key + "'");
    }
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::string layer_label(const std::string& param_name) {
    const std::string suffix = ".weight";
    if (param_name.size() > suffix.size() && param_name.ends_with(suffix)) return param_name.substr(0, param_name.size() - suffix.size());
    return param_name;
}

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    if (key.starts_with("layer.")) {
        set_layer_value(cfg, key, value);
        return;
    }
    for (const Key& k : keys()) {
        if (k.name == key) {
            k.set(cfg, value);
            return;
        }
    }
    throw std::invalid_argument("unknown config key '" + key + "'");
}

ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::set<std::string> seen;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("line " + std::to_string(lineno) + ": expected key=value");
        const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        if (key.empty()) throw std::invalid_argument("line " + std::to_string(lineno) + ": empty key");
        if (!seen.insert(key).second) throw std::invalid_argument("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        try {
            set_config_value(cfg, key, value);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string format_config(const ExperimentConfig& cfg) {
    std::string out;
    for (const Key& k : keys()) {
        if (k.name == "beta_end" && !cfg.beta_end_set) continue;
        out += k.name + "=" + k.get(cfg) + "\n";
    }
    for (const auto& [layer, o] : cfg.layers) {
        const std::string pre = "layer." + layer + ".";
        if (o.prune) out += pre + "prune=" + bool_str(*o.prune) + "\n";
        if (o.p) out += pre + "p=" + format_double(*o.p) + "\n";
        if (o.structure) out += pre + "structure=" + nn::to_string(*o.structure) + "\n";
        if (o.hamiltonian) out += pre + "hamiltonian=" + *o.hamiltonian + "\n";
        if (o.c) out += pre + "c=" + format_double(*o.c) + "\n";
        if (o.rebuild_every) out += pre + "rebuild_every=" + std::to_string(*o.rebuild_every) + "\n";
    }
    return out;
}

Variant resolve_variant(const std::string& name, nn::Structure structure) {
    Variant v = parse_variant(name);
    if (structure != nn::Structure::Unstructured && v == Variant::BinaryUnstructured) v = Variant::BinaryStructured;
    return v;
}

void ExperimentConfig::validate() const {
    static const std::set<std::string> models{"toy-mlp", "toy-cnn", "small-resnet"};
    static const std::set<std::string> baselines{"none", "random-mask", "reinit-retrain", "oneshot-magnitude", "l1-reg"};
    if (!models.contains(model)) throw std::invalid_argument("model: unknown '" + model + "'");
    if (!baselines.contains(baseline)) throw std::invalid_argument("baseline: unknown '" + baseline + "'");
    if (dataset != "synthetic" && dataset != "cifar10" && !dataset.starts_with("cifar10:")) {
        throw std::invalid_argument("dataset: expected synthetic, cifar10 or cifar10:<n>, got '" + dataset + "'");
    }
    if (dataset.starts_with("cifar10:")) parse_number<Index>("dataset", dataset.substr(8));
    if (synthetic_per_class < 1) throw std::invalid_argument("synthetic_per_class must be at least 1");
    if (!(synthetic_noise >= 0)) throw std::invalid_argument("synthetic_noise must be non-negative");
    if (epochs < 0) throw std::invalid_argument("epochs must be non-negative");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be positive");
    if (stretch < 1) throw std::invalid_argument("stretch must be at least 1");
    if (finetune_epochs < 0) throw std::invalid_argument("finetune_epochs must be non-negative");
    if (!(finetune_lr > 0)) throw std::invalid_argument("finetune_lr must be positive");
    if (!(l1_penalty >= 0)) throw std::invalid_argument("l1_penalty must be non-negative");
    if (threads < 0) throw std::invalid_argument("threads must be non-negative");
    if (demo_points < 1 || demo_draws < 1) throw std::invalid_argument("demo_points and demo_draws must be positive");
    if (sampler.mcmc_iters < 0 || sampler.max_block < 1) throw std::invalid_argument("bad sampler settings");
    if (baseline == "reinit-retrain" && mask_file.empty()) throw std::invalid_argument("reinit-retrain needs mask_file");
    effective_beta().validate();
    effective_lr().validate();
    nn::PruneConfig{.p = p, .structure = structure, .variant = resolve_variant(hamiltonian, structure), .c = c,
                    .rebuild_every = rebuild_every}
        .validate();
    for (const auto& [layer, o] : layers) {
        const nn::Structure s = o.structure.value_or(structure);
        nn::PruneConfig{.p = o.p.value_or(p), .structure = s, .variant = resolve_variant(o.hamiltonian.value_or(hamiltonian), s),
                        .c = o.c.value_or(c), .rebuild_every = o.rebuild_every.value_or(rebuild_every)}
            .validate();
    }
}

BetaSchedule ExperimentConfig::effective_beta() const {
    BetaSchedule b = beta;
    if (stretch > 1 && !beta_end_set) b.beta_end = beta_end_stretched;
    return stretched(b, stretch);
}

LrSchedule ExperimentConfig::effective_lr() const { return stretched(lr, stretch); }

std::vector<nn::LayerPrune> resolve_prunes(const ExperimentConfig& cfg, nn::Network& net) {
    const std::vector<std::string> defaults = nn::default_pruned_params(net, cfg.skip_1x1);
    std::set<std::string> known;
    for (nn::Param* prm : net.prunable_params()) known.insert(layer_label(prm->name));
    for (const auto& [layer, o] : cfg.layers) {
        if (!known.contains(layer)) throw std::invalid_argument("layer override for unknown layer '" + layer + "'");
    }
    std::vector<nn::LayerPrune> out;
    for (nn::Param* prm : net.prunable_params()) {
        const std::string label = layer_label(prm->name);
        const auto it = cfg.layers.find(label);
        const LayerOverride o = it == cfg.layers.end() ? LayerOverride{} : it->second;
        const bool by_default = std::find(defaults.begin(), defaults.end(), prm->name) != defaults.end();
        if (!o.prune.value_or(by_default)) continue;
        nn::PruneConfig pc;
        pc.p = o.p.value_or(cfg.p);
        pc.structure = o.structure.value_or(cfg.structure);
        pc.variant = resolve_variant(o.hamiltonian.value_or(cfg.hamiltonian), pc.structure);
        pc.c = o.c.value_or(cfg.c);
        pc.rebuild_every = o.rebuild_every.value_or(cfg.rebuild_every);
        out.push_back({prm->name, pc});
    }
    return out;
}

}  // namespace gibbs::exp

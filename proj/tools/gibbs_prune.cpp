#include <CLI11.hpp>

#include <gibbs/experiment/runner.hpp>
#include <gibbs/nn/checkpoint.hpp>
#include <gibbs/nn/models.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <future>
#include <iostream>
#include <mutex>
#include <optional>

using namespace gibbs;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::optional<int> stretch;
    std::optional<int> threads;
    std::vector<std::string> sets;

    void attach(CLI::App* app) {
        app->add_option("--config", config, "key=value config file")->check(CLI::ExistingFile);
        app->add_option("--seed", seed, "override the seed");
        app->add_option("--out-dir", out_dir, "output directory");
        app->add_option("--stretch", stretch, "stretch factor for the epoch count and schedules")->check(CLI::PositiveNumber);
        app->add_option("--threads", threads, "OpenMP threads per run (0 = default)");
        app->add_option("--set", sets, "extra key=value overrides");
    }

    exp::ExperimentConfig load() const {
        exp::ExperimentConfig cfg = config.empty() ? exp::ExperimentConfig{} : exp::load_config(config);
        for (const std::string& kv : sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
            exp::set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (seed) cfg.seed = *seed;
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        if (stretch) cfg.stretch = *stretch;
        if (threads) cfg.threads = *threads;
        cfg.validate();
        return cfg;
    }
};

// "0-4" or "1,5,9"
std::vector<std::uint64_t> parse_seeds(const std::string& spec) {
    std::vector<std::uint64_t> out;
    std::size_t pos = 0;
    while (pos <= spec.size()) {
        const auto comma = std::min(spec.find(',', pos), spec.size());
        const std::string part = spec.substr(pos, comma - pos);
        const auto dash = part.find('-');
        if (dash == std::string::npos) {
            out.push_back(std::stoull(part));
        } else {
            const auto lo = std::stoull(part.substr(0, dash)), hi = std::stoull(part.substr(dash + 1));
            if (hi < lo) throw std::invalid_argument("bad seed range " + part);
            for (auto s = lo; s <= hi; ++s) out.push_back(s);
        }
        pos = comma + 1;
    }
    return out;
}

std::mutex g_print;

int cmd_run(const Common& common, const std::string& seeds, int jobs) {
    const exp::ExperimentConfig base = common.load();
    std::vector<exp::ExperimentConfig> cfgs;
    if (seeds.empty()) {
        cfgs.push_back(base);
    } else {
        for (std::uint64_t s : parse_seeds(seeds)) {
            exp::ExperimentConfig c = base;
            c.seed = s;
            c.output_dir = (std::filesystem::path(base.output_dir) / ("seed" + std::to_string(s))).string();
            cfgs.push_back(c);
        }
    }
    auto one = [](const exp::ExperimentConfig& c) {
        const exp::RunResult r = exp::run_experiment(c);
        std::lock_guard lock(g_print);
        std::cout << c.experiment_id << " seed " << c.seed << ": final accuracy " << r.final_accuracy << ", history "
                  << r.csv_path.string() << "\n";
    };
    jobs = std::max(1, jobs);
    for (std::size_t start = 0; start < cfgs.size(); start += static_cast<std::size_t>(jobs)) {
        std::vector<std::future<void>> running;
        for (std::size_t i = start; i < std::min(cfgs.size(), start + static_cast<std::size_t>(jobs)); ++i) {
            running.push_back(std::async(std::launch::async, one, cfgs[i]));
        }
        for (auto& f : running) f.get();
    }
    return 0;
}

int cmd_demo(const Common& common) {
    const exp::ExperimentConfig cfg = common.load();
    const std::string text = exp::format_demo(exp::sample_demo(cfg));
    std::filesystem::create_directories(cfg.output_dir);
    const auto path = std::filesystem::path(cfg.output_dir) / "sample_demo.csv";
    std::ofstream(path, std::ios::binary | std::ios::trunc) << text;
    std::cout << text;
    return 0;
}

int cmd_export(const Common& common, const std::string& checkpoint, const std::string& out) {
    const exp::ExperimentConfig cfg = common.load();
    auto [train, test] = exp::load_dataset(cfg);
    nn::Network net = nn::build_model(cfg.model, train.image_shape(), train.classes);
    nn::load_checkpoint(net, checkpoint);
    std::vector<exp::NamedMask> masks;
    for (nn::PrunedLayer& l : nn::resolve_pruned_layers(net, exp::resolve_prunes(cfg, net))) {
        masks.push_back({exp::layer_label(l.param->name), l.param->mask ? *l.param->mask : l.converged()});
    }
    exp::export_mask(masks, out);
    std::cout << "wrote " << masks.size() << " layer masks to " << out << "\n";
    return 0;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out) {
    std::vector<std::filesystem::path> files;
    for (const std::string& in : inputs) {
        if (std::filesystem::is_directory(in)) {
            for (const auto& e : std::filesystem::recursive_directory_iterator(in)) {
                if (e.is_regular_file() && e.path().filename() == "history.csv") files.push_back(e.path());
            }
        } else {
            files.emplace_back(in);
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error("no history.csv files found");
    const std::string text = exp::format_summary(exp::summarize(files));
    if (!out.empty()) std::ofstream(out, std::ios::binary | std::ios::trunc) << text;
    std::cout << text;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gibbs-distribution pruning experiments"};
    app.require_subcommand(1);

    Common run_opts, demo_opts, export_opts;
    std::string seeds;
    int jobs = 1;
    auto* run = app.add_subcommand("run", "train with Gibbs pruning or a baseline");
    run_opts.attach(run);
    run->add_option("--seeds", seeds, "seed list or range, e.g. 0-4; each run writes to <out-dir>/seed<k>");
    run->add_option("--jobs", jobs, "concurrent runs for a seed sweep")->check(CLI::PositiveNumber);

    auto* demo = app.add_subcommand("sample-demo", "mask convergence diagnostics across the beta schedule");
    demo_opts.attach(demo);

    std::string checkpoint, mask_out = "masks.txt";
    auto* exp_cmd = app.add_subcommand("export-mask", "write the masks of a checkpoint");
    export_opts.attach(exp_cmd);
    exp_cmd->add_option("--checkpoint", checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
    exp_cmd->add_option("--out", mask_out, "mask file to write");

    std::vector<std::string> inputs;
    std::string summary_out;
    auto* report = app.add_subcommand("report", "aggregate history CSVs into a summary table");
    report->add_option("inputs", inputs, "history.csv files or directories")->required();
    report->add_option("--out", summary_out, "summary CSV to write");

    CLI11_PARSE(app, argc, argv);
    try {
        if (run->parsed()) return cmd_run(run_opts, seeds, jobs);
        if (demo->parsed()) return cmd_demo(demo_opts);
        if (exp_cmd->parsed()) return cmd_export(export_opts, checkpoint, mask_out);
        if (report->parsed()) return cmd_report(inputs, summary_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

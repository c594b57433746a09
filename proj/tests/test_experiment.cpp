#include <doctest.h>

#include "oracles.hpp"

#include <gibbs/experiment/runner.hpp>
#include <gibbs/nn/checkpoint.hpp>
#include <gibbs/nn/models.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

using namespace gibbs;
using namespace gibbs::exp;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
    const auto p = std::filesystem::temp_directory_path() / ("gibbs_exp_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ExperimentConfig tiny(const std::string& out) {
    ExperimentConfig c = parse_config(
        "synthetic_per_class=10\n"
        "epochs=3\n"
        "batch_size=16\n"
        "anneal_epochs=2\n"
        "lr=0.003\n"
        "record_wall_time=false\n");
    c.output_dir = out;
    return c;
}

std::vector<double> column(const Report& r, double ReportRow::*field) {
    std::vector<double> out;
    for (const auto& row : r.rows) out.push_back(row.*field);
    return out;
}

}  // namespace

TEST_CASE("parse_config") {
    const ExperimentConfig c = parse_config("p=0.9\nstructure=unstructured\nhamiltonian=linear-square\n");
    CHECK(c.p == 0.9);
    CHECK(c.structure == nn::Structure::Unstructured);

    const ExperimentConfig d = parse_config("");
    CHECK(d.model == "toy-cnn");
    CHECK(d.dataset == "synthetic");
    CHECK(d.epochs == 200);
    CHECK(d.stretch == 1);
    CHECK(d.p == 0.9);
    CHECK(d.hamiltonian == "linear-square");
    CHECK(d.c == 0.01);
    CHECK(d.beta.beta_start == 0.7);
    CHECK(d.beta.beta_end == 1e4);
    CHECK(d.beta.anneal_epochs == 128);
    CHECK(d.lr.initial_lr == 1e-3);
    CHECK(d.lr.drop_epoch == 80);
    CHECK(d.lr.drop_interval == 40);
    CHECK(d.finetune_epochs == 0);
    CHECK(d.finetune_lr == 1e-5);
    CHECK(d.l1_penalty == 0.001);
    CHECK(d.baseline == "none");

    CHECK_THROWS_WITH_AS(parse_config("p=1.5"), doctest::Contains("p must lie in [0, 1]"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_config("colour=red"), doctest::Contains("unknown config key"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_config("epochs"), doctest::Contains("line 1"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("epochs=ten"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("epochs=1.5"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("augment=maybe"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("p=0.5\np=0.6"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("structure=kernel"), std::invalid_argument);  // linear-square is unstructured
    CHECK_THROWS_AS(parse_config("model=vgg"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("stretch=0"), std::invalid_argument);
    CHECK_THROWS_AS(parse_config("layer.conv2.colour=1"), std::invalid_argument);

    const ExperimentConfig e = parse_config(
        "# comment\n"
        "  seed = 7   # trailing comment\n"
        "structure=kernel\n"
        "hamiltonian=binary\n"
        "layer.conv3.prune=false\n");
    CHECK(e.seed == 7);
    CHECK(resolve_variant(e.hamiltonian, e.structure) == Variant::BinaryStructured);
    CHECK(e.layers.at("conv3").prune == false);
}

TEST_CASE("format_config round trip") {
    ExperimentConfig c = parse_config("seed=3\np=0.55\nbeta_mode=linear\nlayer.conv3.p=0.25\nlayer.conv3.c=0.5\n");
    const std::string text = format_config(c);
    CHECK(format_config(parse_config(text)) == text);
    CHECK(text.find("beta_end=") == std::string::npos);
}

TEST_CASE("stretching escalates the schedule") {
    const ExperimentConfig c = parse_config("stretch=4");
    CHECK(c.effective_epochs() == 800);
    CHECK(c.effective_beta().beta_end == 1e6);
    CHECK(beta_at(c.effective_beta(), 512) == 1e6);
    CHECK(lr_at(c.effective_lr(), 319) == 1e-3);
    CHECK(lr_at(c.effective_lr(), 320) == doctest::Approx(1e-4));
    CHECK(parse_config("stretch=4\nbeta_end=5e4").effective_beta().beta_end == 5e4);
    CHECK(parse_config("stretch=1").effective_beta().beta_end == 1e4);
}

TEST_CASE("layer policy and overrides") {
    nn::Network net = nn::build_model("toy-cnn", {8, 8, 1}, 4);
    auto prunes = resolve_prunes(parse_config(""), net);
    REQUIRE(prunes.size() == 2);
    CHECK(prunes[0].param == "conv2.weight");
    prunes = resolve_prunes(parse_config("layer.conv3.prune=false\nlayer.conv2.p=0.5\nlayer.conv1.prune=true"), net);
    REQUIRE(prunes.size() == 2);
    CHECK(prunes[0].param == "conv1.weight");
    CHECK(prunes[1].cfg.p == 0.5);
    CHECK_THROWS(resolve_prunes(parse_config("layer.conv9.p=0.5"), net));
    const auto mixed = resolve_prunes(parse_config("layer.conv3.structure=filter\nlayer.conv3.hamiltonian=quadratic"), net);
    CHECK(mixed[1].cfg.variant == Variant::StructuredQuadratic);
    CHECK(mixed[0].cfg.variant == Variant::LinearSquare);
}

TEST_CASE("mask file round trip and errors") {
    std::vector<NamedMask> masks{{"conv2", oracle::mask_from_bits(0b1011001, 7)}, {"conv3", all_kept(3)}, {"empty", PruneMask(0)}};
    const std::string text = format_masks(masks);
    CHECK(text.starts_with("GIBBS-MASK 1\nlayer conv2 7\n"));
    CHECK(parse_masks(text) == masks);
    CHECK(format_masks({}) == "GIBBS-MASK 1\n");
    CHECK(parse_masks("GIBBS-MASK 1\n").empty());
    CHECK_THROWS_WITH(parse_masks("GIBBS-MASK 1\nlayer a 3\n1 2 -1\n"), doctest::Contains("token '2'"));
    CHECK_THROWS_WITH(parse_masks("GIBBS-MASK 2\n"), doctest::Contains("version"));
    CHECK_THROWS(parse_masks("layer a 1\n1\n"));
    CHECK_THROWS_WITH(parse_masks("GIBBS-MASK 1\nlayer a 3\n1 -1\n"), doctest::Contains("expected 3"));
    CHECK_THROWS(parse_masks("GIBBS-MASK 1\nlayer a 1\n1 1\n"));
    CHECK_THROWS(parse_masks("GIBBS-MASK 1\nlayer a x\n"));

    const auto dir = temp_dir("masks");
    export_mask(masks, dir / "m.txt");
    CHECK(import_mask(dir / "m.txt") == masks);
    CHECK_THROWS(import_mask(dir / "missing.txt"));
}

TEST_CASE("random masks") {
    nn::Network net = nn::build_model("toy-cnn", {8, 8, 1}, 4);
    RandomSource init(1);
    net.init(init);
    auto layers = nn::resolve_pruned_layers(net, resolve_prunes(parse_config("p=0.9"), net));
    RandomSource rng(2);
    set_warning_sink([](const std::string&) {});
    for (const auto& l : layers) {
        const PruneMask x = random_mask(l, rng);
        CHECK((x.array() == -1).count() == std::llround(0.9 * static_cast<double>(l.param->size())));
        CHECK(x != random_mask(l, rng));
    }
    auto structured = nn::resolve_pruned_layers(net, resolve_prunes(parse_config("p=0.5\nstructure=kernel\nhamiltonian=structured-linear"), net));
    for (const auto& l : structured) {
        const PruneMask x = random_mask(l, rng);
        CHECK(is_neighbourhood_uniform(x, *l.partition));
        CHECK(pruned_fraction(x) == 0.5);
    }
    reset_warning_sink();
}

TEST_CASE("CSV writing and parsing") {
    CHECK(csv_field("plain") == "plain");
    CHECK(csv_field("a,b") == "\"a,b\"");
    CHECK(csv_field("say \"hi\"") == "\"say \"\"hi\"\"\"");
    const auto rows = parse_csv("a,\"b,c\",\"d\"\"e\"\r\n1,,3\n\"multi\nline\",x,y\r\n");
    REQUIRE(rows.size() == 3);
    CHECK(rows[0] == std::vector<std::string>{"a", "b,c", "d\"e"});
    CHECK(rows[1] == std::vector<std::string>{"1", "", "3"});
    CHECK(rows[2][0] == "multi\nline");
    CHECK(report_columns({"conv2"}) == std::vector<std::string>{"experiment_id", "seed", "epoch", "phase", "train_loss",
                                                                  "val_accuracy", "beta", "lr", "pruned_fraction.conv2",
                                                                  "agreement.conv2", "wall_time_s"});
    Report bad{{"x"}, {ReportRow{.pruned_fraction = {0.5}, .agreement = {std::nan("")}}}};
    CHECK_THROWS(format_report(bad));
}

TEST_CASE("run_experiment writes reproducible artifacts") {
    const auto dir = temp_dir("run");
    ExperimentConfig c = tiny((dir / "a").string());
    c.experiment_id = "id,with comma";
    const RunResult a = run_experiment(c);
    c.output_dir = (dir / "b").string();
    c.threads = 3;
    const RunResult b = run_experiment(c);
    for (const char* f : {"history.csv", "masks.txt", "checkpoint.bin"}) {
        CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
    }
    const auto rows = parse_csv(slurp(a.csv_path));
    REQUIRE(rows.size() == 1 + 3 + 1);
    CHECK(rows[1][0] == "id,with comma");
    CHECK(rows[0] == report_columns({"conv2", "conv3"}));
    CHECK(rows.back()[3] == "final");
    CHECK(rows[2][2] == "1");
    CHECK(import_mask(a.mask_path) == a.masks);
    CHECK(a.masks[0].name == "conv2");
    CHECK(a.final_accuracy == b.final_accuracy);

    const std::vector<SummaryRow> s = summarize({a.csv_path, b.csv_path});
    REQUIRE(s.size() == 1);
    CHECK(s[0].runs == 2);
    CHECK(s[0].std_accuracy == 0.0);
    CHECK(s[0].mean_accuracy == a.final_accuracy);
    CHECK(s[0].mean_pruned_fraction == doctest::Approx(0.9).epsilon(1e-3));
    CHECK(format_summary(s).starts_with("experiment_id,phase,runs,"));
}

TEST_CASE("gibbs run with fine-tuning") {
    ExperimentConfig c = tiny(temp_dir("finetune").string());
    c.finetune_epochs = 2;
    const RunResult r = run_experiment(c, false);
    REQUIRE(r.report.rows.size() == 3 + 2 + 1);
    CHECK(r.report.rows[3].phase == "finetune");
    CHECK(r.report.rows[3].epoch == 3);
    CHECK(r.report.rows[3].lr == 1e-5);
    CHECK(r.report.rows[3].pruned_fraction == r.report.rows.back().pruned_fraction);
    CHECK(r.report.rows.back().epoch == 5);
}

TEST_CASE("baselines") {
    const auto dir = temp_dir("baselines");
    set_warning_sink([](const std::string&) {});

    SUBCASE("random mask holds a fixed mask at the configured sparsity") {
        const RunResult r = baseline_random_mask(tiny((dir / "rm").string()), false);
        for (const auto& row : r.report.rows) {
            CHECK(row.pruned_fraction[0] == doctest::Approx(0.9).epsilon(1e-3));
            CHECK(row.beta == 0);
        }
        CHECK(r.masks[0].mask.size() == 1152);
    }

    SUBCASE("reinit-retrain with an all-kept mask is plain training") {
        ExperimentConfig c = tiny((dir / "re").string());
        export_mask({{"conv2", all_kept(1152)}, {"conv3", all_kept(2304)}}, dir / "kept.txt");
        const RunResult re = baseline_reinit_retrain(c, (dir / "kept.txt").string(), false);
        c.p = 0;
        const RunResult plain = run_experiment(c, false);
        CHECK(column(re.report, &ReportRow::train_loss) == column(plain.report, &ReportRow::train_loss));
        CHECK(column(re.report, &ReportRow::val_accuracy) == column(plain.report, &ReportRow::val_accuracy));

        export_mask({{"conv2", all_kept(1000)}}, dir / "bad.txt");
        CHECK_THROWS_WITH(baseline_reinit_retrain(c, (dir / "bad.txt").string(), false), doctest::Contains("1000"));
        export_mask({{"conv7", all_kept(3)}}, dir / "unknown.txt");
        CHECK_THROWS(baseline_reinit_retrain(c, (dir / "unknown.txt").string(), false));
        const RunResult gibbs = run_experiment(tiny((dir / "g").string()));
        const RunResult again = baseline_reinit_retrain(c, gibbs.mask_path.string(), false);
        CHECK(again.masks == gibbs.masks);
    }

    SUBCASE("one-shot magnitude") {
        ExperimentConfig c = tiny((dir / "os").string());
        const RunResult r = baseline_oneshot_magnitude(c, false);
        REQUIRE(r.report.rows.size() == 4);
        CHECK(r.report.rows[0].pruned_fraction[0] == 0.0);
        CHECK(r.report.rows.back().pruned_fraction[0] == doctest::Approx(0.9).epsilon(1e-3));
        CHECK(r.report.rows.back().agreement[0] == 1.0);
        c.p = 0;
        const RunResult dense = baseline_oneshot_magnitude(c, false);
        CHECK(dense.final_accuracy == dense.report.rows[2].val_accuracy);
    }

    SUBCASE("l1 with zero penalty is the one-shot baseline") {
        ExperimentConfig c = tiny((dir / "l1").string());
        c.l1_penalty = 0;
        const RunResult l1 = baseline_l1_reg(c, false);
        const RunResult os = baseline_oneshot_magnitude(c, false);
        CHECK(column(l1.report, &ReportRow::train_loss) == column(os.report, &ReportRow::train_loss));
        CHECK(l1.masks == os.masks);
    }

    SUBCASE("l1 penalty gives smaller weights") {
        auto median_abs = [&](const std::string& out, double penalty) {
            ExperimentConfig c = tiny((dir / out).string());
            c.epochs = 6;
            c.l1_penalty = penalty;
            const RunResult r = baseline_l1_reg(c);
            nn::Network net = nn::build_model("toy-cnn", {8, 8, 1}, 4);
            nn::load_checkpoint(net, r.checkpoint_path);
            std::vector<double> w;
            for (const char* name : {"conv2.weight", "conv3.weight"}) {
                for (double v : net.param(name).value) w.push_back(std::abs(v));
            }
            std::nth_element(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(w.size() / 2), w.end());
            return w[w.size() / 2];
        };
        CHECK(median_abs("l1a", 0.001) < median_abs("l1b", 0.0));
    }
    reset_warning_sink();
}

TEST_CASE("sample_demo") {
    const auto dir = temp_dir("demo");
    nn::Network net = nn::build_model("toy-cnn", {8, 8, 1}, 4);
    RandomSource init(9);
    net.init(init);
    nn::save_checkpoint(net, dir / "w.bin");

    ExperimentConfig c = parse_config("demo_points=6\ndemo_draws=20\n");
    c.checkpoint = (dir / "w.bin").string();
    c.output_dir = dir.string();
    set_warning_sink([](const std::string&) {});
    const std::vector<DemoRow> rows = sample_demo(c);
    REQUIRE(rows.size() == 6);
    CHECK(rows.front().beta == 0.7);
    CHECK(rows.back().beta == 1e4);
    CHECK(rows.back().epoch == 128);

    // product-distribution expectation of the agreement
    auto expected = [&](double beta) {
        double sum = 0;
        Index n = 0;
        for (const char* name : {"conv2.weight", "conv3.weight"}) {
            const Eigen::VectorXd& w = net.param(name).value;
            const double q = oracle::sort_quantile(0.9, w);
            for (Index i = 0; i < w.size(); ++i) sum += 1.0 / (1.0 + std::exp(-2 * beta * std::abs(q - w[i] * w[i])));
            n += w.size();
        }
        return sum / static_cast<double>(n);
    };
    CHECK(rows.front().agreement == doctest::Approx(expected(0.7)).epsilon(0.01));
    CHECK(rows.front().agreement > 0.5);
    CHECK(rows.back().agreement == doctest::Approx(expected(1e4)).epsilon(1e-3));
    CHECK(rows.back().agreement > 0.999);
    CHECK(rows.back().pruned_fraction == doctest::Approx(0.9).epsilon(1e-3));

    // mean agreement across 20 seeds is non-decreasing along the sweep
    std::vector<double> mean(6, 0.0);
    ExperimentConfig s = parse_config("demo_points=6\n");
    s.output_dir = dir.string();
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        s.seed = seed;
        const auto r = sample_demo(s);
        for (std::size_t j = 0; j < 6; ++j) mean[j] += r[j].agreement / 20;
    }
    for (std::size_t j = 1; j < 6; ++j) CHECK(mean[j] >= mean[j - 1]);
    CHECK(format_demo(rows).starts_with("point,epoch,beta,agreement,pruned_fraction\r\n"));

    // squared magnitudes 0.01 apart keep every |Q - w_i^2| >= 1e-3, so beta = 1e4 converges.
    // p = 0.5 puts the quantile midway between two ranks, so the sign of Q - w^2 prunes round(pN) weights.
    for (const char* name : {"conv2.weight", "conv3.weight"}) {
        Eigen::VectorXd& w = net.param(name).value;
        RandomSource perm(11);
        std::vector<Index> order(static_cast<std::size_t>(w.size()));
        std::iota(order.begin(), order.end(), Index{0});
        std::shuffle(order.begin(), order.end(), perm);
        for (Index i = 0; i < w.size(); ++i) w[order[static_cast<std::size_t>(i)]] = (i % 2 ? -1 : 1) * std::sqrt(0.01 * (i + 1));
    }
    nn::save_checkpoint(net, dir / "separated.bin");
    c.checkpoint = (dir / "separated.bin").string();
    c.p = 0.5;
    CHECK(sample_demo(c).back().agreement == 1.0);
    reset_warning_sink();
}

TEST_CASE("missing CIFAR-10 data is reported") {
    ExperimentConfig c = parse_config("dataset=cifar10:100\n");
    c.data_dir = (std::filesystem::temp_directory_path() / "gibbs_no_such_dir").string();
    CHECK_THROWS_WITH(load_dataset(c), doctest::Contains("missing"));
}

#include "gibbs/experiment/report.hpp"

#include "gibbs/experiment/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace gibbs::exp {

std::vector<std::string> report_columns(const std::vector<std::string>& layers) {
    std::vector<std::string> cols{"experiment_id", "seed", "epoch", "phase", "train_loss", "val_accuracy", "beta", "lr"};
    for (const auto& l : layers) cols.push_back("pruned_fraction." + l);
    for (const auto& l : layers) cols.push_back("agreement." + l);
    cols.push_back("wall_time_s");
    return cols;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

namespace {

std::string number(double v, const char* what) {
    if (!std::isfinite(v)) throw std::runtime_error(std::string("non-finite value in report column ") + what);
    return format_double(v);
}

std::string join(const std::vector<std::string>& fields) {
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) line += ',';
        line += csv_field(fields[i]);
    }
    return line + "\r\n";
}

}  // namespace

std::string format_report(const Report& report) {
    std::string out = join(report_columns(report.layers));
    for (const ReportRow& r : report.rows) {
        if (r.pruned_fraction.size() != report.layers.size() || r.agreement.size() != report.layers.size()) {
            throw std::invalid_argument("report row has the wrong number of layer columns");
        }
        std::vector<std::string> f{r.experiment_id,
                                   std::to_string(r.seed),
                                   std::to_string(r.epoch),
                                   r.phase,
                                   number(r.train_loss, "train_loss"),
                                   number(r.val_accuracy, "val_accuracy"),
                                   number(r.beta, "beta"),
                                   number(r.lr, "lr")};
        for (double v : r.pruned_fraction) f.push_back(number(v, "pruned_fraction"));
        for (double v : r.agreement) f.push_back(number(v, "agreement"));
        f.push_back(number(r.wall_time_s, "wall_time_s"));
        out += join(f);
    }
    return out;
}

void write_report(const Report& report, const std::filesystem::path& path) {
    const std::string text = format_report(report);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os || !(os << text)) throw std::runtime_error("cannot write " + path.string());
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false, any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char ch = text[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += ch;
            }
            continue;
        }
        if (ch == '"') {
            quoted = true;
            any = true;
        } else if (ch == ',') {
            row.push_back(std::move(field));
            field.clear();
            any = true;
        } else if (ch == '\n' || ch == '\r') {
            if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            if (any || !field.empty()) {
                row.push_back(std::move(field));
                rows.push_back(std::move(row));
            }
            row.clear();
            field.clear();
            any = false;
        } else {
            field += ch;
            any = true;
        }
    }
    if (quoted) throw std::runtime_error("unterminated quoted CSV field");
    if (any || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<SummaryRow> summarize(const std::vector<std::filesystem::path>& csv_files) {
    struct Acc {
        std::vector<double> acc;
        std::vector<double> pruned;
    };
    std::map<std::pair<std::string, std::string>, Acc> groups;
    for (const auto& path : csv_files) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open " + path.string());
        std::ostringstream ss;
        ss << in.rdbuf();
        const auto rows = parse_csv(ss.str());
        if (rows.size() < 2) throw std::runtime_error(path.string() + ": no data rows");
        const auto& head = rows.front();
        auto col = [&](const std::string& name) {
            const auto it = std::find(head.begin(), head.end(), name);
            if (it == head.end()) throw std::runtime_error(path.string() + ": missing column " + name);
            return static_cast<std::size_t>(it - head.begin());
        };
        const auto& last = rows.back();
        if (last.size() != head.size()) throw std::runtime_error(path.string() + ": ragged row");
        Acc& a = groups[{last[col("experiment_id")], last[col("phase")]}];
        a.acc.push_back(std::stod(last[col("val_accuracy")]));
        double pruned = 0;
        int layers = 0;
        for (std::size_t i = 0; i < head.size(); ++i) {
            if (head[i].starts_with("pruned_fraction.")) {
                pruned += std::stod(last[i]);
                ++layers;
            }
        }
        a.pruned.push_back(layers ? pruned / layers : 0.0);
    }
    std::vector<SummaryRow> out;
    for (const auto& [key, a] : groups) {
        SummaryRow s;
        s.experiment_id = key.first;
        s.phase = key.second;
        s.runs = static_cast<int>(a.acc.size());
        const Eigen::Map<const Eigen::VectorXd> acc(a.acc.data(), static_cast<Index>(a.acc.size()));
        s.mean_accuracy = acc.mean();
        s.std_accuracy = s.runs > 1 ? std::sqrt((acc.array() - s.mean_accuracy).square().sum() / (s.runs - 1)) : 0.0;
        s.min_accuracy = acc.minCoeff();
        s.max_accuracy = acc.maxCoeff();
        s.mean_pruned_fraction = Eigen::Map<const Eigen::VectorXd>(a.pruned.data(), static_cast<Index>(a.pruned.size())).mean();
        out.push_back(s);
    }
    return out;
}

std::string format_summary(const std::vector<SummaryRow>& rows) {
    std::string out = join({"experiment_id", "phase", "runs", "mean_accuracy", "std_accuracy", "min_accuracy", "max_accuracy",
                            "mean_pruned_fraction"});
    for (const SummaryRow& s : rows) {
        out += join({s.experiment_id, s.phase, std::to_string(s.runs), format_double(s.mean_accuracy),
                     format_double(s.std_accuracy), format_double(s.min_accuracy), format_double(s.max_accuracy),
                     format_double(s.mean_pruned_fraction)});
    }
    return out;
}

}  // namespace gibbs::exp

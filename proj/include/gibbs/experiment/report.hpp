#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace gibbs::exp {

struct ReportRow {
    std::string experiment_id;
    std::uint64_t seed = 0;
    int epoch = 0;
    std::string phase;
    double train_loss = 0;
    double val_accuracy = 0;
    double beta = 0;
    double lr = 0;
    std::vector<double> pruned_fraction;  // one per layer
    std::vector<double> agreement;        // one per layer
    double wall_time_s = 0;
};

struct Report {
    std::vector<std::string> layers;
    std::vector<ReportRow> rows;
};

std::vector<std::string> report_columns(const std::vector<std::string>& layers);
std::string csv_field(const std::string& s);
std::string format_report(const Report& report);
void write_report(const Report& report, const std::filesystem::path& path);

/// RFC-4180 records (quoted fields may contain commas, quotes and newlines).
std::vector<std::vector<std::string>> parse_csv(const std::string& text);

struct SummaryRow {
    std::string experiment_id;
    std::string phase;
    int runs = 0;
    double mean_accuracy = 0;
    double std_accuracy = 0;
    double min_accuracy = 0;
    double max_accuracy = 0;
    double mean_pruned_fraction = 0;
};

/// Groups the last row of every file by experiment id: mean, sample std, min and max accuracy.
std::vector<SummaryRow> summarize(const std::vector<std::filesystem::path>& csv_files);
std::string format_summary(const std::vector<SummaryRow>& rows);

}  // namespace gibbs::exp

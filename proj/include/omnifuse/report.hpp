#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace omnifuse {

struct ReportRow {
    std::string run_id;
    uint64_t seed = 0;
    std::string stage;
    std::string task;
    std::string encoder;
    std::string mode;
    std::string metric;
    double value = 0.0;
    int64_t n = 0;
    int64_t n_missing = 0;
};

// stable column order: run_id, seed, stage, task, encoder, mode, metric,
// value, n, n_missing
void write_rows_csv(const std::vector<ReportRow>& rows, const std::filesystem::path& path);
void write_rows_json(const std::vector<ReportRow>& rows, const std::filesystem::path& path);
std::vector<ReportRow> read_rows_json(const std::filesystem::path& path);

}  // namespace omnifuse

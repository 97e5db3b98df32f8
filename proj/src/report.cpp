#include "omnifuse/report.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace omnifuse {

using nlohmann::json;

namespace {

std::string format_value(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

void require_writable(const std::ofstream& os, const std::filesystem::path& path) {
    if (!os) throw std::runtime_error("report: cannot write " + path.string());
}

}  // namespace

void write_rows_csv(const std::vector<ReportRow>& rows, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::trunc);
    require_writable(os, path);
    os << "run_id,seed,stage,task,encoder,mode,metric,value,n,n_missing\n";
    for (const ReportRow& r : rows)
        os << r.run_id << ',' << r.seed << ',' << r.stage << ',' << r.task << ',' << r.encoder
           << ',' << r.mode << ',' << r.metric << ',' << format_value(r.value) << ',' << r.n
           << ',' << r.n_missing << '\n';
    os.flush();
    require_writable(os, path);
}

void write_rows_json(const std::vector<ReportRow>& rows, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    json arr = json::array();
    for (const ReportRow& r : rows)
        arr.push_back({{"run_id", r.run_id},
                       {"seed", r.seed},
                       {"stage", r.stage},
                       {"task", r.task},
                       {"encoder", r.encoder},
                       {"mode", r.mode},
                       {"metric", r.metric},
                       {"value", r.value},
                       {"n", r.n},
                       {"n_missing", r.n_missing}});
    std::ofstream os(path, std::ios::trunc);
    require_writable(os, path);
    os << arr.dump(2) << '\n';
    os.flush();
    require_writable(os, path);
}

std::vector<ReportRow> read_rows_json(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("report: cannot read " + path.string());
    json arr = json::parse(is);
    std::vector<ReportRow> rows;
    for (const json& j : arr) {
        ReportRow r;
        r.run_id = j.at("run_id").get<std::string>();
        r.seed = j.at("seed").get<uint64_t>();
        r.stage = j.at("stage").get<std::string>();
        r.task = j.at("task").get<std::string>();
        r.encoder = j.at("encoder").get<std::string>();
        r.mode = j.at("mode").get<std::string>();
        r.metric = j.at("metric").get<std::string>();
        r.value = j.at("value").get<double>();
        r.n = j.at("n").get<int64_t>();
        r.n_missing = j.at("n_missing").get<int64_t>();
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace omnifuse

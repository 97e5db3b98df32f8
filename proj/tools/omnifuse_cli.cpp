#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "omnifuse/pipeline.hpp"

using namespace omnifuse;

namespace {

struct CommonArgs {
    std::string config_file;
    std::vector<std::string> sets;
    std::string out_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("-c,--config", args.config_file, "experiment config file (key = value)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--set", args.sets, "override a config key, e.g. --set seed=7");
    cmd->add_option("-o,--out", args.out_dir, "run directory (overrides out_dir)");
}

ExperimentConfig build_config(const CommonArgs& args) {
    ExperimentConfig cfg = load_config(args.config_file, args.sets);
    if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
    return cfg;
}

void print_summary(const RunResult& res) {
    for (const StageInfo& s : res.stages)
        std::printf("stage %-10s %-8s %.3fs\n", s.name.c_str(),
                    s.recomputed ? "computed" : "loaded", s.seconds);
    std::printf("run dir: %s\n", res.run_dir.string().c_str());
    std::printf("report rows: %zu\n", res.rows.size());
}

int run_stage(const CommonArgs& args, const std::string& stage) {
    ExperimentConfig cfg = build_config(args);
    Pipeline p(cfg);
    if (stage == "gen-world") p.ensure_world();
    else if (stage == "train-experts") p.ensure_experts();
    else if (stage == "extract") p.ensure_pool();
    else if (stage == "fit-fusion") p.ensure_fusion();
    else if (stage == "distill") { p.ensure_distill(); p.ensure_mt(); p.ensure_posthoc(); }
    else if (stage == "transfer") p.ensure_transfer();
    else if (stage == "select") p.ensure_select();
    else if (stage == "sweep-latent") p.ensure_sweep();
    else if (stage == "run-all") { print_summary(p.run_all()); return 0; }
    // "report" only merges whatever row files already exist
    print_summary(p.finalize_reports());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"omnifuse: multi-source embedding fusion, distillation and transfer"};
    app.require_subcommand(1);

    const std::vector<std::string> stages = {"gen-world", "train-experts", "extract",
                                             "fit-fusion", "distill", "transfer", "select",
                                             "sweep-latent", "run-all", "report"};
    const std::map<std::string, std::string> help = {
        {"gen-world", "generate the synthetic world"},
        {"train-experts", "train the source expert bank"},
        {"extract", "sample the unlabeled pool"},
        {"fit-fusion", "rescale embeddings and fit the fusion operators"},
        {"distill", "distill the student and train the joint baseline"},
        {"transfer", "run the per-task transfer comparisons"},
        {"select", "run the best-transfer selection baselines"},
        {"sweep-latent", "sweep the joint embedding width"},
        {"run-all", "run the whole pipeline"},
        {"report", "re-emit merged reports from existing stage outputs"},
    };

    std::map<std::string, CommonArgs> args;
    for (const std::string& s : stages) {
        CLI::App* cmd = app.add_subcommand(s, help.at(s));
        add_common(cmd, args[s]);
    }

    CLI11_PARSE(app, argc, argv);

    try {
        for (const std::string& s : stages)
            if (app.got_subcommand(s)) return run_stage(args[s], s);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

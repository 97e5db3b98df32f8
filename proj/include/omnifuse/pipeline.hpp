#pragma once

#include <filesystem>
#include <map>
#include <optional>

#include "omnifuse/checkpoint.hpp"
#include "omnifuse/config.hpp"
#include "omnifuse/report.hpp"
#include "omnifuse/transfer.hpp"

namespace omnifuse {

struct StageInfo {
    std::string name;
    bool recomputed = false;
    double seconds = 0.0;
};

struct RunResult {
    std::filesystem::path run_dir;
    std::vector<StageInfo> stages;
    std::vector<ReportRow> rows;
};

// Orchestrates the three-step experiment over one run directory:
//   world -> experts -> pool -> fusion -> distill -> mt -> posthoc
//   -> transfer -> select -> sweep -> merged reports
// Every stage persists a checkpoint and/or a row file keyed by the config
// digest; existing stage outputs are loaded instead of recomputed, so a run
// resumes from whatever is missing.
class Pipeline {
public:
    explicit Pipeline(ExperimentConfig cfg);

    const std::filesystem::path& run_dir() const { return run_dir_; }
    const std::string& digest() const { return digest_; }

    RunResult run_all();

    // granular stage entry points (each ensures its prerequisites)
    void ensure_world();
    void ensure_experts();
    void ensure_pool();
    void ensure_fusion();
    void ensure_distill();
    void ensure_mt();
    void ensure_posthoc();
    void ensure_transfer();
    void ensure_select();
    void ensure_sweep();
    RunResult finalize_reports();

    World& world();
    ExpertBank& bank();
    SyntheticDataset& pool();
    Rescaler& rescaler();
    FusionOperator& fusion_op(FusionKind kind);
    StudentEncoder& student();
    MtModel& mt();

private:
    struct StageGuard;
    bool stage_done(const std::string& name) const;
    std::filesystem::path ckpt_path(const std::string& name) const;
    std::filesystem::path rows_path(const std::string& name) const;
    void note_stage(const std::string& name, bool recomputed, double seconds);
    void load_stage_rows(const std::string& name);
    void save_stage_rows(const std::string& name, const std::vector<ReportRow>& rows);
    ReportRow row(const std::string& stage, const std::string& task, const std::string& encoder,
                  const std::string& mode, const std::string& metric, double value, int64_t n,
                  int64_t n_missing = 0) const;
    Rng root_rng() const { return Rng(cfg_.seed); }

    Teacher teacher_for(FusionKind kind);
    std::vector<ReportRow> recon_rows_for(const std::string& encoder_label, const Tensor& h_train,
                                          const Tensor& h_val);
    TaskData task_data(const TaskSpec& task);
    int64_t latent_dim();
    int64_t teacher_latent();  // the chosen operator's actual output width

    ExperimentConfig cfg_;
    std::filesystem::path run_dir_;
    std::string digest_;
    std::string run_id_;

    std::optional<World> world_;
    std::optional<ExpertBank> bank_;
    std::optional<SyntheticDataset> pool_;
    std::optional<Rescaler> rescaler_;
    std::map<FusionKind, FusionOperator> ops_;
    std::optional<StudentEncoder> student_;
    std::optional<MtModel> mt_;

    // cached rescaled pool embeddings (derived, not persisted)
    std::optional<Tensor> x_pool_train_, x_pool_val_;
    std::vector<int64_t> pool_train_idx_, pool_val_idx_;
    void ensure_pool_embeddings();

    std::vector<StageInfo> stages_;
    std::map<std::string, std::vector<ReportRow>> stage_rows_;
};

RunResult run_pipeline(const ExperimentConfig& cfg);

// applies the OMNIFUSE_OUT environment root to a relative out_dir
std::filesystem::path resolve_out_dir(const std::string& out_dir);

}  // namespace omnifuse

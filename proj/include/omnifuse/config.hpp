#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "omnifuse/distill.hpp"
#include "omnifuse/fusion.hpp"
#include "omnifuse/world.hpp"

namespace omnifuse {

// Full declarative description of one experiment run. Parsed from a
// key = value file (# comments allowed) plus --set overrides; unknown keys
// are rejected before any compute.
struct ExperimentConfig {
    uint64_t seed = 42;
    std::string out_dir = "runs/default";

    WorldConfig world;

    int64_t pool_n = 3000;
    std::vector<int64_t> pool_domains = {0, 1};  // the unlabeled pool spans these
    double pool_val_fraction = 0.1;

    int64_t expert_domain = 0;  // source domain the experts are trained on

    std::vector<int64_t> expert_hidden = {384, 384};
    int64_t expert_train_n = 3000;
    int64_t expert_val_n = 400;
    int64_t expert_epochs = 15;
    int64_t expert_batch = 32;
    double expert_lr = 1e-3;

    FusionKind fusion_kind = FusionKind::ae;
    int64_t fusion_latent = 0;  // 0: latent_dim_rule over the expert widths
    int64_t fusion_layers = 3;
    int64_t fusion_epochs = 150;
    int64_t fusion_batch = 32;
    double fusion_lr = 2e-3;
    double fusion_noise_sigma = 0.1;
    double fusion_beta = 1.0;

    StudentConfig student;

    int64_t distill_epochs = 35;
    int64_t distill_batch = 64;
    double distill_lr = 1e-3;

    int64_t mt_epochs = 25;
    int64_t mt_batch = 64;
    double mt_lr = 1e-3;

    int64_t transfer_epochs = 15;
    int64_t transfer_head_epochs = 100;
    int64_t transfer_batch = 32;
    double transfer_lr = 3e-3;
    double transfer_encoder_lr_scale = 0.1;
    int64_t transfer_train_n = 550;
    int64_t transfer_small_train_n = 120;
    int64_t transfer_val_n = 300;
    int64_t transfer_test_n = 600;
    int64_t transfer_domain = 2;
    int64_t transfer_pair_folds = 10;
    int64_t transfer_pairs_n = 500;

    int64_t select_epochs = 10;

    int64_t posthoc_epochs = 80;  // reconstruction-probe decoder budget

    std::vector<int64_t> sweep_dims = {8, 16, 32, 64};
    int64_t sweep_epochs = 50;

    // canonical key=value text covering every effective setting
    std::string canonical_text() const;
    std::string digest() const;  // fnv-1a of the canonical text, hex
    void validate() const;
};

// defaults only
ExperimentConfig default_config();
// file may be empty-string to start from defaults; overrides are
// "key=value" strings applied after the file
ExperimentConfig load_config(const std::filesystem::path& file,
                             const std::vector<std::string>& overrides = {});
ExperimentConfig parse_config_text(const std::string& text,
                                   const std::vector<std::string>& overrides = {});

std::vector<TaskSpec> default_eval_tasks(const WorldConfig& world);

}  // namespace omnifuse

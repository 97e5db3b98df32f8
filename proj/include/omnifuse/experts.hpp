#pragma once

#include "omnifuse/embedding.hpp"
#include "omnifuse/nn.hpp"
#include "omnifuse/train.hpp"
#include "omnifuse/world.hpp"

namespace omnifuse {

struct ExpertSpec {
    TaskSpec task;
    int64_t embed_dim = 16;  // d_m, the exposed penultimate width
    std::vector<int64_t> hidden = {384, 384};
    int64_t train_n = 1200;
    int64_t val_n = 400;
    int64_t epochs = 12;
    int64_t batch = 32;
    double lr = 1e-3;
};

// One source model: the encoder ends at the embedding layer, the task head
// sits on top of it. Only the encoder output is exposed downstream.
struct Expert {
    ExpertSpec spec;
    Sequential encoder;  // d_x -> hidden... -> d_m
    Sequential head;     // d_m -> task output
    double val_metric = 0.0;
    double chance = 0.0;
    bool weak = false;  // failed to beat the chance oracle
};

struct ExpertBank {
    std::vector<Expert> experts;

    int64_t size() const { return static_cast<int64_t>(experts.size()); }
    std::vector<int64_t> embed_dims() const;
    std::vector<std::string> names() const;
    uint64_t params_hash() const;
    int64_t encoder_param_count() const;
};

// The default desk bank: six experts mirroring a mix of one multiclass, one
// identity, one age regression, one binary, one multi-attribute and one
// unrelated-factor task, with heterogeneous embedding widths.
std::vector<ExpertSpec> default_expert_specs(const WorldConfig& world_cfg);

// Trains each expert on its own labeled sample from source_domain; an expert
// that does not beat its chance oracle is flagged weak, not fatal.
ExpertBank train_experts(const World& world, const std::vector<ExpertSpec>& specs,
                         int64_t source_domain, Rng rng);

// Inference-only embedding extraction, one modality per expert.
EmbeddingSet extract_embeddings(const ExpertBank& bank, const Tensor& observations);

}  // namespace omnifuse

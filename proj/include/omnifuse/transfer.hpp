#pragma once

#include <functional>
#include <optional>

#include "omnifuse/distill.hpp"
#include "omnifuse/metrics.hpp"
#include "omnifuse/train.hpp"

namespace omnifuse {

enum class TransferMode { cf, wf };  // classifier-only vs whole fine-tuning

std::string transfer_mode_to_string(TransferMode m);

// Two dense layers: d_e -> ceil(d_e/2) with batchnorm+elu, then the task
// output (logits for classification, linear for regression, sigmoid for
// attribute detection).
Sequential build_head(int64_t d_e, const TaskSpec& task, Rng rng);

// Any embedding producer a head can sit on. backbone() non-null marks the
// encoder as fine-tunable (WF); the teacher stack is CF-only.
class TransferEncoder {
public:
    virtual ~TransferEncoder() = default;
    virtual Tensor encode(const Tensor& x) const = 0;
    virtual int64_t out_dim() const = 0;
    virtual uint64_t hash() const = 0;
    virtual const Sequential* backbone() const { return nullptr; }
    virtual std::string name() const = 0;
};

class TeacherRef : public TransferEncoder {
public:
    TeacherRef(const Teacher& t, std::string name) : t_(&t), name_(std::move(name)) {}
    Tensor encode(const Tensor& x) const override { return t_->encode(x); }
    int64_t out_dim() const override { return t_->out_dim(); }
    uint64_t hash() const override { return t_->params_hash(); }
    std::string name() const override { return name_; }

private:
    const Teacher* t_;
    std::string name_;
};

class NetRef : public TransferEncoder {
public:
    NetRef(const Sequential& net, std::string name) : net_(&net), name_(std::move(name)) {}
    Tensor encode(const Tensor& x) const override { return net_->forward(x); }
    int64_t out_dim() const override { return net_->out_dim(); }
    uint64_t hash() const override { return param_hash(const_cast<Sequential&>(*net_)); }
    const Sequential* backbone() const override { return net_; }
    std::string name() const override { return name_; }

private:
    const Sequential* net_;
    std::string name_;
};

// a fitted fusion operator over precomputed rescaled embeddings (CF only)
class FusionRef : public TransferEncoder {
public:
    FusionRef(const FusionOperator& op, std::string name) : op_(&op), name_(std::move(name)) {}
    Tensor encode(const Tensor& x) const override { return op_->encode(x); }
    int64_t out_dim() const override { return op_->latent_dim(); }
    uint64_t hash() const override { return op_->params_hash(); }
    std::string name() const override { return name_; }

private:
    const FusionOperator* op_;
    std::string name_;
};

struct TaskData {
    TaskSpec spec;
    SyntheticDataset train, val, test;
};

TaskData make_task_data(const World& world, const TaskSpec& task, int64_t n_train,
                        int64_t n_val, int64_t n_test, int64_t domain_id, Rng rng);

struct TransferConfig {
    int64_t epochs = 15;       // joint (whole-model) training epochs
    int64_t head_epochs = 100; // classifier-on-frozen-encoder epochs
    int64_t batch = 32;
    double lr = 1e-3;
    double encoder_lr_scale = 0.1;  // WF backbone learning-rate multiplier
    int64_t pair_folds = 10;
};

struct TransferResult {
    Sequential head;
    std::optional<Sequential> tuned_backbone;  // present after WF
    double val_metric = 0.0;
    double test_metric = 0.0;
    FitHistory history;
};

// CF freezes the encoder (asserted by hash) and fits the head to convergence
// on cached embeddings. WF starts from that classifier solution, then clones
// the backbone and fine-tunes everything jointly at a reduced encoder
// learning rate (head_epochs = 0 skips the warm start, giving plain
// end-to-end training). Identity-pair tasks are scored headless via
// pair_transfer_eval instead.
TransferResult transfer_train(const TransferEncoder& encoder, const TaskData& data,
                              TransferMode mode, const TransferConfig& cfg, Rng rng);

// headless identity-pair protocol: fold-thresholded L2 verification on the
// encoder's embeddings
MetricReport pair_transfer_eval(const TransferEncoder& encoder, const SyntheticDataset& ds,
                                int64_t n_folds);
std::vector<PairLabel> to_pair_labels(const std::vector<PairExample>& pairs);

// ---------------------------------------------------------------------------
// selection baselines
// ---------------------------------------------------------------------------

enum class SelectMode { single, all_subsets };  // BT vs BCT

struct SelectCandidate {
    std::vector<int64_t> subset;  // modality indices, ascending
    double val_metric = 0.0;
};

struct SelectResult {
    std::vector<int64_t> best_subset;
    double best_val_metric = 0.0;
    double test_metric = 0.0;  // winner only
    std::vector<SelectCandidate> candidates;
};

// Trains one head per candidate modality subset on the concatenated selected
// embeddings and picks the best validation metric (deterministic tie-break:
// lexicographically smallest subset). Pair tasks are scored headless. The
// exhaustive mode rejects more than 12 modalities.
SelectResult select_transfer(const EmbeddingSet& train_emb, const EmbeddingSet& val_emb,
                             const EmbeddingSet& test_emb, const TaskData& data,
                             SelectMode mode, const TransferConfig& cfg, Rng rng);

// ---------------------------------------------------------------------------
// latent-size sweep
// ---------------------------------------------------------------------------

struct SweepRow {
    int64_t dim = 0;
    double val_rrmse = 0.0;
    std::vector<std::pair<std::string, double>> task_metrics;
    bool failed = false;
    std::string error;
};

using SweepTaskEval =
    std::function<std::vector<std::pair<std::string, double>>(const FusionOperator&)>;

// One fusion fit per latent dim (ascending, duplicates rejected) with shared
// seeds; failures are recorded per row and the sweep continues.
std::vector<SweepRow> sweep_latent(const Tensor& x_train, const Tensor& x_val,
                                   const std::vector<int64_t>& dims, FusionKind kind,
                                   const AeConfig& base_cfg, int64_t n_layers, Rng rng,
                                   const SweepTaskEval& eval_tasks = {});

}  // namespace omnifuse

#pragma once

#include "omnifuse/experts.hpp"
#include "omnifuse/fusion.hpp"
#include "omnifuse/rescale.hpp"
#include "omnifuse/train.hpp"

namespace omnifuse {

struct CosineDiagnostics {
    int64_t zero_norm_count = 0;
};

// 1 - cosine similarity between two vectors, in [0, 2]; zero-norm inputs are
// scored as distance 1 and counted in the diagnostics
double cosine_distance(const Tensor& a, const Tensor& b, CosineDiagnostics* diag = nullptr);
// row-wise mean over two matrices
double mean_cosine_distance(const Tensor& a, const Tensor& b,
                            CosineDiagnostics* diag = nullptr);

// The frozen step-1 stack: expert encoders, the fitted rescaler and the
// fitted fusion operator. Produces the joint embedding for raw observations.
struct Teacher {
    const ExpertBank* bank = nullptr;
    const Rescaler* rescaler = nullptr;
    const FusionOperator* fusion = nullptr;

    Tensor encode(const Tensor& observations) const;
    Tensor rescaled_concat(const Tensor& observations) const;
    int64_t out_dim() const { return fusion->latent_dim(); }
    uint64_t params_hash() const;
    int64_t encoder_param_count() const;  // expert encoders + fusion encoder
};

struct StudentConfig {
    std::vector<int64_t> hidden = {256, 256};
    Activation hidden_act = Activation::elu;
    bool conv_mode = false;   // 3 conv blocks + pooling + dense head
    int64_t image_side = 16;  // conv mode input is side x side, one channel
};

struct StudentEncoder {
    Sequential net;
    int64_t out_dim() const { return net.out_dim(); }
    Tensor encode(const Tensor& x) const { return net.forward(x); }
    int64_t n_params() { return param_count(net); }
    uint64_t hash() { return param_hash(net); }
};

StudentEncoder make_student(int64_t in_dim, int64_t out_dim, const StudentConfig& cfg, Rng rng);

struct DistillConfig {
    int64_t epochs = 25;
    int64_t batch = 64;
    double lr = 1e-3;
};

struct DistillHistory {
    std::vector<double> epoch_loss;        // train cosine loss per epoch
    double initial_val_distance = 0.0;     // held-out mean cosine distance
    double final_val_distance = 0.0;
};

// Trains the student to match the frozen teacher's embedding under cosine
// distance. Targets are precomputed once (the teacher never updates) and the
// teacher hash is asserted unchanged.
DistillHistory distill_train(StudentEncoder& student, const Teacher& teacher,
                             const Tensor& pool_train, const Tensor& pool_val,
                             const DistillConfig& cfg, Rng rng);

// Joint multi-task baseline: the student backbone feeds a decoder with the
// fusion decoder's architecture and regresses all rescaled modalities.
struct MtModel {
    Sequential backbone;
    Sequential decoder;
    int64_t latent_dim() const { return backbone.out_dim(); }
    Tensor encode(const Tensor& x) const { return backbone.forward(x); }
    uint64_t hash();
};

MtModel make_mt_model(int64_t in_dim, int64_t latent, const std::vector<int64_t>& encoder_hidden,
                      int64_t target_dim, const StudentConfig& student_cfg, Rng rng);

struct MtHistory {
    std::vector<double> epoch_loss;
    double initial_val_loss = 0.0;
    double final_val_loss = 0.0;
};

MtHistory mt_train(MtModel& mt, const Tensor& pool_train, const Tensor& targets_train,
                   const Tensor& pool_val, const Tensor& targets_val, const DistillConfig& cfg,
                   Rng rng);

// reconstruction objective of the MT model on the given data
double mt_loss_eval(const MtModel& mt, const Tensor& x, const Tensor& targets);

double compression_ratio(int64_t teacher_params, int64_t student_params);

}  // namespace omnifuse

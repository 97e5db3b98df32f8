#pragma once

#include "omnifuse/losses.hpp"
#include "omnifuse/metrics.hpp"
#include "omnifuse/nn.hpp"
#include "omnifuse/task.hpp"
#include "omnifuse/world.hpp"

namespace omnifuse {

struct FitOpts {
    int64_t epochs = 10;
    int64_t batch = 32;
    double lr = 1e-3;
    double backbone_lr_scale = 1.0;  // backbone lr = lr * scale
};

struct FitHistory {
    std::vector<double> epoch_loss;  // mean train loss per epoch
};

// One task's inputs and training targets; inputs may be raw observations or
// precomputed embeddings.
struct SupervisedData {
    Tensor x;
    TaskKind kind = TaskKind::classification;
    std::vector<int> class_labels;
    Tensor reg_targets;  // normalized to [-1, 1]
    Tensor attr_targets;
};

SupervisedData make_supervised(const TaskSpec& task, const SyntheticDataset& ds,
                               const Tensor& inputs);

// Minibatch Adam training of (backbone? -> head) under the task loss. A null
// backbone trains the head alone on the given inputs.
FitHistory fit_supervised(Sequential* backbone, Sequential& head, const SupervisedData& data,
                          const FitOpts& opts, Rng rng);

// Held-out score: forward in inference mode, decode predictions, apply the
// missing-sample policy when the dataset carries flags, return the metric.
double score_supervised(const Sequential* backbone, const Sequential& head,
                        const TaskSpec& task, const SyntheticDataset& ds,
                        const Tensor& inputs);

// chance-level oracle for a task given the labels of an evaluation set
double chance_metric(const TaskSpec& task, const SyntheticDataset& ds);

}  // namespace omnifuse

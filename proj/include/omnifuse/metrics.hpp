#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "omnifuse/task.hpp"
#include "omnifuse/tensor.hpp"

namespace omnifuse {

struct MetricReport {
    MetricKind kind = MetricKind::accuracy;
    double value = 0.0;
    int64_t n_samples = 0;
    int64_t n_missing = 0;
    std::vector<double> per_fold;
    bool flagged = false;  // e.g. a verification fold containing one class only
};

// RMSE between recon and target normalized by the target's pooled standard
// deviation (per-dimension variances about per-dimension means, averaged,
// then square-rooted). 0 = perfect, 1 = per-dimension mean predictor,
// ~sqrt(2) = independent random predictor.
double rrmse(const Tensor& recon, const Tensor& target);

double accuracy(const std::vector<int>& preds, const std::vector<int>& labels);
double mean_absolute_error(const std::vector<double>& preds, const std::vector<double>& labels);
// fraction of attribute bits where (prob >= 0.5) != label, over all bits;
// a probability of exactly 0.5 counts as a positive prediction
double error_rate_at_half(const Tensor& probs, const Tensor& labels);

// missing-sample scoring: classification predictions become incorrect
// (encoded as label -1), regression predictions become the midpoint of the
// task's label range
void apply_missing_policy(const TaskSpec& task, std::vector<int>& class_preds,
                          const std::vector<uint8_t>& missing);
void apply_missing_policy(const TaskSpec& task, std::vector<double>& reg_preds,
                          const std::vector<uint8_t>& missing);

struct PairLabel {
    int64_t i = 0, j = 0;
    bool same = false;
};

// Fold-based verification: L2 distances between embedding rows; per fold the
// threshold maximizing accuracy on the union of the other folds (smallest
// maximizing threshold on ties) is applied to the held-out fold. Returns the
// mean fold accuracy with per-fold values.
MetricReport pair_verification(const Tensor& embeddings, const std::vector<PairLabel>& pairs,
                               int64_t n_folds);

}  // namespace omnifuse

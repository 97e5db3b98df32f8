#include "omnifuse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace omnifuse {

double rrmse(const Tensor& recon, const Tensor& target) {
    if (!recon.same_shape(target))
        throw std::invalid_argument("rrmse: shape mismatch");
    const int64_t n = target.rows(), d = target.cols();
    if (n < 2) throw std::invalid_argument("rrmse: need at least 2 rows");

    double sq = 0.0;
    for (size_t i = 0; i < recon.data.size(); ++i) {
        const double diff = recon.data[i] - target.data[i];
        sq += diff * diff;
    }
    sq /= static_cast<double>(n * d);

    double pooled_var = 0.0;
    for (int64_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (int64_t i = 0; i < n; ++i) mean += target.at(i, j);
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (int64_t i = 0; i < n; ++i) {
            const double c = target.at(i, j) - mean;
            var += c * c;
        }
        pooled_var += var / static_cast<double>(n);
    }
    pooled_var /= static_cast<double>(d);
    if (pooled_var <= 0.0) throw std::invalid_argument("rrmse: zero-variance target");
    return std::sqrt(sq) / std::sqrt(pooled_var);
}

double accuracy(const std::vector<int>& preds, const std::vector<int>& labels) {
    if (preds.size() != labels.size() || preds.empty())
        throw std::invalid_argument("accuracy: bad input lengths");
    int64_t correct = 0;
    for (size_t i = 0; i < preds.size(); ++i)
        if (preds[i] == labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(preds.size());
}

double mean_absolute_error(const std::vector<double>& preds, const std::vector<double>& labels) {
    if (preds.size() != labels.size() || preds.empty())
        throw std::invalid_argument("mae: bad input lengths");
    double acc = 0.0;
    for (size_t i = 0; i < preds.size(); ++i) acc += std::fabs(preds[i] - labels[i]);
    return acc / static_cast<double>(preds.size());
}

double error_rate_at_half(const Tensor& probs, const Tensor& labels) {
    if (!probs.same_shape(labels))
        throw std::invalid_argument("error_rate: shape mismatch");
    if (probs.numel() == 0) throw std::invalid_argument("error_rate: empty input");
    int64_t wrong = 0;
    for (size_t i = 0; i < probs.data.size(); ++i) {
        const int pred = probs.data[i] >= 0.5 ? 1 : 0;
        const int lab = labels.data[i] >= 0.5 ? 1 : 0;
        if (pred != lab) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(probs.numel());
}

void apply_missing_policy(const TaskSpec& task, std::vector<int>& class_preds,
                          const std::vector<uint8_t>& missing) {
    (void)task;
    if (missing.empty()) return;
    if (missing.size() != class_preds.size())
        throw std::invalid_argument("missing policy: flag count mismatch");
    for (size_t i = 0; i < missing.size(); ++i)
        if (missing[i]) class_preds[i] = -1;  // never matches a valid label
}

void apply_missing_policy(const TaskSpec& task, std::vector<double>& reg_preds,
                          const std::vector<uint8_t>& missing) {
    if (missing.empty()) return;
    if (missing.size() != reg_preds.size())
        throw std::invalid_argument("missing policy: flag count mismatch");
    if (task.label_max <= task.label_min)
        throw std::invalid_argument("missing policy: regression task '" + task.name +
                                    "' has no label range");
    const double mid = 0.5 * (task.label_min + task.label_max);
    for (size_t i = 0; i < missing.size(); ++i)
        if (missing[i]) reg_preds[i] = mid;
}

namespace {

double threshold_accuracy(const std::vector<double>& dist, const std::vector<char>& same,
                          const std::vector<int64_t>& idx, double t) {
    int64_t correct = 0;
    for (int64_t k : idx) {
        const bool pred_same = dist[static_cast<size_t>(k)] < t;
        if (pred_same == static_cast<bool>(same[static_cast<size_t>(k)])) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(idx.size());
}

}  // namespace

MetricReport pair_verification(const Tensor& embeddings, const std::vector<PairLabel>& pairs,
                               int64_t n_folds) {
    if (n_folds < 2) throw std::invalid_argument("pair_verification: need >= 2 folds");
    if (static_cast<int64_t>(pairs.size()) < n_folds)
        throw std::invalid_argument("pair_verification: fewer pairs than folds");

    const int64_t np = static_cast<int64_t>(pairs.size());
    std::vector<double> dist(static_cast<size_t>(np));
    std::vector<char> same(static_cast<size_t>(np));
    for (int64_t k = 0; k < np; ++k) {
        const PairLabel& p = pairs[static_cast<size_t>(k)];
        double sq = 0.0;
        for (int64_t c = 0; c < embeddings.cols(); ++c) {
            const double d = embeddings.at(p.i, c) - embeddings.at(p.j, c);
            sq += d * d;
        }
        dist[static_cast<size_t>(k)] = std::sqrt(sq);
        same[static_cast<size_t>(k)] = p.same ? 1 : 0;
    }

    MetricReport rep;
    rep.kind = MetricKind::pair_accuracy;
    rep.n_samples = np;
    double total = 0.0;
    for (int64_t f = 0; f < n_folds; ++f) {
        std::vector<int64_t> held, rest;
        for (int64_t k = 0; k < np; ++k)
            (k % n_folds == f ? held : rest).push_back(k);

        bool pos = false, neg = false;
        for (int64_t k : held) (same[static_cast<size_t>(k)] ? pos : neg) = true;
        if (!(pos && neg)) rep.flagged = true;

        // candidate thresholds: midpoints of sorted observed distances plus
        // the two extremes (classify-none / classify-all)
        std::vector<double> sorted;
        sorted.reserve(rest.size());
        for (int64_t k : rest) sorted.push_back(dist[static_cast<size_t>(k)]);
        std::sort(sorted.begin(), sorted.end());
        std::vector<double> candidates;
        candidates.push_back(-std::numeric_limits<double>::infinity());
        for (size_t i = 0; i + 1 < sorted.size(); ++i)
            if (sorted[i] < sorted[i + 1]) candidates.push_back(0.5 * (sorted[i] + sorted[i + 1]));
        candidates.push_back(std::numeric_limits<double>::infinity());

        double best_t = candidates.front();
        double best_acc = -1.0;
        for (double t : candidates) {
            const double acc = threshold_accuracy(dist, same, rest, t);
            if (acc > best_acc) {  // ties keep the smallest threshold
                best_acc = acc;
                best_t = t;
            }
        }
        const double fold_acc = threshold_accuracy(dist, same, held, best_t);
        rep.per_fold.push_back(fold_acc);
        total += fold_acc;
    }
    rep.value = total / static_cast<double>(n_folds);
    return rep;
}

}  // namespace omnifuse

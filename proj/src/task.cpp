#include "omnifuse/task.hpp"

#include <stdexcept>

namespace omnifuse {

TaskKind task_kind_from_string(const std::string& s) {
    if (s == "classification") return TaskKind::classification;
    if (s == "regression") return TaskKind::regression;
    if (s == "binary_attrs") return TaskKind::binary_attrs;
    if (s == "identity_pairs") return TaskKind::identity_pairs;
    throw std::invalid_argument("unknown task kind: " + s);
}

std::string task_kind_to_string(TaskKind k) {
    switch (k) {
        case TaskKind::classification: return "classification";
        case TaskKind::regression: return "regression";
        case TaskKind::binary_attrs: return "binary_attrs";
        case TaskKind::identity_pairs: return "identity_pairs";
    }
    return "?";
}

std::string label_source_to_string(LabelSource s) {
    switch (s) {
        case LabelSource::class_label: return "class_label";
        case LabelSource::age: return "age";
        case LabelSource::age_bucket: return "age_bucket";
        case LabelSource::attr_bit: return "attr_bit";
        case LabelSource::attrs: return "attrs";
        case LabelSource::identity: return "identity";
        case LabelSource::identity_bucket: return "identity_bucket";
        case LabelSource::nuisance_class: return "nuisance_class";
    }
    return "?";
}

LabelSource label_source_from_string(const std::string& s) {
    if (s == "class_label") return LabelSource::class_label;
    if (s == "age") return LabelSource::age;
    if (s == "age_bucket") return LabelSource::age_bucket;
    if (s == "attr_bit") return LabelSource::attr_bit;
    if (s == "attrs") return LabelSource::attrs;
    if (s == "identity") return LabelSource::identity;
    if (s == "identity_bucket") return LabelSource::identity_bucket;
    if (s == "nuisance_class") return LabelSource::nuisance_class;
    throw std::invalid_argument("unknown label source: " + s);
}

MetricKind metric_kind_from_string(const std::string& s) {
    if (s == "accuracy") return MetricKind::accuracy;
    if (s == "mae") return MetricKind::mae;
    if (s == "error_rate") return MetricKind::error_rate;
    if (s == "pair_accuracy") return MetricKind::pair_accuracy;
    throw std::invalid_argument("unknown metric kind: " + s);
}

std::string metric_kind_to_string(MetricKind m) {
    switch (m) {
        case MetricKind::accuracy: return "accuracy";
        case MetricKind::mae: return "mae";
        case MetricKind::error_rate: return "error_rate";
        case MetricKind::pair_accuracy: return "pair_accuracy";
    }
    return "?";
}

bool metric_higher_is_better(MetricKind m) {
    return m == MetricKind::accuracy || m == MetricKind::pair_accuracy;
}

bool metric_not_worse(MetricKind m, double a, double b) {
    return metric_higher_is_better(m) ? a >= b : a <= b;
}

Tensor regression_targets(const TaskSpec& task, const std::vector<double>& labels) {
    if (task.label_max <= task.label_min)
        throw std::invalid_argument("regression task '" + task.name + "' has no label range");
    const double mid = 0.5 * (task.label_min + task.label_max);
    const double half = 0.5 * (task.label_max - task.label_min);
    Tensor t = Tensor::matrix(static_cast<int64_t>(labels.size()), 1);
    for (size_t i = 0; i < labels.size(); ++i) t.data[i] = (labels[i] - mid) / half;
    return t;
}

std::vector<double> regression_predictions(const TaskSpec& task, const Tensor& out) {
    const double mid = 0.5 * (task.label_min + task.label_max);
    const double half = 0.5 * (task.label_max - task.label_min);
    std::vector<double> preds(static_cast<size_t>(out.rows()));
    for (int64_t i = 0; i < out.rows(); ++i) preds[static_cast<size_t>(i)] = out.at(i, 0) * half + mid;
    return preds;
}

std::vector<int> argmax_rows(const Tensor& logits) {
    std::vector<int> out(static_cast<size_t>(logits.rows()));
    for (int64_t i = 0; i < logits.rows(); ++i) {
        const double* row = logits.row_ptr(i);
        int best = 0;
        for (int64_t j = 1; j < logits.cols(); ++j)
            if (row[j] > row[best]) best = static_cast<int>(j);
        out[static_cast<size_t>(i)] = best;
    }
    return out;
}

}  // namespace omnifuse

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "omnifuse/tensor.hpp"

namespace omnifuse {

enum class TaskKind { classification, regression, binary_attrs, identity_pairs };

// which latent factor drives the labels
enum class LabelSource {
    class_label,     // C-way category
    age,             // real in [0,100]
    age_bucket,      // age quantized into output_dim buckets
    attr_bit,        // one attribute bit as a binary class
    attrs,           // the full K-bit attribute vector
    identity,        // identity id
    identity_bucket, // (identity / id_stride) mod output_dim, a second categorical view
    nuisance_class,  // argmax of a fixed random projection of the nuisance vector
};

enum class MetricKind { accuracy, mae, error_rate, pair_accuracy };

struct TaskSpec {
    std::string name;
    TaskKind kind = TaskKind::classification;
    LabelSource source = LabelSource::class_label;
    int64_t output_dim = 2;  // classes, attribute count, or 1 for regression
    MetricKind metric = MetricKind::accuracy;
    double label_min = 0.0;  // regression label range
    double label_max = 0.0;
    uint64_t function_seed = 0;  // distinguishes nuisance_class projections
    int64_t attr_index = 0;      // which bit for attr_bit
    int64_t id_stride = 1;       // identity_bucket grouping stride
    bool small_train = false;    // evaluation task with a deliberately small train set
};

TaskKind task_kind_from_string(const std::string& s);
std::string task_kind_to_string(TaskKind k);
LabelSource label_source_from_string(const std::string& s);
std::string label_source_to_string(LabelSource s);
MetricKind metric_kind_from_string(const std::string& s);
std::string metric_kind_to_string(MetricKind m);
bool metric_higher_is_better(MetricKind m);
// a is at least as good as b under this metric
bool metric_not_worse(MetricKind m, double a, double b);

// regression targets are trained in a normalized [-1, 1] range
Tensor regression_targets(const TaskSpec& task, const std::vector<double>& labels);
std::vector<double> regression_predictions(const TaskSpec& task, const Tensor& out);

std::vector<int> argmax_rows(const Tensor& logits);

}  // namespace omnifuse

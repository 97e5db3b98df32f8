#include "omnifuse/train.hpp"

#include <cmath>
#include <stdexcept>

#include "omnifuse/optim.hpp"

namespace omnifuse {

SupervisedData make_supervised(const TaskSpec& task, const SyntheticDataset& ds,
                               const Tensor& inputs) {
    if (inputs.rows() != ds.n_rows())
        throw std::invalid_argument("make_supervised: inputs/labels row mismatch");
    SupervisedData out;
    out.x = inputs;
    out.kind = task.kind;
    switch (task.kind) {
        case TaskKind::classification:
            out.class_labels = ds.class_labels;
            break;
        case TaskKind::regression:
            out.reg_targets = regression_targets(task, ds.reg_labels);
            break;
        case TaskKind::binary_attrs:
            out.attr_targets = ds.attr_labels;
            break;
        case TaskKind::identity_pairs:
            throw std::invalid_argument("identity-pair tasks are scored headless, not fitted");
    }
    return out;
}

namespace {

LossValue batch_loss(const SupervisedData& data, const Tensor& out,
                     const std::vector<int64_t>& rows) {
    switch (data.kind) {
        case TaskKind::classification: {
            std::vector<int> labels;
            labels.reserve(rows.size());
            for (int64_t r : rows) labels.push_back(data.class_labels[static_cast<size_t>(r)]);
            return softmax_ce_loss(out, labels);
        }
        case TaskKind::regression:
            return mse_loss(out, take_rows(data.reg_targets, rows));
        case TaskKind::binary_attrs:
            return bce_loss(out, take_rows(data.attr_targets, rows));
        default:
            throw std::logic_error("batch_loss: unsupported kind");
    }
}

}  // namespace

FitHistory fit_supervised(Sequential* backbone, Sequential& head, const SupervisedData& data,
                          const FitOpts& opts, Rng rng) {
    FitHistory hist;
    const int64_t n = data.x.rows();
    if (n == 0 || opts.epochs == 0) return hist;

    Adam head_opt(opts.lr);
    Adam backbone_opt(opts.lr * opts.backbone_lr_scale);
    std::vector<int64_t> order(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;

    Rng shuffle_rng = rng.split("shuffle");
    for (int64_t epoch = 0; epoch < opts.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        int64_t batches = 0;
        for (int64_t start = 0; start < n; start += opts.batch) {
            const int64_t end = std::min(n, start + opts.batch);
            std::vector<int64_t> rows(order.begin() + start, order.begin() + end);
            Tensor xb = take_rows(data.x, rows);

            Tape bb_tape, head_tape;
            Tensor feat = backbone ? backbone->forward_train(xb, bb_tape) : xb;
            if (backbone) backbone->zero_grad();
            head.zero_grad();
            Tensor out = head.forward_train(feat, head_tape);
            LossValue l = batch_loss(data, out, rows);
            if (!std::isfinite(l.value))
                throw std::runtime_error("fit_supervised: loss diverged");
            Tensor dfeat = head.backward(l.grad, head_tape);
            if (backbone) backbone->backward(dfeat, bb_tape);

            head_opt.step(head.params());
            if (backbone) backbone_opt.step(backbone->params());
            loss_sum += l.value;
            ++batches;
        }
        hist.epoch_loss.push_back(loss_sum / static_cast<double>(batches));
    }
    return hist;
}

double score_supervised(const Sequential* backbone, const Sequential& head,
                        const TaskSpec& task, const SyntheticDataset& ds,
                        const Tensor& inputs) {
    Tensor feat = backbone ? backbone->forward(inputs) : inputs;
    Tensor out = head.forward(feat);
    switch (task.kind) {
        case TaskKind::classification: {
            std::vector<int> preds = argmax_rows(out);
            apply_missing_policy(task, preds, ds.missing);
            return accuracy(preds, ds.class_labels);
        }
        case TaskKind::regression: {
            std::vector<double> preds = regression_predictions(task, out);
            apply_missing_policy(task, preds, ds.missing);
            return mean_absolute_error(preds, ds.reg_labels);
        }
        case TaskKind::binary_attrs:
            return error_rate_at_half(out, ds.attr_labels);
        default:
            throw std::logic_error("score_supervised: unsupported kind");
    }
}

double chance_metric(const TaskSpec& task, const SyntheticDataset& ds) {
    switch (task.kind) {
        case TaskKind::classification:
            return 1.0 / static_cast<double>(task.output_dim);
        case TaskKind::regression: {
            double mean = 0.0;
            for (double y : ds.reg_labels) mean += y;
            mean /= static_cast<double>(ds.reg_labels.size());
            std::vector<double> preds(ds.reg_labels.size(), mean);
            return mean_absolute_error(preds, ds.reg_labels);
        }
        case TaskKind::binary_attrs: {
            // predict the per-attribute majority bit
            const int64_t n = ds.attr_labels.rows(), k = ds.attr_labels.cols();
            int64_t wrong = 0;
            for (int64_t j = 0; j < k; ++j) {
                int64_t ones = 0;
                for (int64_t i = 0; i < n; ++i)
                    if (ds.attr_labels.at(i, j) >= 0.5) ++ones;
                wrong += std::min(ones, n - ones);
            }
            return static_cast<double>(wrong) / static_cast<double>(n * k);
        }
        case TaskKind::identity_pairs:
            return 0.5;
    }
    return 0.0;
}

}  // namespace omnifuse

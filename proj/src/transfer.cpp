#include "omnifuse/transfer.hpp"

#include <algorithm>
#include <stdexcept>

namespace omnifuse {

std::string transfer_mode_to_string(TransferMode m) {
    return m == TransferMode::cf ? "cf" : "wf";
}

Sequential build_head(int64_t d_e, const TaskSpec& task, Rng rng) {
    if (d_e < 2) throw std::invalid_argument("build_head: d_e must be >= 2");
    const int64_t mid = (d_e + 1) / 2;
    Activation out_act = task.kind == TaskKind::binary_attrs ? Activation::sigmoid
                                                             : Activation::identity;
    Sequential head;
    head.add(std::make_unique<DenseLayer>(d_e, mid, Activation::elu, true, rng,
                                          "head." + task.name + ".l0"));
    head.add(std::make_unique<DenseLayer>(mid, task.output_dim, out_act, false, rng,
                                          "head." + task.name + ".l1"));
    return head;
}

TaskData make_task_data(const World& world, const TaskSpec& task, int64_t n_train,
                        int64_t n_val, int64_t n_test, int64_t domain_id, Rng rng) {
    TaskData data;
    data.spec = task;
    SyntheticDataset ds = sample_task(world, task, n_train + n_val + n_test, domain_id,
                                      rng.split("data"));
    assign_splits(ds, n_train, n_val, n_test, rng.split("splits"));
    data.train = subset(ds, Split::train);
    data.val = subset(ds, Split::val);
    data.test = subset(ds, Split::test);
    return data;
}

TransferResult transfer_train(const TransferEncoder& encoder, const TaskData& data,
                              TransferMode mode, const TransferConfig& cfg, Rng rng) {
    const TaskSpec& task = data.spec;
    if (task.kind == TaskKind::identity_pairs)
        throw std::invalid_argument("transfer_train: pair tasks are scored headless");
    if (encoder.out_dim() != 0 && data.train.x.cols() == 0)
        throw std::invalid_argument("transfer_train: empty task data");

    TransferResult res;
    res.head = build_head(encoder.out_dim(), task, rng.split("head"));

    if (mode == TransferMode::cf) {
        const uint64_t before = encoder.hash();
        Tensor etr = encoder.encode(data.train.x);
        Tensor eva = encoder.encode(data.val.x);
        Tensor ete = encoder.encode(data.test.x);
        FitOpts opts;
        opts.epochs = cfg.head_epochs;
        opts.batch = cfg.batch;
        opts.lr = cfg.lr;
        res.history = fit_supervised(nullptr, res.head, make_supervised(task, data.train, etr),
                                     opts, rng.split("fit"));
        res.val_metric = score_supervised(nullptr, res.head, task, data.val, eva);
        res.test_metric = score_supervised(nullptr, res.head, task, data.test, ete);
        if (encoder.hash() != before)
            throw std::logic_error("transfer_train: CF encoder was mutated");
        return res;
    }

    const Sequential* frozen = encoder.backbone();
    if (!frozen)
        throw std::invalid_argument("transfer_train: encoder '" + encoder.name() +
                                    "' cannot be fine-tuned whole");

    // warm start: fit the classifier on the frozen features first
    if (cfg.head_epochs > 0) {
        Tensor etr = encoder.encode(data.train.x);
        FitOpts warm;
        warm.epochs = cfg.head_epochs;
        warm.batch = cfg.batch;
        warm.lr = cfg.lr;
        fit_supervised(nullptr, res.head, make_supervised(task, data.train, etr), warm,
                       rng.split("fit"));
    }

    Sequential tuned = *frozen;  // deep copy; the shared encoder stays intact
    FitOpts joint;
    joint.epochs = cfg.epochs;
    joint.batch = cfg.batch;
    joint.lr = cfg.lr;
    joint.backbone_lr_scale = cfg.encoder_lr_scale;
    res.history = fit_supervised(&tuned, res.head,
                                 make_supervised(task, data.train, data.train.x), joint,
                                 rng.split("joint"));
    res.val_metric = score_supervised(&tuned, res.head, task, data.val, data.val.x);
    res.test_metric = score_supervised(&tuned, res.head, task, data.test, data.test.x);
    res.tuned_backbone = std::move(tuned);
    return res;
}

std::vector<PairLabel> to_pair_labels(const std::vector<PairExample>& pairs) {
    std::vector<PairLabel> out;
    out.reserve(pairs.size());
    for (const PairExample& p : pairs) out.push_back({p.i, p.j, p.same});
    return out;
}

MetricReport pair_transfer_eval(const TransferEncoder& encoder, const SyntheticDataset& ds,
                                int64_t n_folds) {
    if (ds.label_kind != TaskKind::identity_pairs || !ds.has_labels)
        throw std::invalid_argument("pair_transfer_eval: not a pair dataset");
    Tensor emb = encoder.encode(ds.x);
    return pair_verification(emb, to_pair_labels(ds.pairs), n_folds);
}

// ---------------------------------------------------------------------------
// BT / BCT selection
// ---------------------------------------------------------------------------

namespace {

bool candidate_better(MetricKind metric, double a, const std::vector<int64_t>& subset_a,
                      double b, const std::vector<int64_t>& subset_b) {
    if (a != b) return metric_higher_is_better(metric) ? a > b : a < b;
    return subset_a < subset_b;  // deterministic tie-break
}

}  // namespace

SelectResult select_transfer(const EmbeddingSet& train_emb, const EmbeddingSet& val_emb,
                             const EmbeddingSet& test_emb, const TaskData& data,
                             SelectMode mode, const TransferConfig& cfg, Rng rng) {
    const int64_t m = static_cast<int64_t>(train_emb.modalities.size());
    if (m < 1) throw std::invalid_argument("select_transfer: no modalities");
    if (mode == SelectMode::all_subsets && m > 12)
        throw std::invalid_argument("select_transfer: exhaustive search capped at 12 modalities");
    const TaskSpec& task = data.spec;
    const bool pair_task = task.kind == TaskKind::identity_pairs;

    std::vector<uint64_t> masks;
    if (mode == SelectMode::single) {
        for (int64_t i = 0; i < m; ++i) masks.push_back(1ULL << i);
    } else {
        for (uint64_t mask = 1; mask < (1ULL << m); ++mask) masks.push_back(mask);
    }

    SelectResult res;
    bool have_best = false;
    uint64_t best_mask = 0;
    for (uint64_t mask : masks) {
        std::vector<int64_t> subset;
        for (int64_t i = 0; i < m; ++i)
            if (mask & (1ULL << i)) subset.push_back(i);

        // candidate seed depends on the subset only, so a single-modality
        // candidate is bit-identical between the single and exhaustive modes
        Rng cand_rng = rng.split("candidate").split(mask);
        double val = 0.0;
        if (pair_task) {
            Tensor eva = val_emb.select(subset).concat();
            val = pair_verification(eva, to_pair_labels(data.val.pairs), cfg.pair_folds).value;
        } else {
            Tensor etr = train_emb.select(subset).concat();
            Tensor eva = val_emb.select(subset).concat();
            Sequential head = build_head(etr.cols(), task, cand_rng.split("head"));
            FitOpts opts;
            opts.epochs = cfg.epochs;
            opts.batch = cfg.batch;
            opts.lr = cfg.lr;
            fit_supervised(nullptr, head, make_supervised(task, data.train, etr), opts,
                           cand_rng.split("fit"));
            val = score_supervised(nullptr, head, task, data.val, eva);
        }
        res.candidates.push_back({subset, val});
        if (!have_best ||
            candidate_better(task.metric, val, subset, res.best_val_metric, res.best_subset)) {
            have_best = true;
            res.best_val_metric = val;
            res.best_subset = subset;
            best_mask = mask;
        }
    }

    // test metric is reported once, for the winner only
    Rng cand_rng = rng.split("candidate").split(best_mask);
    if (pair_task) {
        Tensor ete = test_emb.select(res.best_subset).concat();
        res.test_metric =
            pair_verification(ete, to_pair_labels(data.test.pairs), cfg.pair_folds).value;
    } else {
        Tensor etr = train_emb.select(res.best_subset).concat();
        Tensor ete = test_emb.select(res.best_subset).concat();
        Sequential head = build_head(etr.cols(), task, cand_rng.split("head"));
        FitOpts opts;
        opts.epochs = cfg.epochs;
        opts.batch = cfg.batch;
        opts.lr = cfg.lr;
        fit_supervised(nullptr, head, make_supervised(task, data.train, etr), opts,
                       cand_rng.split("fit"));
        res.test_metric = score_supervised(nullptr, head, task, data.test, ete);
    }
    return res;
}

// ---------------------------------------------------------------------------
// latent sweep
// ---------------------------------------------------------------------------

std::vector<SweepRow> sweep_latent(const Tensor& x_train, const Tensor& x_val,
                                   const std::vector<int64_t>& dims, FusionKind kind,
                                   const AeConfig& base_cfg, int64_t n_layers, Rng rng,
                                   const SweepTaskEval& eval_tasks) {
    if (dims.empty()) throw std::invalid_argument("sweep_latent: no dims");
    for (size_t i = 0; i + 1 < dims.size(); ++i) {
        if (dims[i] == dims[i + 1])
            throw std::invalid_argument("sweep_latent: duplicate dims");
        if (dims[i] > dims[i + 1])
            throw std::invalid_argument("sweep_latent: dims must be ascending");
    }

    std::vector<SweepRow> rows;
    for (int64_t dim : dims) {
        SweepRow row;
        row.dim = dim;
        try {
            AeConfig cfg = base_cfg;
            cfg.latent = dim;
            cfg.hidden = plan_layers(x_train.cols(), dim, n_layers);
            FusionOperator op = (kind == FusionKind::pca)
                                    ? fit_pca(x_train, dim)
                                    : fit_autoencoder(kind, x_train, x_val, cfg,
                                                      rng.split("dim").split(
                                                          static_cast<uint64_t>(dim)));
            row.val_rrmse = rrmse(op.decode(op.encode(x_val)), x_val);
            if (eval_tasks) row.task_metrics = eval_tasks(op);
        } catch (const std::exception& e) {
            row.failed = true;
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace omnifuse

#include "omnifuse/experts.hpp"

#include <stdexcept>

namespace omnifuse {

std::vector<int64_t> ExpertBank::embed_dims() const {
    std::vector<int64_t> d;
    for (const Expert& e : experts) d.push_back(e.spec.embed_dim);
    return d;
}

std::vector<std::string> ExpertBank::names() const {
    std::vector<std::string> n;
    for (const Expert& e : experts) n.push_back(e.spec.task.name);
    return n;
}

uint64_t ExpertBank::params_hash() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const Expert& e : experts) {
        // encoders are the shared teacher state; heads stay with the expert
        Sequential& enc = const_cast<Sequential&>(e.encoder);
        for (const Parameter* p : enc.params())
            h = fnv1a64(p->value.data.data(), p->value.data.size() * sizeof(double), h);
    }
    return h;
}

int64_t ExpertBank::encoder_param_count() const {
    int64_t n = 0;
    for (const Expert& e : experts) n += param_count(const_cast<Sequential&>(e.encoder));
    return n;
}

std::vector<ExpertSpec> default_expert_specs(const WorldConfig& world_cfg) {
    auto spec = [](TaskSpec task, int64_t d_m) {
        ExpertSpec s;
        s.task = std::move(task);
        s.embed_dim = d_m;
        return s;
    };

    TaskSpec category{"src_category", TaskKind::classification, LabelSource::class_label,
                      world_cfg.n_classes, MetricKind::accuracy};
    TaskSpec identity{"src_identity", TaskKind::classification, LabelSource::identity,
                      world_cfg.n_identities, MetricKind::accuracy};
    TaskSpec age{"src_age", TaskKind::regression, LabelSource::age, 1, MetricKind::mae,
                 0.0, 100.0};
    TaskSpec flag{"src_flag", TaskKind::classification, LabelSource::attr_bit, 2,
                  MetricKind::accuracy};
    flag.attr_index = 0;
    TaskSpec attrs{"src_attrs", TaskKind::binary_attrs, LabelSource::attrs,
                   world_cfg.n_attrs, MetricKind::error_rate};
    TaskSpec factor{"src_factor", TaskKind::classification, LabelSource::nuisance_class, 10,
                    MetricKind::accuracy};
    factor.function_seed = 1;

    // widths follow a 1:32 scale of {376, 2048, 512, 128, 376, 2048}
    return {spec(category, 12), spec(identity, 64), spec(age, 16),
            spec(flag, 4),      spec(attrs, 12),    spec(factor, 64)};
}

ExpertBank train_experts(const World& world, const std::vector<ExpertSpec>& specs,
                         int64_t source_domain, Rng rng) {
    ExpertBank bank;
    for (size_t m = 0; m < specs.size(); ++m) {
        const ExpertSpec& spec = specs[m];
        Rng expert_rng = rng.split("expert").split(static_cast<uint64_t>(m));

        SyntheticDataset ds = sample_task(world, spec.task, spec.train_n + spec.val_n,
                                          source_domain, expert_rng.split("data"));
        assign_splits(ds, spec.train_n, spec.val_n, 0, expert_rng.split("splits"));
        SyntheticDataset tr = subset(ds, Split::train);
        SyntheticDataset va = subset(ds, Split::val);

        Expert e;
        e.spec = spec;
        Rng init_rng = expert_rng.split("init");
        e.encoder = make_mlp(world.config().obs_dim, spec.hidden, spec.embed_dim,
                             Activation::elu, Activation::elu, init_rng,
                             spec.task.name + ".enc");
        Activation head_act = spec.task.kind == TaskKind::binary_attrs
                                  ? Activation::sigmoid
                                  : Activation::identity;
        e.head = make_mlp(spec.embed_dim, {}, spec.task.output_dim, Activation::identity,
                          head_act, init_rng, spec.task.name + ".head");

        FitOpts opts;
        opts.epochs = spec.epochs;
        opts.batch = spec.batch;
        opts.lr = spec.lr;
        SupervisedData data = make_supervised(spec.task, tr, tr.x);
        fit_supervised(&e.encoder, e.head, data, opts, expert_rng.split("fit"));

        e.val_metric = score_supervised(&e.encoder, e.head, spec.task, va, va.x);
        e.chance = chance_metric(spec.task, va);
        e.weak = !(metric_higher_is_better(spec.task.metric) ? e.val_metric > e.chance
                                                             : e.val_metric < e.chance);
        bank.experts.push_back(std::move(e));
    }
    return bank;
}

EmbeddingSet extract_embeddings(const ExpertBank& bank, const Tensor& observations) {
    EmbeddingSet out;
    for (const Expert& e : bank.experts) {
        if (observations.rows() == 0) {
            out.modalities.push_back({e.spec.task.name, Tensor::matrix(0, e.spec.embed_dim)});
            continue;
        }
        out.modalities.push_back({e.spec.task.name, e.encoder.forward(observations)});
    }
    return out;
}

}  // namespace omnifuse

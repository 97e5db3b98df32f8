#include "omnifuse/world.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace omnifuse {

namespace {

Tensor gaussian_matrix(int64_t r, int64_t c, double scale, Rng& rng) {
    Tensor t = Tensor::matrix(r, c);
    for (double& v : t.data) v = rng.normal() * scale;
    return t;
}

RenderMap draw_map(int64_t latent_dim, const WorldConfig& cfg, Rng& rng) {
    RenderMap m;
    const double s1 = 1.0 / std::sqrt(static_cast<double>(latent_dim));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(cfg.render_hidden));
    m.a1 = gaussian_matrix(latent_dim, cfg.render_hidden, s1, rng);
    m.b1 = gaussian_matrix(1, cfg.render_hidden, 0.1, rng);
    m.a2 = gaussian_matrix(cfg.render_hidden, cfg.obs_dim, s2, rng);
    m.b2 = gaussian_matrix(1, cfg.obs_dim, 0.1, rng);
    m.noise_sigma = cfg.noise_sigma;
    return m;
}

}  // namespace

int64_t SyntheticDataset::n_units() const {
    if (has_labels && label_kind == TaskKind::identity_pairs)
        return static_cast<int64_t>(pairs.size());
    return n_rows();
}

World::World(WorldConfig cfg, uint64_t seed, std::vector<RenderMap> maps, Tensor id_codes,
             Tensor base_age, Tensor base_attrs)
    : cfg_(cfg),
      seed_(seed),
      domains_(std::move(maps)),
      identity_codes_(std::move(id_codes)),
      base_age_(std::move(base_age)),
      base_attrs_(std::move(base_attrs)) {}

int64_t World::latent_dim() const {
    return cfg_.n_classes + 1 + cfg_.n_attrs + cfg_.id_code_dim + cfg_.nuisance_dim;
}

const RenderMap& World::domain(int64_t id) const {
    if (id < 0 || id >= n_domains())
        throw std::invalid_argument("world: unknown domain_id " + std::to_string(id));
    return domains_[static_cast<size_t>(id)];
}

World World::generate(uint64_t seed, const WorldConfig& cfg) {
    if (cfg.n_classes < 1 || cfg.n_attrs < 1 || cfg.nuisance_dim < 1 || cfg.obs_dim < 1 ||
        cfg.n_domains < 1 || cfg.n_identities < 1 || cfg.id_code_dim < 1 ||
        cfg.render_hidden < 1)
        throw std::invalid_argument("world: all dims must be >= 1");
    if (cfg.noise_sigma < 0.0) throw std::invalid_argument("world: noise must be >= 0");

    Rng root(seed);
    const int64_t ld = cfg.n_classes + 1 + cfg.n_attrs + cfg.id_code_dim + cfg.nuisance_dim;

    Rng base_rng = root.split("render_base");
    RenderMap base = draw_map(ld, cfg, base_rng);

    std::vector<RenderMap> maps;
    for (int64_t d = 0; d < cfg.n_domains; ++d) {
        RenderMap m = base;
        m.domain_id = d;
        if (d > 0) {
            // related domains: base weights plus a seeded perturbation
            Rng drng = root.split("render_domain").split(static_cast<uint64_t>(d));
            RenderMap delta = draw_map(ld, cfg, drng);
            auto blend = [&](Tensor& dst, const Tensor& pert) {
                for (size_t i = 0; i < dst.data.size(); ++i)
                    dst.data[i] += cfg.domain_shift * pert.data[i];
            };
            blend(m.a1, delta.a1);
            blend(m.b1, delta.b1);
            blend(m.a2, delta.a2);
            blend(m.b2, delta.b2);
        }
        maps.push_back(std::move(m));
    }

    Rng id_rng = root.split("identity_codes");
    Tensor codes = gaussian_matrix(cfg.n_identities, cfg.id_code_dim, 1.0, id_rng);

    // identity-anchored factors: one base age and attribute profile per
    // identity; samples jitter around them
    Rng anchor_rng = root.split("identity_base");
    Tensor base_age = Tensor::vector(cfg.n_identities);
    for (double& v : base_age.data) v = anchor_rng.uniform(5.0, 95.0);
    Tensor base_attrs = Tensor::matrix(cfg.n_identities, cfg.n_attrs);
    for (double& v : base_attrs.data) v = anchor_rng.uniform() < 0.5 ? 0.0 : 1.0;

    return World(cfg, seed, std::move(maps), std::move(codes), std::move(base_age),
                 std::move(base_attrs));
}

World gen_world(uint64_t seed, const WorldConfig& cfg) { return World::generate(seed, cfg); }

LatentFactor World::sample_latent(Rng& rng) const {
    LatentFactor lf;
    lf.identity = rng.uniform_int(0, cfg_.n_identities - 1);

    // the identity's category affinity is balanced (id mod C), so a symmetric
    // flip keeps the marginal class prior exactly uniform
    if (rng.uniform() < cfg_.class_flip_prob)
        lf.class_label = rng.uniform_int(0, cfg_.n_classes - 1);
    else
        lf.class_label = lf.identity % cfg_.n_classes;

    const double base = base_age_.data[static_cast<size_t>(lf.identity)];
    lf.age = std::clamp(base + cfg_.age_jitter * rng.normal(), 0.0, 100.0);

    lf.attrs.resize(static_cast<size_t>(cfg_.n_attrs));
    for (int64_t k = 0; k < cfg_.n_attrs; ++k) {
        const int bit = base_attrs_.at(lf.identity, k) >= 0.5 ? 1 : 0;
        lf.attrs[static_cast<size_t>(k)] = rng.uniform() < cfg_.attr_flip_prob ? 1 - bit : bit;
    }

    lf.nuisance.resize(static_cast<size_t>(cfg_.nuisance_dim));
    for (double& z : lf.nuisance) z = rng.normal();
    return lf;
}

Tensor World::latent_vector(const LatentFactor& lf) const {
    Tensor z = Tensor::matrix(1, latent_dim());
    int64_t off = 0;
    z.at(0, off + lf.class_label) = cfg_.class_scale;
    off += cfg_.n_classes;
    z.at(0, off) = cfg_.age_scale * (lf.age - 50.0) / 50.0;
    off += 1;
    for (int64_t k = 0; k < cfg_.n_attrs; ++k)
        z.at(0, off + k) = cfg_.attr_scale * (lf.attrs[static_cast<size_t>(k)] ? 1.0 : -1.0);
    off += cfg_.n_attrs;
    for (int64_t k = 0; k < cfg_.id_code_dim; ++k)
        z.at(0, off + k) = identity_codes_.at(lf.identity, k);
    off += cfg_.id_code_dim;
    for (int64_t k = 0; k < cfg_.nuisance_dim; ++k)
        z.at(0, off + k) = lf.nuisance[static_cast<size_t>(k)];
    return z;
}

Tensor World::render(const std::vector<LatentFactor>& lfs, int64_t domain_id, Rng& rng) const {
    const RenderMap& m = domain(domain_id);
    const int64_t n = static_cast<int64_t>(lfs.size());
    Tensor z = Tensor::matrix(n, latent_dim());
    for (int64_t i = 0; i < n; ++i) {
        Tensor row = latent_vector(lfs[static_cast<size_t>(i)]);
        for (int64_t j = 0; j < z.cols(); ++j) z.at(i, j) = row.at(0, j);
    }
    Tensor h = matmul(z, m.a1);
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < h.cols(); ++j)
            h.at(i, j) = std::tanh(h.at(i, j) + m.b1.at(0, j));
    Tensor x = matmul(h, m.a2);
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < x.cols(); ++j) {
            double v = x.at(i, j) + m.b2.at(0, j);
            if (m.noise_sigma > 0.0) v += m.noise_sigma * rng.normal();
            x.at(i, j) = std::tanh(v);
        }
    return x;
}

Tensor World::nuisance_proj(const TaskSpec& task) const {
    Rng rng = Rng(seed_).split("task_function").split(task.function_seed);
    return gaussian_matrix(task.output_dim, cfg_.nuisance_dim, 1.0, rng);
}

int World::label_for(const TaskSpec& task, const LatentFactor& lf) const {
    switch (task.source) {
        case LabelSource::class_label: return static_cast<int>(lf.class_label);
        case LabelSource::identity: return static_cast<int>(lf.identity);
        case LabelSource::identity_bucket:
            return static_cast<int>((lf.identity / std::max<int64_t>(1, task.id_stride)) %
                                    task.output_dim);
        case LabelSource::attr_bit:
            return lf.attrs.at(static_cast<size_t>(task.attr_index));
        case LabelSource::age_bucket: {
            const int64_t b = static_cast<int64_t>(lf.age / 100.0 *
                                                   static_cast<double>(task.output_dim));
            return static_cast<int>(std::min(b, task.output_dim - 1));
        }
        case LabelSource::nuisance_class: {
            Tensor proj = nuisance_proj(task);
            int best = 0;
            double best_v = 0.0;
            for (int64_t c = 0; c < task.output_dim; ++c) {
                double v = 0.0;
                for (int64_t k = 0; k < cfg_.nuisance_dim; ++k)
                    v += proj.at(c, k) * lf.nuisance[static_cast<size_t>(k)];
                if (c == 0 || v > best_v) {
                    best = static_cast<int>(c);
                    best_v = v;
                }
            }
            return best;
        }
        default:
            throw std::invalid_argument("task '" + task.name + "': not a classification source");
    }
}

double World::regression_label_for(const TaskSpec& task, const LatentFactor& lf) const {
    if (task.source != LabelSource::age)
        throw std::invalid_argument("task '" + task.name + "': not a regression source");
    return lf.age;
}

SyntheticDataset sample_unsup(const World& world, int64_t n, int64_t domain_id, Rng rng) {
    if (n < 1) throw std::invalid_argument("sample_unsup: n must be >= 1");
    std::vector<LatentFactor> lfs;
    lfs.reserve(static_cast<size_t>(n));
    Rng latent_rng = rng.split("latents");
    for (int64_t i = 0; i < n; ++i) lfs.push_back(world.sample_latent(latent_rng));
    Rng noise_rng = rng.split("noise");
    SyntheticDataset ds;
    ds.x = world.render(lfs, domain_id, noise_rng);
    ds.domain_id = domain_id;
    ds.has_labels = false;
    return ds;
}

SyntheticDataset sample_task(const World& world, const TaskSpec& task, int64_t n,
                             int64_t domain_id, Rng rng) {
    if (n < 1) throw std::invalid_argument("sample_task: n must be >= 1");
    SyntheticDataset ds;
    ds.has_labels = true;
    ds.label_kind = task.kind;
    ds.domain_id = domain_id;
    Rng latent_rng = rng.split("latents");
    Rng noise_rng = rng.split("noise");

    if (task.kind == TaskKind::identity_pairs) {
        if (world.config().n_identities < 2)
            throw std::invalid_argument("identity task needs >= 2 identities");
        std::vector<LatentFactor> lfs;
        lfs.reserve(static_cast<size_t>(2 * n));
        for (int64_t p = 0; p < n; ++p) {
            LatentFactor a = world.sample_latent(latent_rng);
            LatentFactor b = world.sample_latent(latent_rng);
            const bool same = (p % 2 == 0);
            if (same) {
                b.identity = a.identity;
            } else if (b.identity == a.identity) {
                b.identity = (a.identity + 1) % world.config().n_identities;
            }
            ds.pairs.push_back({2 * p, 2 * p + 1, same});
            lfs.push_back(std::move(a));
            lfs.push_back(std::move(b));
        }
        ds.x = world.render(lfs, domain_id, noise_rng);
        return ds;
    }

    std::vector<LatentFactor> lfs;
    lfs.reserve(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) lfs.push_back(world.sample_latent(latent_rng));
    ds.x = world.render(lfs, domain_id, noise_rng);

    switch (task.kind) {
        case TaskKind::classification:
            for (const LatentFactor& lf : lfs) ds.class_labels.push_back(world.label_for(task, lf));
            break;
        case TaskKind::regression:
            for (const LatentFactor& lf : lfs)
                ds.reg_labels.push_back(world.regression_label_for(task, lf));
            break;
        case TaskKind::binary_attrs: {
            ds.attr_labels = Tensor::matrix(n, world.config().n_attrs);
            for (int64_t i = 0; i < n; ++i)
                for (int64_t k = 0; k < world.config().n_attrs; ++k)
                    ds.attr_labels.at(i, k) = lfs[static_cast<size_t>(i)].attrs[static_cast<size_t>(k)];
            break;
        }
        default: break;
    }
    return ds;
}

void assign_splits(SyntheticDataset& ds, int64_t n_train, int64_t n_val, int64_t n_test,
                   Rng rng) {
    const int64_t units = ds.n_units();
    if (n_train + n_val + n_test > units)
        throw std::invalid_argument("assign_splits: counts exceed dataset size");
    std::vector<int64_t> idx(static_cast<size_t>(units));
    for (int64_t i = 0; i < units; ++i) idx[static_cast<size_t>(i)] = i;
    rng.shuffle(idx);
    ds.split_tags.assign(static_cast<size_t>(units), Split::train);
    for (int64_t i = 0; i < units; ++i) {
        Split s = i < n_train           ? Split::train
                  : i < n_train + n_val ? Split::val
                                        : Split::test;
        ds.split_tags[static_cast<size_t>(idx[static_cast<size_t>(i)])] = s;
    }
}

std::vector<int64_t> split_indices(const SyntheticDataset& ds, Split tag) {
    std::vector<int64_t> out;
    for (size_t i = 0; i < ds.split_tags.size(); ++i)
        if (ds.split_tags[i] == tag) out.push_back(static_cast<int64_t>(i));
    return out;
}

SyntheticDataset subset(const SyntheticDataset& ds, Split tag) {
    if (ds.split_tags.empty()) throw std::logic_error("subset: dataset has no split tags");
    SyntheticDataset out;
    out.has_labels = ds.has_labels;
    out.label_kind = ds.label_kind;
    out.domain_id = ds.domain_id;
    const std::vector<int64_t> units = split_indices(ds, tag);

    if (ds.has_labels && ds.label_kind == TaskKind::identity_pairs) {
        std::vector<int64_t> rows;
        for (int64_t u : units) {
            const PairExample& p = ds.pairs[static_cast<size_t>(u)];
            const int64_t base = static_cast<int64_t>(rows.size());
            rows.push_back(p.i);
            rows.push_back(p.j);
            out.pairs.push_back({base, base + 1, p.same});
            if (!ds.missing.empty()) out.missing.push_back(ds.missing[static_cast<size_t>(u)]);
        }
        out.x = take_rows(ds.x, rows);
        return out;
    }

    out.x = take_rows(ds.x, units);
    for (int64_t u : units) {
        if (!ds.class_labels.empty()) out.class_labels.push_back(ds.class_labels[static_cast<size_t>(u)]);
        if (!ds.reg_labels.empty()) out.reg_labels.push_back(ds.reg_labels[static_cast<size_t>(u)]);
        if (!ds.missing.empty()) out.missing.push_back(ds.missing[static_cast<size_t>(u)]);
    }
    if (ds.attr_labels.numel() > 0) out.attr_labels = take_rows(ds.attr_labels, units);
    return out;
}

}  // namespace omnifuse

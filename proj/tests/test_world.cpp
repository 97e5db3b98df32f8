#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "omnifuse/experts.hpp"
#include "omnifuse/world.hpp"

using namespace omnifuse;

namespace {

WorldConfig small_config() {
    WorldConfig cfg;
    cfg.n_classes = 4;
    cfg.n_attrs = 4;
    cfg.nuisance_dim = 4;
    cfg.obs_dim = 16;
    cfg.n_domains = 2;
    cfg.noise_sigma = 0.05;
    cfg.n_identities = 8;
    cfg.render_hidden = 24;
    cfg.id_code_dim = 4;
    return cfg;
}

bool tensors_equal(const Tensor& a, const Tensor& b) {
    return a.shape == b.shape && a.data == b.data;
}

}  // namespace

TEST_CASE("gen_world is reproducible and domains differ") {
    WorldConfig cfg = small_config();
    World w1 = gen_world(123, cfg);
    World w2 = gen_world(123, cfg);
    CHECK(tensors_equal(w1.domain(0).a1, w2.domain(0).a1));
    CHECK(tensors_equal(w1.domain(1).a2, w2.domain(1).a2));
    CHECK(tensors_equal(w1.identity_codes(), w2.identity_codes()));

    CHECK_FALSE(tensors_equal(w1.domain(0).a1, w1.domain(1).a1));
}

TEST_CASE("gen_world rejects invalid dims") {
    WorldConfig cfg = small_config();
    cfg.n_classes = 0;
    CHECK_THROWS_AS(gen_world(1, cfg), std::invalid_argument);
}

TEST_CASE("noise=0 renders are bit-identical across repeats") {
    WorldConfig cfg = small_config();
    cfg.noise_sigma = 0.0;
    World w = gen_world(5, cfg);
    Rng r1(77), r2(99);  // different noise streams must not matter at sigma 0
    LatentFactor lf = w.sample_latent(r1);
    Tensor x1 = w.render({lf}, 0, r1);
    Tensor x2 = w.render({lf}, 0, r2);
    CHECK(tensors_equal(x1, x2));
}

TEST_CASE("sample_unsup has observations only") {
    World w = gen_world(9, small_config());
    SyntheticDataset ds = sample_unsup(w, 1, 0, Rng(1));
    CHECK(ds.n_rows() == 1);
    CHECK_FALSE(ds.has_labels);
    CHECK(ds.class_labels.empty());
    CHECK(ds.reg_labels.empty());

    CHECK_THROWS_AS(sample_unsup(w, 5, 7, Rng(1)), std::invalid_argument);
    CHECK_THROWS_AS(sample_unsup(w, 0, 0, Rng(1)), std::invalid_argument);
}

TEST_CASE("sample_unsup outputs live in tanh range and means are interior") {
    World w = gen_world(10, small_config());
    SyntheticDataset ds = sample_unsup(w, 1000, 0, Rng(2));
    for (int64_t j = 0; j < ds.x.cols(); ++j) {
        double mean = 0.0;
        for (int64_t i = 0; i < ds.x.rows(); ++i) {
            CHECK(ds.x.at(i, j) > -1.0);
            CHECK(ds.x.at(i, j) < 1.0);
            mean += ds.x.at(i, j);
        }
        mean /= static_cast<double>(ds.x.rows());
        CHECK(mean > -1.0);
        CHECK(mean < 1.0);
    }
}

TEST_CASE("disjoint rng streams give disjoint samples") {
    World w = gen_world(11, small_config());
    SyntheticDataset a = sample_unsup(w, 64, 0, Rng(1).split("a"));
    SyntheticDataset b = sample_unsup(w, 64, 0, Rng(1).split("b"));
    for (int64_t i = 0; i < a.n_rows(); ++i)
        for (int64_t j = 0; j < b.n_rows(); ++j) {
            bool identical = true;
            for (int64_t c = 0; c < a.x.cols() && identical; ++c)
                identical = a.x.at(i, c) == b.x.at(j, c);
            CHECK_FALSE(identical);
        }
}

TEST_CASE("regression labels equal latent age under zero noise") {
    WorldConfig cfg = small_config();
    cfg.noise_sigma = 0.0;
    World w = gen_world(12, cfg);
    TaskSpec age{"age", TaskKind::regression, LabelSource::age, 1, MetricKind::mae, 0.0, 100.0};
    SyntheticDataset ds = sample_task(w, age, 50, 0, Rng(3));
    for (double y : ds.reg_labels) {
        CHECK(y >= 0.0);
        CHECK(y <= 100.0);
    }
    // re-rendering the same seed with a different noise level keeps labels
    cfg.noise_sigma = 0.3;
    World w2 = gen_world(12, cfg);
    SyntheticDataset ds2 = sample_task(w2, age, 50, 0, Rng(3));
    CHECK(ds.reg_labels == ds2.reg_labels);
    CHECK_FALSE(tensors_equal(ds.x, ds2.x));
}

TEST_CASE("classification labels are near-uniform under uniform prior") {
    World w = gen_world(13, small_config());
    TaskSpec cls{"cls", TaskKind::classification, LabelSource::class_label, 4,
                 MetricKind::accuracy};
    SyntheticDataset ds = sample_task(w, cls, 10000, 0, Rng(4));
    std::vector<int64_t> counts(4, 0);
    for (int c : ds.class_labels) ++counts[static_cast<size_t>(c)];
    for (int64_t c : counts) {
        const double frac = static_cast<double>(c) / 10000.0;
        CHECK(frac > 0.25 - 0.05);
        CHECK(frac < 0.25 + 0.05);
    }
}

TEST_CASE("identity pairs: same-id pairs are labeled match and balanced") {
    World w = gen_world(14, small_config());
    TaskSpec pairs{"pairs", TaskKind::identity_pairs, LabelSource::identity, 2,
                   MetricKind::pair_accuracy};
    SyntheticDataset ds = sample_task(w, pairs, 40, 0, Rng(5));
    CHECK(ds.pairs.size() == 40);
    CHECK(ds.n_rows() == 80);
    int64_t same = 0;
    for (const PairExample& p : ds.pairs) {
        if (p.same) ++same;
        CHECK(p.i != p.j);
    }
    CHECK(same == 20);

    WorldConfig bad = small_config();
    bad.n_identities = 1;
    World w1 = gen_world(15, bad);
    CHECK_THROWS_AS(sample_task(w1, pairs, 10, 0, Rng(6)), std::invalid_argument);
}

TEST_CASE("split tags partition units") {
    World w = gen_world(16, small_config());
    SyntheticDataset ds = sample_unsup(w, 100, 0, Rng(7));
    assign_splits(ds, 60, 20, 20, Rng(8));
    CHECK(split_indices(ds, Split::train).size() == 60);
    CHECK(split_indices(ds, Split::val).size() == 20);
    CHECK(split_indices(ds, Split::test).size() == 20);
    SyntheticDataset tr = subset(ds, Split::train);
    CHECK(tr.n_rows() == 60);
    CHECK_THROWS_AS(assign_splits(ds, 90, 20, 20, Rng(9)), std::invalid_argument);
}

TEST_CASE("experts beat chance on the desk world") {
    WorldConfig cfg = small_config();
    cfg.noise_sigma = 0.02;
    World w = gen_world(17, cfg);
    TaskSpec cls{"cls", TaskKind::classification, LabelSource::class_label, 4,
                 MetricKind::accuracy};
    ExpertSpec spec;
    spec.task = cls;
    spec.embed_dim = 4;
    spec.hidden = {48, 48};
    spec.train_n = 500;
    spec.val_n = 200;
    spec.epochs = 12;
    ExpertBank bank = train_experts(w, {spec}, 0, Rng(18));
    REQUIRE(bank.size() == 1);
    const Expert& e = bank.experts[0];
    CHECK_FALSE(e.weak);
    CHECK(e.val_metric > 1.0 / 4.0 + 0.2);  // comfortably above chance

    SUBCASE("embedding width follows the spec") {
        SyntheticDataset ds = sample_unsup(w, 10, 0, Rng(19));
        EmbeddingSet emb = extract_embeddings(bank, ds.x);
        CHECK(emb.modalities.size() == 1);
        CHECK(emb.modalities[0].matrix.cols() == 4);
    }
}

TEST_CASE("expert training is deterministic under equal seeds") {
    World w = gen_world(20, small_config());
    ExpertSpec spec;
    spec.task = TaskSpec{"flag", TaskKind::classification, LabelSource::attr_bit, 2,
                         MetricKind::accuracy};
    spec.embed_dim = 6;
    spec.hidden = {32};
    spec.train_n = 200;
    spec.val_n = 100;
    spec.epochs = 3;
    ExpertBank b1 = train_experts(w, {spec}, 0, Rng(21));
    ExpertBank b2 = train_experts(w, {spec}, 0, Rng(21));
    CHECK(b1.params_hash() == b2.params_hash());
}

TEST_CASE("extraction is pure and widths concatenate") {
    World w = gen_world(22, small_config());
    std::vector<ExpertSpec> specs;
    const int64_t dims[] = {12, 64, 16, 4, 12, 64};
    for (int i = 0; i < 6; ++i) {
        ExpertSpec s;
        s.task = TaskSpec{"t" + std::to_string(i), TaskKind::classification,
                          LabelSource::class_label, 4, MetricKind::accuracy};
        s.embed_dim = dims[i];
        s.hidden = {16};
        s.train_n = 60;
        s.val_n = 30;
        s.epochs = 1;
        specs.push_back(s);
    }
    ExpertBank bank = train_experts(w, specs, 0, Rng(23));
    SyntheticDataset ds = sample_unsup(w, 20, 0, Rng(24));
    EmbeddingSet e1 = extract_embeddings(bank, ds.x);
    EmbeddingSet e2 = extract_embeddings(bank, ds.x);
    CHECK(e1.total_width() == 172);
    for (size_t m = 0; m < e1.modalities.size(); ++m)
        CHECK(tensors_equal(e1.modalities[m].matrix, e2.modalities[m].matrix));

    SUBCASE("empty input gives empty matrices with correct widths") {
        EmbeddingSet e0 = extract_embeddings(bank, Tensor::matrix(0, w.config().obs_dim));
        CHECK(e0.modalities.size() == 6);
        for (size_t m = 0; m < e0.modalities.size(); ++m) {
            CHECK(e0.modalities[m].matrix.rows() == 0);
            CHECK(e0.modalities[m].matrix.cols() == dims[m]);
        }
    }
}

TEST_CASE("domain shift degrades a linear probe (majority of seeds)") {
    int wins = 0;
    for (uint64_t seed = 1; seed <= 5; ++seed) {
        WorldConfig cfg = small_config();
        World w = gen_world(100 + seed, cfg);
        TaskSpec cls{"cls", TaskKind::classification, LabelSource::class_label, 4,
                     MetricKind::accuracy};
        ExpertSpec spec;
        spec.task = cls;
        spec.embed_dim = 8;
        spec.hidden = {32};
        spec.train_n = 400;
        spec.val_n = 100;
        spec.epochs = 8;
        ExpertBank bank = train_experts(w, {spec}, 0, Rng(200 + seed));

        Rng rng(300 + seed);
        SyntheticDataset d0 = sample_task(w, cls, 600, 0, rng.split("d0"));
        assign_splits(d0, 400, 0, 200, rng.split("s0"));
        SyntheticDataset d0tr = subset(d0, Split::train);
        SyntheticDataset d0te = subset(d0, Split::test);
        SyntheticDataset d1 = sample_task(w, cls, 200, 1, rng.split("d1"));

        EmbeddingSet etr = extract_embeddings(bank, d0tr.x);
        EmbeddingSet ete = extract_embeddings(bank, d0te.x);
        EmbeddingSet e1 = extract_embeddings(bank, d1.x);

        Rng probe_rng = rng.split("probe");
        Sequential probe = make_mlp(8, {}, 4, Activation::identity, Activation::identity,
                                    probe_rng, "probe");
        FitOpts opts;
        opts.epochs = 20;
        SupervisedData data = make_supervised(cls, d0tr, etr.concat());
        fit_supervised(nullptr, probe, data, opts, rng.split("fit"));
        const double acc_same = score_supervised(nullptr, probe, cls, d0te, ete.concat());
        const double acc_shift = score_supervised(nullptr, probe, cls, d1, e1.concat());
        if (acc_shift < acc_same) ++wins;
    }
    CHECK(wins >= 3);
}

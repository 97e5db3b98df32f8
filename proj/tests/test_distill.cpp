#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "omnifuse/distill.hpp"

using namespace omnifuse;

namespace {

Tensor random_matrix(int64_t r, int64_t c, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t = Tensor::matrix(r, c);
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

Tensor vec(std::vector<double> v) {
    const int64_t n = static_cast<int64_t>(v.size());
    return Tensor({n}, std::move(v));
}

}  // namespace

TEST_CASE("cosine distance basics") {
    CHECK(cosine_distance(vec({1, 2, 3}), vec({1, 2, 3})) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(cosine_distance(vec({1, 0}), vec({0, 1})) == doctest::Approx(1.0));
    CHECK(cosine_distance(vec({1, 0}), vec({1, 1})) ==
          doctest::Approx(1.0 - std::sqrt(2.0) / 2.0).epsilon(1e-12));
    CHECK(cosine_distance(vec({1, 0}), vec({-1, 0})) == doctest::Approx(2.0));
}

TEST_CASE("cosine distance zero-norm policy") {
    CosineDiagnostics diag;
    CHECK(cosine_distance(vec({0, 0}), vec({1, 2}), &diag) == 1.0);
    CHECK(diag.zero_norm_count == 1);
    CHECK(cosine_distance(vec({1, 2}), vec({0, 0}), &diag) == 1.0);
    CHECK(diag.zero_norm_count == 2);
}

TEST_CASE("cosine distance properties") {
    Rng rng(1);
    for (int trial = 0; trial < 25; ++trial) {
        Tensor a = random_matrix(1, 6, rng);
        Tensor b = random_matrix(1, 6, rng);
        const double d = cosine_distance(a, b);
        CHECK(d >= 0.0);
        CHECK(d <= 2.0);
        CHECK(cosine_distance(b, a) == doctest::Approx(d).epsilon(1e-12));

        const double alpha = rng.uniform(0.1, 5.0), beta = rng.uniform(0.1, 5.0);
        Tensor sa = a, sb = b;
        scale_inplace(sa, alpha);
        scale_inplace(sb, beta);
        CHECK(cosine_distance(sa, sb) == doctest::Approx(d).epsilon(1e-12));
    }
}

namespace {

// a fully linear teacher over a random pool: one affine expert encoder plus
// a pca fusion; the composed map is affine, so an affine student can match
// it almost exactly (clamping only bites on rare out-of-range val samples)
struct LinearTeacherFixture {
    ExpertBank bank;
    Rescaler rescaler;
    FusionOperator fusion;
    Tensor pool_train, pool_val;

    LinearTeacherFixture() {
        Rng rng(42);
        pool_train = random_matrix(400, 8, rng);
        pool_val = random_matrix(100, 8, rng);

        Expert e;
        e.spec.task.name = "lin";
        e.spec.embed_dim = 6;
        Rng enc_rng = rng.split("enc");
        e.encoder = make_mlp(8, {}, 6, Activation::identity, Activation::identity, enc_rng,
                             "lin.enc");
        e.head = make_mlp(6, {}, 2, Activation::identity, Activation::identity, enc_rng,
                          "lin.head");
        bank.experts.push_back(std::move(e));

        EmbeddingSet raw = extract_embeddings(bank, pool_train);
        rescaler = Rescaler::fit(raw);
        Tensor x = rescaler.apply(raw).concat();
        fusion = fit_pca(x, 4);
    }

    Teacher teacher() const { return Teacher{&bank, &rescaler, &fusion}; }
};

}  // namespace

TEST_CASE("distillation with epochs=0 leaves the student unchanged") {
    LinearTeacherFixture fx;
    StudentConfig scfg;
    scfg.hidden = {16};
    StudentEncoder student = make_student(8, 4, scfg, Rng(7));
    const uint64_t before = student.hash();
    DistillConfig cfg;
    cfg.epochs = 0;
    DistillHistory hist = distill_train(student, fx.teacher(), fx.pool_train, fx.pool_val,
                                        cfg, Rng(8));
    CHECK(student.hash() == before);
    CHECK(hist.final_val_distance == hist.initial_val_distance);
}

TEST_CASE("affine student matches an affine teacher to < 0.05 held-out distance") {
    LinearTeacherFixture fx;
    StudentConfig scfg;
    scfg.hidden = {16};
    scfg.hidden_act = Activation::identity;
    StudentEncoder student = make_student(8, 4, scfg, Rng(9));
    DistillConfig cfg;
    cfg.epochs = 60;
    cfg.lr = 3e-3;
    DistillHistory hist = distill_train(student, fx.teacher(), fx.pool_train, fx.pool_val,
                                        cfg, Rng(10));
    CHECK(hist.final_val_distance < 0.05);
    CHECK(hist.final_val_distance <= hist.initial_val_distance);
}

TEST_CASE("distillation never mutates the teacher") {
    LinearTeacherFixture fx;
    Teacher t = fx.teacher();
    const uint64_t before = t.params_hash();
    StudentConfig scfg;
    scfg.hidden = {12};
    StudentEncoder student = make_student(8, 4, scfg, Rng(11));
    DistillConfig cfg;
    cfg.epochs = 3;
    distill_train(student, t, fx.pool_train, fx.pool_val, cfg, Rng(12));
    CHECK(t.params_hash() == before);
}

TEST_CASE("mt model with epochs=0 is untouched and loss decreases when trained") {
    Rng rng(13);
    Tensor pool = random_matrix(300, 8, rng);
    Tensor targets = random_matrix(300, 10, rng);
    Tensor pool_val = random_matrix(60, 8, rng);
    Tensor targets_val = random_matrix(60, 10, rng);
    StudentConfig scfg;
    scfg.hidden = {24};
    MtModel mt = make_mt_model(8, 4, {8}, 10, scfg, Rng(14));
    const uint64_t before = mt.hash();

    DistillConfig cfg;
    cfg.epochs = 0;
    MtHistory h0 = mt_train(mt, pool, targets, pool_val, targets_val, cfg, Rng(15));
    CHECK(mt.hash() == before);
    CHECK(h0.epoch_loss.empty());

    cfg.epochs = 10;
    MtHistory h = mt_train(mt, pool, targets, pool_val, targets_val, cfg, Rng(15));
    CHECK(mt.hash() != before);
    CHECK(h.epoch_loss.back() < h.epoch_loss.front());
}

TEST_CASE("mt objective equals distillation-through-the-fusion-decoder on shared params") {
    // freeze the mt decoder at the fusion decoder's weights; the mt training
    // objective must then equal the fusion loss computed through the fusion
    // module's own decode path
    Rng rng(16);
    Tensor x = random_matrix(50, 12, rng);
    AeConfig acfg;
    acfg.latent = 4;
    acfg.hidden = {8};
    acfg.epochs = 5;
    FusionOperator op = fit_autoencoder(FusionKind::ae, x, x, acfg, Rng(17), {7, 5},
                                        {"a", "b"});

    Tensor pool = random_matrix(40, 6, rng);
    StudentConfig scfg;
    scfg.hidden = {10};
    MtModel mt = make_mt_model(6, 4, {8}, 12, scfg, Rng(18));
    mt.decoder = op.decoder();  // parameter-identical decoders

    Tensor targets = random_matrix(40, 12, rng);
    const double via_mt = mt_loss_eval(mt, pool, targets);

    Tensor h_s = mt.backbone.forward(pool);
    EmbeddingSet recon = op.decode_modalities(h_s);
    EmbeddingSet target_set = EmbeddingSet::split_concat(targets, {7, 5}, {"a", "b"});
    const double via_fusion = fusion_loss(recon, target_set);
    CHECK(via_mt == doctest::Approx(via_fusion).epsilon(1e-10));
}

TEST_CASE("student encoding is pure and batch-consistent") {
    Rng rng(19);
    StudentConfig scfg;
    scfg.hidden = {16};
    StudentEncoder student = make_student(8, 4, scfg, Rng(20));
    Tensor batch = random_matrix(6, 8, rng);
    Tensor full = student.encode(batch);
    CHECK(full.data == student.encode(batch).data);
    CHECK(full.cols() == 4);
    for (int64_t i = 0; i < batch.rows(); ++i) {
        Tensor row = take_rows(batch, {i});
        Tensor single = student.encode(row);
        for (int64_t j = 0; j < 4; ++j)
            CHECK(single.at(0, j) == full.at(i, j));
    }
}

TEST_CASE("conv student builds and encodes in image mode") {
    StudentConfig scfg;
    scfg.conv_mode = true;
    scfg.image_side = 16;
    StudentEncoder student = make_student(256, 8, scfg, Rng(21));
    Rng rng(22);
    Tensor x = random_matrix(3, 256, rng);
    Tensor h = student.encode(x);
    CHECK(h.rows() == 3);
    CHECK(h.cols() == 8);
    CHECK_THROWS_AS(make_student(100, 8, scfg, Rng(23)), std::invalid_argument);
}

TEST_CASE("compression ratio of identical models is 1 and desk default exceeds 10") {
    CHECK(compression_ratio(90656, 90656) == 1.0);

    // architecture-only bank (epochs 0): parameter counts do not depend on
    // training
    WorldConfig wcfg;
    World w = gen_world(1, wcfg);
    std::vector<ExpertSpec> specs = default_expert_specs(wcfg);
    for (ExpertSpec& s : specs) {
        s.epochs = 0;
        s.train_n = 40;
        s.val_n = 20;
    }
    ExpertBank bank = train_experts(w, specs, 0, Rng(24));

    SyntheticDataset pool = sample_unsup(w, 64, 0, Rng(25));
    EmbeddingSet raw = extract_embeddings(bank, pool.x);
    Rescaler rescaler = Rescaler::fit(raw);
    Tensor x = rescaler.apply(raw).concat();
    const int64_t d_e = latent_dim_rule(bank.embed_dims());
    CHECK(d_e == 32);
    AeConfig acfg;
    acfg.latent = d_e;
    acfg.hidden = plan_layers(x.cols(), d_e, 3);
    acfg.epochs = 0;
    FusionOperator op = fit_autoencoder(FusionKind::ae, x, x, acfg, Rng(26), raw.widths(),
                                        raw.names());

    Teacher teacher{&bank, &rescaler, &op};
    StudentEncoder student = make_student(wcfg.obs_dim, d_e, StudentConfig{}, Rng(27));
    CHECK(student.n_params() < teacher.encoder_param_count());
    const double ratio = compression_ratio(teacher.encoder_param_count(), student.n_params());
    CHECK(ratio >= 10.0);
    MESSAGE("desk compression ratio: ", ratio, " (teacher ", teacher.encoder_param_count(),
            ", student ", student.n_params(), ")");
}

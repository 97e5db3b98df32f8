#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "omnifuse/fusion.hpp"
#include "omnifuse/rescale.hpp"
#include "omnifuse/rng.hpp"

using namespace omnifuse;

namespace {

Tensor random_matrix(int64_t r, int64_t c, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t = Tensor::matrix(r, c);
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

// test-local spectral oracle: power iteration with deflation on a symmetric
// matrix, independent of the library's Jacobi path
std::vector<double> power_iteration_eigenvalues(Tensor a, int64_t k, Tensor* vectors = nullptr) {
    const int64_t n = a.rows();
    std::vector<double> vals;
    if (vectors) *vectors = Tensor::matrix(n, k);
    Rng rng(12345);
    for (int64_t c = 0; c < k; ++c) {
        std::vector<double> v(static_cast<size_t>(n));
        for (double& x : v) x = rng.normal();
        double lambda = 0.0;
        for (int iter = 0; iter < 5000; ++iter) {
            std::vector<double> w(static_cast<size_t>(n), 0.0);
            for (int64_t i = 0; i < n; ++i)
                for (int64_t j = 0; j < n; ++j) w[static_cast<size_t>(i)] += a.at(i, j) * v[static_cast<size_t>(j)];
            double norm = 0.0;
            for (double x : w) norm += x * x;
            norm = std::sqrt(norm);
            if (norm == 0.0) break;
            for (size_t i = 0; i < w.size(); ++i) w[i] /= norm;
            double diff = 0.0;
            for (size_t i = 0; i < w.size(); ++i) diff += std::fabs(w[i] - v[i]);
            v = w;
            lambda = norm;
            if (diff < 1e-14 && iter > 10) break;
        }
        vals.push_back(lambda);
        if (vectors)
            for (int64_t i = 0; i < n; ++i) vectors->at(i, c) = v[static_cast<size_t>(i)];
        // deflate
        for (int64_t i = 0; i < n; ++i)
            for (int64_t j = 0; j < n; ++j)
                a.at(i, j) -= lambda * v[static_cast<size_t>(i)] * v[static_cast<size_t>(j)];
    }
    return vals;
}

Tensor covariance(const Tensor& x) {
    const int64_t n = x.rows(), d = x.cols();
    Tensor mean = Tensor::matrix(1, d);
    for (int64_t j = 0; j < d; ++j) {
        double m = 0.0;
        for (int64_t i = 0; i < n; ++i) m += x.at(i, j);
        mean.at(0, j) = m / static_cast<double>(n);
    }
    Tensor c = Tensor::matrix(d, d);
    for (int64_t i = 0; i < n; ++i)
        for (int64_t a = 0; a < d; ++a)
            for (int64_t b = 0; b < d; ++b)
                c.at(a, b) += (x.at(i, a) - mean.at(0, a)) * (x.at(i, b) - mean.at(0, b));
    scale_inplace(c, 1.0 / static_cast<double>(n));
    return c;
}

double recon_error_per_sample(const FusionOperator& op, const Tensor& x) {
    Tensor recon = op.decode(op.encode(x));
    return sum_sq_diff(recon, x) / static_cast<double>(x.rows());
}

EmbeddingSet two_modality_set(const Tensor& a, const Tensor& b) {
    EmbeddingSet e;
    e.modalities.push_back({"a", a});
    e.modalities.push_back({"b", b});
    return e;
}

}  // namespace

TEST_CASE("rescaler maps fit extremes to -1/+1 and midpoint to 0") {
    EmbeddingSet e;
    e.modalities.push_back({"m", Tensor({3, 1}, {0.0, 10.0, 5.0})});
    Rescaler r = Rescaler::fit(e);
    EmbeddingSet out = r.apply(e);
    CHECK(out.modalities[0].matrix.at(0, 0) == -1.0);
    CHECK(out.modalities[0].matrix.at(1, 0) == 1.0);
    CHECK(out.modalities[0].matrix.at(2, 0) == 0.0);
}

TEST_CASE("rescaler maps constant dimensions to zero") {
    EmbeddingSet e;
    e.modalities.push_back({"m", Tensor({3, 2}, {4.0, 1.0, 4.0, 2.0, 4.0, 3.0})});
    Rescaler r = Rescaler::fit(e);
    EmbeddingSet out = r.apply(e);
    for (int64_t i = 0; i < 3; ++i) CHECK(out.modalities[0].matrix.at(i, 0) == 0.0);
}

TEST_CASE("rescaler clamps unseen values at +-1.5") {
    EmbeddingSet fit;
    fit.modalities.push_back({"m", Tensor({2, 1}, {0.0, 10.0})});
    Rescaler r = Rescaler::fit(fit);
    EmbeddingSet probe;
    probe.modalities.push_back({"m", Tensor({2, 1}, {12.0, 30.0})});
    EmbeddingSet out = r.apply(probe);
    CHECK(out.modalities[0].matrix.at(0, 0) == doctest::Approx(1.4).epsilon(1e-12));
    CHECK(out.modalities[0].matrix.at(1, 0) == 1.5);
}

TEST_CASE("rescaler on its own fit set stays within [-1, 1]") {
    Rng rng(1);
    EmbeddingSet e = two_modality_set(random_matrix(40, 5, rng, -3.0, 7.0),
                                      random_matrix(40, 3, rng, 100.0, 200.0));
    Rescaler r = Rescaler::fit(e);
    EmbeddingSet out = r.apply(e);
    for (const auto& m : out.modalities)
        for (double v : m.matrix.data) {
            CHECK(v >= -1.0);
            CHECK(v <= 1.0);
        }
}

TEST_CASE("unfitted rescaler refuses to apply") {
    Rescaler r;
    EmbeddingSet e;
    e.modalities.push_back({"m", Tensor({1, 1}, {0.0})});
    CHECK_THROWS_AS(r.apply(e), std::logic_error);
}

TEST_CASE("latent dim rule") {
    CHECK(latent_dim_rule({376, 2048, 512, 128, 376, 2048}) == 1024);
    CHECK(latent_dim_rule({8, 8, 8}) == 8);
    CHECK(latent_dim_rule({10}) == 16);
    CHECK(latent_dim_rule({12, 64, 16, 4, 12, 64}) == 32);
    CHECK_THROWS_AS(latent_dim_rule({}), std::invalid_argument);
}

TEST_CASE("plan_layers reproduces the reference widths") {
    CHECK(plan_layers(5488, 1024, 3) == std::vector<int64_t>{3136, 1792});
    CHECK(plan_layers(100, 10, 1).empty());
    CHECK(plan_layers(256, 32, 3) == std::vector<int64_t>{128, 64});
    CHECK_THROWS_AS(plan_layers(64, 64, 2), std::invalid_argument);
}

TEST_CASE("plan_layers output is strictly decreasing inside (latent, input)") {
    const int64_t cases[][3] = {{172, 32, 3}, {500, 16, 4}, {64, 8, 3}, {1000, 2, 5}, {24, 8, 3}};
    for (const auto& c : cases) {
        std::vector<int64_t> plan = plan_layers(c[0], c[1], c[2]);
        int64_t prev = c[0];
        for (int64_t s : plan) {
            CHECK(s < prev);
            CHECK(s > c[1]);
            prev = s;
        }
    }
}

TEST_CASE("pca with k=D reconstructs exactly") {
    Rng rng(2);
    Tensor x = random_matrix(30, 6, rng);
    FusionOperator op = fit_pca(x, 6);
    CHECK(recon_error_per_sample(op, x) < 1e-10);
}

TEST_CASE("pca on rank-1 data needs one component") {
    Rng rng(3);
    Tensor x = Tensor::matrix(25, 4);
    for (int64_t i = 0; i < 25; ++i) {
        const double t = rng.uniform(-2.0, 2.0);
        for (int64_t j = 0; j < 4; ++j) x.at(i, j) = t * static_cast<double>(j + 1) + 0.5;
    }
    FusionOperator op = fit_pca(x, 1);
    CHECK(recon_error_per_sample(op, x) < 1e-10);
}

TEST_CASE("pca on the isotropic 4-point square: k=1 error is 1 per sample") {
    Tensor x({4, 2}, {1, 1, -1, -1, 1, -1, -1, 1});
    FusionOperator op = fit_pca(x, 1);
    CHECK(recon_error_per_sample(op, x) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("pca error equals discarded eigenvalue mass (independent oracle)") {
    Rng rng(4);
    // correlated data so the spectrum decays
    Tensor base = random_matrix(50, 3, rng);
    Tensor mix = random_matrix(3, 12, rng);
    Tensor x = matmul(base, mix);
    for (double& v : x.data) v += 0.05 * rng.normal();

    Tensor cov = covariance(x);
    double trace = 0.0;
    for (int64_t j = 0; j < cov.rows(); ++j) trace += cov.at(j, j);
    std::vector<double> oracle_evals = power_iteration_eigenvalues(cov, 12);

    double last_err = 1e300;
    for (int64_t k = 1; k <= 12; ++k) {
        FusionOperator op = fit_pca(x, k);
        const double err = recon_error_per_sample(op, x);
        double retained = 0.0;
        for (int64_t j = 0; j < k; ++j) retained += oracle_evals[static_cast<size_t>(j)];
        CHECK(err == doctest::Approx(trace - retained).epsilon(1e-8));
        CHECK(err <= last_err + 1e-12);  // monotone nonincreasing in k
        last_err = err;
    }
}

TEST_CASE("pca projection agrees with the oracle subspace") {
    Rng rng(5);
    Tensor base = random_matrix(40, 2, rng);
    Tensor mix = random_matrix(2, 7, rng);
    Tensor x = matmul(base, mix);
    for (double& v : x.data) v += 0.02 * rng.normal();

    Tensor cov = covariance(x);
    Tensor oracle_vecs;
    power_iteration_eigenvalues(cov, 2, &oracle_vecs);

    FusionOperator op = fit_pca(x, 2);
    // compare reconstructions (projection is basis-independent)
    Tensor ours = op.decode(op.encode(x));
    Tensor mean = op.pca_mean();
    Tensor centered = x;
    for (int64_t i = 0; i < x.rows(); ++i)
        for (int64_t j = 0; j < x.cols(); ++j) centered.at(i, j) -= mean.at(0, j);
    Tensor proj = matmul(matmul(centered, oracle_vecs), transpose(oracle_vecs));
    for (int64_t i = 0; i < x.rows(); ++i)
        for (int64_t j = 0; j < x.cols(); ++j) proj.at(i, j) += mean.at(0, j);
    CHECK(sum_sq_diff(ours, proj) / static_cast<double>(x.numel()) < 1e-10);
}

TEST_CASE("pca rejects k out of range; accepts degenerate input") {
    Rng rng(6);
    Tensor x = random_matrix(10, 4, rng);
    CHECK_THROWS_AS(fit_pca(x, 5), std::invalid_argument);
    CHECK_THROWS_AS(fit_pca(x, 0), std::invalid_argument);
    Tensor flat = Tensor::matrix(10, 4);
    flat.fill(2.0);
    FusionOperator op = fit_pca(flat, 2);
    CHECK(recon_error_per_sample(op, flat) < 1e-20);
}

TEST_CASE("concat operator is an exact identity round trip") {
    Rng rng(7);
    Tensor x = random_matrix(9, 9, rng);
    FusionOperator op = make_concat_operator({4, 5}, {"a", "b"});
    CHECK(op.latent_dim() == 9);
    Tensor h = op.encode(x);
    CHECK(h.data == x.data);
    Tensor back = op.decode(h);
    CHECK(back.data == x.data);
    EmbeddingSet mods = op.decode_modalities(h);
    CHECK(mods.modalities[0].matrix.cols() == 4);
    CHECK(mods.modalities[1].matrix.cols() == 5);
}

TEST_CASE("autoencoder with epochs=0 equals its initialization") {
    Rng rng(8);
    Tensor x = random_matrix(40, 10, rng);
    AeConfig cfg;
    cfg.latent = 3;
    cfg.hidden = {8};
    cfg.epochs = 0;
    FusionOperator a = fit_autoencoder(FusionKind::ae, x, x, cfg, Rng(99));
    cfg.epochs = 5;
    FusionOperator b = fit_autoencoder(FusionKind::ae, x, x, cfg, Rng(99));
    // same init seed: the untrained operator matches b's starting point
    CHECK(a.initial_val_loss() == b.initial_val_loss());
    CHECK(a.final_val_loss() == a.initial_val_loss());
    // and a trained operator moved away from it
    CHECK(b.final_val_loss() < b.initial_val_loss());
}

TEST_CASE("encode output width is the latent dim for every kind") {
    Rng rng(9);
    Tensor x = random_matrix(64, 12, rng);
    AeConfig cfg;
    cfg.latent = 4;
    cfg.hidden = {8};
    cfg.epochs = 2;
    for (FusionKind kind : {FusionKind::ae, FusionKind::vae, FusionKind::dae}) {
        FusionOperator op = fit_autoencoder(kind, x, x, cfg, Rng(100));
        CHECK(op.encode(x).cols() == 4);
        CHECK(op.decode(op.encode(x)).cols() == 12);
    }
    CHECK(fit_pca(x, 4).encode(x).cols() == 4);
}

TEST_CASE("linear autoencoder converges to the pca optimum") {
    Rng rng(10);
    Tensor base = random_matrix(40, 3, rng);
    Tensor mix = random_matrix(3, 6, rng);
    Tensor x = matmul(base, mix);
    for (double& v : x.data) v += 0.05 * rng.normal();

    FusionOperator pca = fit_pca(x, 2);
    const double pca_err = recon_error_per_sample(pca, x);

    AeConfig cfg;
    cfg.latent = 2;
    cfg.hidden = {};
    cfg.epochs = 600;
    cfg.lr = 0.01;
    cfg.batch = 40;
    cfg.hidden_act = Activation::identity;
    FusionOperator ae = fit_autoencoder(FusionKind::ae, x, x, cfg, Rng(101));
    const double ae_err = recon_error_per_sample(ae, x);
    CHECK(ae_err >= pca_err - 1e-9);  // pca is the linear optimum
    CHECK(ae_err <= 1.1 * pca_err);
}

TEST_CASE("dae with zero corruption reproduces the ae exactly") {
    Rng rng(11);
    Tensor x = random_matrix(48, 8, rng);
    AeConfig cfg;
    cfg.latent = 3;
    cfg.hidden = {6};
    cfg.epochs = 4;
    cfg.noise_sigma = 0.0;
    FusionOperator ae = fit_autoencoder(FusionKind::ae, x, x, cfg, Rng(200));
    FusionOperator dae = fit_autoencoder(FusionKind::dae, x, x, cfg, Rng(200));
    CHECK(ae.params_hash() == dae.params_hash());
    CHECK(ae.final_val_loss() == dae.final_val_loss());

    cfg.noise_sigma = 0.2;
    FusionOperator noisy = fit_autoencoder(FusionKind::dae, x, x, cfg, Rng(200));
    CHECK(noisy.params_hash() != ae.params_hash());
}

TEST_CASE("every operator kind improves or holds validation loss on 32+ samples") {
    Rng rng(12);
    Tensor base = random_matrix(64, 4, rng);
    Tensor mix = random_matrix(4, 10, rng);
    Tensor x = matmul(base, mix);
    scale_inplace(x, 0.25);
    Tensor xv = take_rows(x, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15});
    AeConfig cfg;
    cfg.latent = 4;
    cfg.hidden = {8};
    cfg.epochs = 15;
    for (FusionKind kind : {FusionKind::ae, FusionKind::vae, FusionKind::dae}) {
        FusionOperator op = fit_autoencoder(kind, x, xv, cfg, Rng(300));
        CHECK(op.final_val_loss() <= op.initial_val_loss());
    }
}

TEST_CASE("vae encodes deterministically at inference") {
    Rng rng(13);
    Tensor x = random_matrix(32, 8, rng);
    AeConfig cfg;
    cfg.latent = 3;
    cfg.hidden = {6};
    cfg.epochs = 3;
    FusionOperator op = fit_autoencoder(FusionKind::vae, x, x, cfg, Rng(400));
    Tensor h1 = op.encode(x);
    Tensor h2 = op.encode(x);
    CHECK(h1.data == h2.data);
}

TEST_CASE("fusion loss examples") {
    SUBCASE("identical sets give zero") {
        Rng rng(14);
        Tensor a = random_matrix(5, 3, rng);
        Tensor b = random_matrix(5, 2, rng);
        EmbeddingSet e = two_modality_set(a, b);
        CHECK(fusion_loss(e, e) == 0.0);
    }

    SUBCASE("single modality, single sample") {
        EmbeddingSet recon, target;
        recon.modalities.push_back({"m", Tensor({1, 1}, {0.0})});
        target.modalities.push_back({"m", Tensor({1, 1}, {0.5})});
        CHECK(fusion_loss(recon, target) == doctest::Approx(0.25).epsilon(1e-15));
    }

    SUBCASE("loss adds across modalities") {
        Rng rng(15);
        Tensor ra = random_matrix(4, 3, rng), rb = random_matrix(4, 2, rng);
        Tensor ta = random_matrix(4, 3, rng), tb = random_matrix(4, 2, rng);
        EmbeddingSet ea = two_modality_set(ra, rb);
        EmbeddingSet et = two_modality_set(ta, tb);
        EmbeddingSet only_a_r, only_a_t, only_b_r, only_b_t;
        only_a_r.modalities.push_back({"a", ra});
        only_a_t.modalities.push_back({"a", ta});
        only_b_r.modalities.push_back({"b", rb});
        only_b_t.modalities.push_back({"b", tb});
        CHECK(fusion_loss(ea, et) ==
              doctest::Approx(fusion_loss(only_a_r, only_a_t) + fusion_loss(only_b_r, only_b_t))
                  .epsilon(1e-12));
    }
}

TEST_CASE("fitted operators encode reproducibly") {
    Rng rng(16);
    Tensor x = random_matrix(40, 10, rng);
    AeConfig cfg;
    cfg.latent = 4;
    cfg.hidden = {8};
    cfg.epochs = 3;
    FusionOperator op = fit_autoencoder(FusionKind::ae, x, x, cfg, Rng(500));
    CHECK(op.encode(x).data == op.encode(x).data);
    CHECK_THROWS_AS(op.encode(random_matrix(3, 9, rng)), std::invalid_argument);
    CHECK_THROWS_AS(op.decode(random_matrix(3, 9, rng)), std::invalid_argument);
}

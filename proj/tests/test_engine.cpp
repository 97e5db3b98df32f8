#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "omnifuse/gradcheck.hpp"
#include "omnifuse/losses.hpp"
#include "omnifuse/nn.hpp"
#include "omnifuse/optim.hpp"
#include "omnifuse/rng.hpp"
#include "omnifuse/tensor.hpp"

using namespace omnifuse;

namespace {

// independent oracle: plain i-j-k dot-product matmul
Tensor naive_matmul(const Tensor& a, const Tensor& b) {
    Tensor out = Tensor::matrix(a.rows(), b.cols());
    for (int64_t i = 0; i < a.rows(); ++i)
        for (int64_t j = 0; j < b.cols(); ++j) {
            double acc = 0.0;
            for (int64_t k = 0; k < a.cols(); ++k) acc += a.at(i, k) * b.at(k, j);
            out.at(i, j) = acc;
        }
    return out;
}

Tensor random_matrix(int64_t r, int64_t c, Rng& rng) {
    Tensor t = Tensor::matrix(r, c);
    for (double& v : t.data) v = rng.normal();
    return t;
}

Tensor identity_matrix(int64_t n) {
    Tensor t = Tensor::matrix(n, n);
    for (int64_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    REQUIRE(a.same_shape(b));
    double m = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::fabs(a.data[i] - b.data[i]));
    return m;
}

}  // namespace

TEST_CASE("rng determinism and split independence") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng parent(7);
    Rng child1 = parent.split("layer0");
    (void)parent.uniform();
    (void)parent.uniform();
    Rng child2 = parent.split("layer0");
    CHECK(child1.next_u64() == child2.next_u64());  // split ignores parent draws

    Rng other = parent.split("layer1");
    Rng same = parent.split("layer0");
    (void)same.next_u64();
    CHECK(other.next_u64() != same.next_u64());
}

TEST_CASE("rng uniform range and normal moments") {
    Rng rng(3);
    double sum = 0.0, sum2 = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        const double g = rng.normal();
        sum += g;
        sum2 += g * g;
    }
    CHECK(std::fabs(sum / n) < 0.03);
    CHECK(std::fabs(sum2 / n - 1.0) < 0.05);
}

TEST_CASE("matmul identity case") {
    Rng rng(1);
    Tensor a = random_matrix(2, 5, rng);
    Tensor out = matmul(identity_matrix(2), a);
    CHECK(max_abs_diff(out, a) == 0.0);
}

TEST_CASE("matmul hand 2x2") {
    Tensor a({2, 2}, {1, 2, 3, 4});
    Tensor b({2, 1}, {1, 1});
    Tensor c = matmul(a, b);
    CHECK(c.at(0, 0) == 3.0);
    CHECK(c.at(1, 0) == 7.0);
}

TEST_CASE("matmul agrees with naive oracle") {
    Rng rng(99);
    Tensor a = random_matrix(5, 4, rng);
    Tensor b = random_matrix(4, 3, rng);
    CHECK(max_abs_diff(matmul(a, b), naive_matmul(a, b)) < 1e-12);

    // property sweep over small shapes
    for (int64_t m = 1; m <= 16; m += 5)
        for (int64_t k = 1; k <= 16; k += 7)
            for (int64_t n = 1; n <= 16; n += 6) {
                Tensor x = random_matrix(m, k, rng);
                Tensor y = random_matrix(k, n, rng);
                CHECK(max_abs_diff(matmul(x, y), naive_matmul(x, y)) < 1e-12);
                CHECK(max_abs_diff(matmul(x, identity_matrix(k)), x) < 1e-12);
            }
}

TEST_CASE("matmul transpose variants agree with oracle") {
    Rng rng(5);
    Tensor a = random_matrix(6, 4, rng);
    Tensor b = random_matrix(6, 3, rng);
    CHECK(max_abs_diff(matmul_tn(a, b), naive_matmul(transpose(a), b)) < 1e-12);
    Tensor c = random_matrix(5, 4, rng);
    Tensor d = random_matrix(7, 4, rng);
    CHECK(max_abs_diff(matmul_nt(c, d), naive_matmul(c, transpose(d))) < 1e-12);
}

TEST_CASE("matmul shape mismatch throws") {
    Tensor a = Tensor::matrix(2, 3);
    Tensor b = Tensor::matrix(4, 2);
    CHECK_THROWS_AS(matmul(a, b), std::invalid_argument);
}

TEST_CASE("dense identity passthrough") {
    Rng rng(1);
    DenseLayer layer(3, 3, Activation::identity, false, rng, "t");
    layer.weight().value = identity_matrix(3);
    layer.bias().value.fill(0.0);
    Tensor x({2, 3}, {0.5, -1.0, 2.0, 0.0, 1.5, -0.25});
    CHECK(max_abs_diff(layer.forward(x), x) == 0.0);
}

TEST_CASE("elu is C1 at zero: output 0, derivative 1") {
    Rng rng(2);
    DenseLayer layer(1, 1, Activation::elu, false, rng, "t");
    layer.weight().value.data[0] = 1.0;
    layer.bias().value.data[0] = 0.0;
    Tensor x({1, 1}, {0.0});
    LayerCache cache;
    Tensor y = layer.forward_train(x, cache);
    CHECK(y.data[0] == 0.0);
    Tensor dy({1, 1}, {1.0});
    Tensor dx = layer.backward(dy, cache);
    CHECK(dx.data[0] == 1.0);
}

TEST_CASE("dense 3->2 matches explicit formula") {
    Rng rng(3);
    DenseLayer layer(3, 2, Activation::tanh_, false, rng, "t");
    layer.weight().value = Tensor({3, 2}, {0.1, -0.2, 0.3, 0.4, -0.5, 0.6});
    layer.bias().value = Tensor({2}, {0.05, -0.1});
    Tensor x({1, 3}, {1.0, 2.0, -1.0});
    Tensor y = layer.forward(x);
    const double z0 = 1.0 * 0.1 + 2.0 * 0.3 + (-1.0) * (-0.5) + 0.05;
    const double z1 = 1.0 * (-0.2) + 2.0 * 0.4 + (-1.0) * 0.6 + (-0.1);
    CHECK(y.at(0, 0) == doctest::Approx(std::tanh(z0)).epsilon(1e-12));
    CHECK(y.at(0, 1) == doctest::Approx(std::tanh(z1)).epsilon(1e-12));
}

TEST_CASE("dense rejects NaN input and width mismatch") {
    Rng rng(4);
    DenseLayer layer(2, 2, Activation::identity, false, rng, "t");
    Tensor bad({1, 2}, {std::nan(""), 0.0});
    CHECK_THROWS(layer.forward(bad));
    Tensor wrong({1, 3}, {0.0, 0.0, 0.0});
    CHECK_THROWS(layer.forward(wrong));
}

TEST_CASE("loss values: mse, bce, softmax_ce") {
    Tensor x({2, 2}, {1.0, -2.0, 0.5, 3.0});
    CHECK(loss_eval(LossKind::mse, x, x) == 0.0);

    Tensor p({1, 1}, {0.5});
    Tensor t({1, 1}, {1.0});
    CHECK(loss_eval(LossKind::bce, p, t) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    Tensor logits({1, 3}, {0.0, 0.0, 0.0});
    CHECK(loss_eval(LossKind::softmax_ce, logits, Tensor(), {1}) ==
          doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("bce rejects non-binary targets") {
    Tensor p({1, 1}, {0.5});
    Tensor t({1, 1}, {0.3});
    CHECK_THROWS_AS(bce_loss(p, t), std::invalid_argument);
}

TEST_CASE("backward of w^2 at w=3 gives 6") {
    Rng rng(1);
    DenseLayer layer(1, 1, Activation::identity, false, rng, "w");
    layer.weight().value.data[0] = 3.0;
    layer.bias().value.data[0] = 0.0;
    Tensor x({1, 1}, {1.0});
    LayerCache cache;
    Tensor pred = layer.forward_train(x, cache);
    LossValue l = mse_loss(pred, Tensor({1, 1}, {0.0}));  // loss = w^2
    CHECK(l.value == doctest::Approx(9.0));
    layer.backward(l.grad, cache);
    CHECK(layer.weight().grad.data[0] == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("two-layer mse net matches finite differences") {
    Rng rng(11);
    Sequential net = make_mlp(3, {4}, 2, Activation::tanh_, Activation::identity, rng, "net");
    Tensor x = random_matrix(5, 3, rng);
    Tensor target = random_matrix(5, 2, rng);

    Tape tape;
    auto loss_and_backward = [&]() {
        net.zero_grad();
        Tensor pred = net.forward_train(x, tape);
        LossValue l = mse_loss(pred, target);
        net.backward(l.grad, tape);
        return l.value;
    };
    Tape t2;
    auto loss_only = [&]() {
        return mse_loss(net.forward_train(x, t2), target).value;
    };
    GradCheckResult res = grad_check(net.params(), loss_and_backward, loss_only, 1e-5);
    CHECK(res.max_rel_err < 1e-6);
}

TEST_CASE("constant loss yields zero grads") {
    Rng rng(12);
    Sequential net = make_mlp(2, {3}, 1, Activation::tanh_, Activation::identity, rng, "net");
    Tensor x = random_matrix(4, 2, rng);
    Tape tape;
    net.zero_grad();
    Tensor pred = net.forward_train(x, tape);
    net.backward(Tensor::zeros_like(pred), tape);
    for (Parameter* p : net.params())
        for (double g : p->grad.data) CHECK(g == 0.0);
}

TEST_CASE("backward is linear in the loss") {
    Rng rng(13);
    Sequential net = make_mlp(3, {5}, 3, Activation::elu, Activation::identity, rng, "net");
    Tensor x = random_matrix(6, 3, rng);
    Tensor t1 = random_matrix(6, 3, rng);
    Tensor t2 = random_matrix(6, 3, rng);
    const double a = 0.7, b = -1.3;

    Tape tape;
    Tensor pred = net.forward_train(x, tape);
    LossValue l1 = mse_loss(pred, t1);
    LossValue l2 = cosine_loss(pred, t2);

    net.zero_grad();
    net.backward(l1.grad, tape);
    std::vector<Tensor> g1;
    for (Parameter* p : net.params()) g1.push_back(p->grad);

    net.zero_grad();
    net.backward(l2.grad, tape);
    std::vector<Tensor> g2;
    for (Parameter* p : net.params()) g2.push_back(p->grad);

    Tensor combined = l1.grad;
    scale_inplace(combined, a);
    Tensor scaled2 = l2.grad;
    scale_inplace(scaled2, b);
    add_inplace(combined, scaled2);
    net.zero_grad();
    net.backward(combined, tape);

    auto params = net.params();
    for (size_t k = 0; k < params.size(); ++k)
        for (size_t i = 0; i < params[k]->grad.data.size(); ++i) {
            const double expect = a * g1[k].data[i] + b * g2[k].data[i];
            CHECK(params[k]->grad.data[i] == doctest::Approx(expect).epsilon(1e-12));
        }
}

TEST_CASE("sgd updates") {
    Parameter w(Tensor({1}, {1.0}), "w");
    std::vector<Parameter*> params{&w};

    SUBCASE("zero grad leaves parameter unchanged") {
        w.grad.data[0] = 0.0;
        Sgd(0.1).step(params);
        CHECK(w.value.data[0] == 1.0);
    }
    SUBCASE("basic step") {
        w.grad.data[0] = 2.0;
        Sgd(0.1).step(params);
        CHECK(w.value.data[0] == doctest::Approx(0.8).epsilon(1e-15));
    }
    SUBCASE("lr=0 is exactly a no-op") {
        w.grad.data[0] = 123.456;
        Sgd(0.0).step(params);
        CHECK(w.value.data[0] == 1.0);
    }
}

TEST_CASE("adam single step matches reference formula") {
    Parameter w(Tensor({1}, {0.5}), "w");
    std::vector<Parameter*> params{&w};
    w.grad.data[0] = 0.3;
    const double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8, g = 0.3;
    Adam opt(lr);
    opt.step(params);
    const double m = (1.0 - b1) * g;
    const double v = (1.0 - b2) * g * g;
    const double mhat = m / (1.0 - b1);
    const double vhat = v / (1.0 - b2);
    const double expected = 0.5 - lr * mhat / (std::sqrt(vhat) + eps);
    CHECK(w.value.data[0] == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("adam lr=0 leaves parameters unchanged") {
    Rng rng(20);
    Sequential net = make_mlp(2, {3}, 1, Activation::tanh_, Activation::identity, rng, "net");
    Tensor x = random_matrix(3, 2, rng);
    Tape tape;
    net.zero_grad();
    Tensor pred = net.forward_train(x, tape);
    LossValue l = mse_loss(pred, Tensor::zeros_like(pred));
    net.backward(l.grad, tape);
    std::vector<Tensor> before;
    for (Parameter* p : net.params()) before.push_back(p->value);
    Adam(0.0).step(net.params());
    auto params = net.params();
    for (size_t k = 0; k < params.size(); ++k)
        CHECK(max_abs_diff(params[k]->value, before[k]) == 0.0);
}

TEST_CASE("optimizer aborts on nonfinite grad") {
    Parameter w(Tensor({1}, {1.0}), "w");
    w.grad.data[0] = std::nan("");
    std::vector<Parameter*> params{&w};
    CHECK_THROWS_WITH_AS(Sgd(0.1).step(params),
                         doctest::Contains("nonfinite gradient"), std::runtime_error);
    CHECK(w.value.data[0] == 1.0);
}

TEST_CASE("grad_check: linear model with mse is near-exact") {
    Rng rng(30);
    Sequential net = make_mlp(3, {}, 2, Activation::identity, Activation::identity, rng, "lin");
    Tensor x = random_matrix(6, 3, rng);
    Tensor target = random_matrix(6, 2, rng);
    Tape tape, t2;
    auto lb = [&]() {
        net.zero_grad();
        LossValue l = mse_loss(net.forward_train(x, tape), target);
        net.backward(l.grad, tape);
        return l.value;
    };
    auto lo = [&]() { return mse_loss(net.forward_train(x, t2), target).value; };
    CHECK(grad_check(net.params(), lb, lo, 1e-5).max_rel_err < 1e-9);
}

TEST_CASE("grad_check: autoencoder stack under 1e-4") {
    Rng rng(31);
    Sequential enc = make_mlp(10, {8, 6}, 4, Activation::tanh_, Activation::identity, rng, "e");
    Sequential dec = make_mlp(4, {6, 8}, 10, Activation::tanh_, Activation::identity, rng, "d");
    Tensor x = random_matrix(7, 10, rng);
    Tape te, td, t2e, t2d;
    auto lb = [&]() {
        enc.zero_grad();
        dec.zero_grad();
        Tensor h = enc.forward_train(x, te);
        Tensor r = dec.forward_train(h, td);
        LossValue l = recon_sse_loss(r, x);
        Tensor dh = dec.backward(l.grad, td);
        enc.backward(dh, te);
        return l.value;
    };
    auto lo = [&]() {
        return recon_sse_loss(dec.forward_train(enc.forward_train(x, t2e), t2d), x).value;
    };
    std::vector<Parameter*> params = enc.params();
    for (Parameter* p : dec.params()) params.push_back(p);
    CHECK(grad_check(params, lb, lo, 1e-5).max_rel_err < 1e-4);
}

TEST_CASE("grad_check: batchnorm in train mode under 1e-3") {
    Rng rng(32);
    Sequential net;
    net.add(std::make_unique<DenseLayer>(4, 6, Activation::elu, true, rng, "bn0"));
    net.add(std::make_unique<DenseLayer>(6, 2, Activation::identity, false, rng, "out"));
    Tensor x = random_matrix(8, 4, rng);
    Tensor target = random_matrix(8, 2, rng);
    Tape tape, t2;
    auto lb = [&]() {
        net.zero_grad();
        LossValue l = mse_loss(net.forward_train(x, tape), target);
        net.backward(l.grad, tape);
        return l.value;
    };
    auto lo = [&]() { return mse_loss(net.forward_train(x, t2), target).value; };
    CHECK(grad_check(net.params(), lb, lo, 1e-5).max_rel_err < 1e-3);
}

TEST_CASE("grad_check: frozen-stats batchnorm under 1e-6") {
    Rng rng(33);
    Sequential net;
    auto dense = std::make_unique<DenseLayer>(4, 6, Activation::elu, true, rng, "bn0");
    dense->bn().running_mean = Tensor({6}, {0.1, -0.2, 0.3, 0.0, 0.5, -0.1});
    dense->bn().running_var = Tensor({6}, {1.1, 0.9, 1.0, 1.3, 0.8, 1.2});
    dense->bn().freeze_stats = true;
    net.add(std::move(dense));
    net.add(std::make_unique<DenseLayer>(6, 2, Activation::identity, false, rng, "out"));
    Tensor x = random_matrix(8, 4, rng);
    Tensor target = random_matrix(8, 2, rng);
    Tape tape, t2;
    auto lb = [&]() {
        net.zero_grad();
        LossValue l = mse_loss(net.forward_train(x, tape), target);
        net.backward(l.grad, tape);
        return l.value;
    };
    auto lo = [&]() { return mse_loss(net.forward_train(x, t2), target).value; };
    CHECK(grad_check(net.params(), lb, lo, 1e-5).max_rel_err < 1e-6);
}

TEST_CASE("activation derivatives match pointwise finite differences") {
    const Activation acts[] = {Activation::identity, Activation::relu, Activation::elu,
                               Activation::tanh_, Activation::sigmoid};
    const double points[] = {-2.0, -0.7, -0.1, 0.2, 0.9, 2.5};
    const double h = 1e-6;
    for (Activation a : acts)
        for (double z : points) {
            if (a == Activation::relu && std::fabs(z) < 1e-6) continue;
            const double y = apply_activation(a, z);
            const double fd =
                (apply_activation(a, z + h) - apply_activation(a, z - h)) / (2.0 * h);
            CHECK(activation_grad(a, z, y) == doctest::Approx(fd).epsilon(1e-5));
        }
}

TEST_CASE("batchnorm inference uses running stats") {
    Rng rng(40);
    DenseLayer layer(2, 2, Activation::identity, true, rng, "bn");
    layer.weight().value = identity_matrix(2);
    layer.bias().value.fill(0.0);
    // feed several train batches so the running stats move off their init
    Tensor batch = random_matrix(16, 2, rng);
    for (double& v : batch.data) v = v * 2.0 + 1.0;
    LayerCache cache;
    for (int i = 0; i < 50; ++i) layer.forward_train(batch, cache);
    // inference on the same batch should now be near-normalized
    Tensor y = layer.forward(batch);
    double mean0 = 0.0;
    for (int64_t i = 0; i < y.rows(); ++i) mean0 += y.at(i, 0);
    mean0 /= static_cast<double>(y.rows());
    CHECK(std::fabs(mean0) < 0.1);
}

TEST_CASE("conv and pool gradients match finite differences") {
    Rng rng(50);
    Sequential net;
    net.add(std::make_unique<Conv2dLayer>(1, 4, 4, 2, Activation::elu, rng, "c0"));
    net.add(std::make_unique<AvgPool2dLayer>(2, 4, 4));
    net.add(std::make_unique<DenseLayer>(8, 3, Activation::identity, false, rng, "d0"));
    Tensor x = random_matrix(3, 16, rng);
    Tensor target = random_matrix(3, 3, rng);
    Tape tape, t2;
    auto lb = [&]() {
        net.zero_grad();
        LossValue l = mse_loss(net.forward_train(x, tape), target);
        net.backward(l.grad, tape);
        return l.value;
    };
    auto lo = [&]() { return mse_loss(net.forward_train(x, t2), target).value; };
    CHECK(grad_check(net.params(), lb, lo, 1e-5).max_rel_err < 1e-6);
}

TEST_CASE("identical seeds build identical networks") {
    Rng a(77), b(77);
    Sequential n1 = make_mlp(5, {8, 8}, 3, Activation::elu, Activation::identity, a, "m");
    Sequential n2 = make_mlp(5, {8, 8}, 3, Activation::elu, Activation::identity, b, "m");
    CHECK(param_hash(n1) == param_hash(n2));
    Rng c(78);
    Sequential n3 = make_mlp(5, {8, 8}, 3, Activation::elu, Activation::identity, c, "m");
    CHECK(param_hash(n1) != param_hash(n3));
}

TEST_CASE("cosine loss gradient matches finite differences") {
    Rng rng(60);
    Tensor pred = random_matrix(4, 5, rng);
    Tensor target = random_matrix(4, 5, rng);
    LossValue l = cosine_loss(pred, target);
    const double h = 1e-6;
    for (size_t i = 0; i < pred.data.size(); i += 3) {
        const double orig = pred.data[i];
        pred.data[i] = orig + h;
        const double lp = cosine_loss(pred, target).value;
        pred.data[i] = orig - h;
        const double lm = cosine_loss(pred, target).value;
        pred.data[i] = orig;
        CHECK(l.grad.data[i] == doctest::Approx((lp - lm) / (2 * h)).epsilon(1e-4));
    }
}

TEST_CASE("vae kl loss value and gradients") {
    Tensor mu({2, 2}, {0.0, 1.0, -1.0, 0.5});
    Tensor logvar({2, 2}, {0.0, 0.0, 0.5, -0.5});
    VaeKl kl = vae_kl_loss(mu, logvar);
    // hand evaluation: -0.5 * (1 + lv - mu^2 - e^lv), summed per sample, mean over 2
    double expect = 0.0;
    for (int i = 0; i < 4; ++i) {
        const double m = mu.data[i], lv = logvar.data[i];
        expect += -0.5 * (1.0 + lv - m * m - std::exp(lv));
    }
    expect /= 2.0;
    CHECK(kl.value == doctest::Approx(expect).epsilon(1e-12));

    const double h = 1e-6;
    for (int i = 0; i < 4; ++i) {
        double orig = mu.data[i];
        mu.data[i] = orig + h;
        const double lp = vae_kl_loss(mu, logvar).value;
        mu.data[i] = orig - h;
        const double lm = vae_kl_loss(mu, logvar).value;
        mu.data[i] = orig;
        CHECK(kl.dmu.data[i] == doctest::Approx((lp - lm) / (2 * h)).epsilon(1e-5));
    }
}

TEST_CASE("param_count dense formula") {
    Rng rng(70);
    Sequential net = make_mlp(7, {}, 4, Activation::identity, Activation::identity, rng, "n");
    CHECK(param_count(net) == 7 * 4 + 4);
}

#include "omnifuse/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "omnifuse/losses.hpp"
#include "omnifuse/optim.hpp"

namespace omnifuse {

FusionKind fusion_kind_from_string(const std::string& s) {
    if (s == "concat") return FusionKind::concat;
    if (s == "pca") return FusionKind::pca;
    if (s == "ae") return FusionKind::ae;
    if (s == "vae") return FusionKind::vae;
    if (s == "dae") return FusionKind::dae;
    throw std::invalid_argument("unknown fusion kind: " + s);
}

std::string fusion_kind_to_string(FusionKind k) {
    switch (k) {
        case FusionKind::concat: return "concat";
        case FusionKind::pca: return "pca";
        case FusionKind::ae: return "ae";
        case FusionKind::vae: return "vae";
        case FusionKind::dae: return "dae";
    }
    return "?";
}

int64_t latent_dim_rule(const std::vector<int64_t>& dims) {
    if (dims.empty()) throw std::invalid_argument("latent_dim_rule: empty dims");
    double mean = 0.0;
    for (int64_t d : dims) mean += static_cast<double>(d);
    mean /= static_cast<double>(dims.size());
    int64_t p = 1;
    while (static_cast<double>(p) < mean) p *= 2;
    return p;
}

std::vector<int64_t> plan_layers(int64_t input_dim, int64_t latent_dim, int64_t n_layers) {
    if (latent_dim >= input_dim)
        throw std::invalid_argument("plan_layers: latent must be smaller than input");
    if (n_layers < 1) throw std::invalid_argument("plan_layers: need >= 1 layer");
    const double ratio = std::pow(static_cast<double>(latent_dim) / static_cast<double>(input_dim),
                                  1.0 / static_cast<double>(n_layers));
    std::vector<int64_t> sizes;
    int64_t prev = input_dim;
    for (int64_t i = 1; i < n_layers; ++i) {
        const double raw = static_cast<double>(input_dim) * std::pow(ratio, static_cast<double>(i));
        const int64_t mult = raw >= 512.0 ? 64 : 8;
        int64_t s = static_cast<int64_t>(std::llround(raw / static_cast<double>(mult))) * mult;
        s = std::clamp<int64_t>(s, latent_dim + 1, input_dim - 1);
        if (s >= prev) s = prev - 1;  // keep the plan strictly decreasing
        if (s <= latent_dim) break;   // no room left between latent and input
        sizes.push_back(s);
        prev = s;
    }
    return sizes;
}

double fusion_loss(const EmbeddingSet& recon, const EmbeddingSet& target) {
    if (recon.modalities.size() != target.modalities.size())
        throw std::invalid_argument("fusion_loss: modality count mismatch");
    double total = 0.0;
    for (size_t m = 0; m < recon.modalities.size(); ++m) {
        const Tensor& r = recon.modalities[m].matrix;
        const Tensor& t = target.modalities[m].matrix;
        if (!r.same_shape(t)) throw std::invalid_argument("fusion_loss: shape mismatch");
        total += sum_sq_diff(r, t) / static_cast<double>(t.rows());
    }
    return total;
}

// ---------------------------------------------------------------------------
// eigendecomposition (cyclic Jacobi)
// ---------------------------------------------------------------------------

void symmetric_eigen(const Tensor& sym, Tensor& eigenvalues, Tensor& eigenvectors) {
    const int64_t n = sym.rows();
    if (sym.cols() != n) throw std::invalid_argument("symmetric_eigen: not square");
    Tensor a = sym;
    Tensor v = Tensor::matrix(n, n);
    for (int64_t i = 0; i < n; ++i) v.at(i, i) = 1.0;

    for (int sweep = 0; sweep < 128; ++sweep) {
        double off = 0.0;
        for (int64_t p = 0; p < n; ++p)
            for (int64_t q = p + 1; q < n; ++q) off += a.at(p, q) * a.at(p, q);
        if (off < 1e-24) break;
        for (int64_t p = 0; p < n; ++p) {
            for (int64_t q = p + 1; q < n; ++q) {
                const double apq = a.at(p, q);
                if (std::fabs(apq) < 1e-300) continue;
                const double app = a.at(p, p), aqq = a.at(q, q);
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int64_t k = 0; k < n; ++k) {
                    const double akp = a.at(k, p), akq = a.at(k, q);
                    a.at(k, p) = c * akp - s * akq;
                    a.at(k, q) = s * akp + c * akq;
                }
                for (int64_t k = 0; k < n; ++k) {
                    const double apk = a.at(p, k), aqk = a.at(q, k);
                    a.at(p, k) = c * apk - s * aqk;
                    a.at(q, k) = s * apk + c * aqk;
                }
                for (int64_t k = 0; k < n; ++k) {
                    const double vkp = v.at(k, p), vkq = v.at(k, q);
                    v.at(k, p) = c * vkp - s * vkq;
                    v.at(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<int64_t> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int64_t x, int64_t y) { return a.at(x, x) > a.at(y, y); });

    eigenvalues = Tensor::vector(n);
    eigenvectors = Tensor::matrix(n, n);
    for (int64_t c = 0; c < n; ++c) {
        const int64_t src = order[static_cast<size_t>(c)];
        eigenvalues.data[static_cast<size_t>(c)] = a.at(src, src);
        int64_t arg = 0;
        for (int64_t r = 1; r < n; ++r)
            if (std::fabs(v.at(r, src)) > std::fabs(v.at(arg, src))) arg = r;
        const double sign = v.at(arg, src) < 0.0 ? -1.0 : 1.0;
        for (int64_t r = 0; r < n; ++r) eigenvectors.at(r, c) = sign * v.at(r, src);
    }
}

// ---------------------------------------------------------------------------
// FusionOperator
// ---------------------------------------------------------------------------

namespace {

void default_modality_meta(int64_t input_dim, std::vector<int64_t>& widths,
                           std::vector<std::string>& names) {
    if (widths.empty()) {
        widths = {input_dim};
        names = {"all"};
    }
    if (names.size() != widths.size())
        throw std::invalid_argument("fusion: widths/names size mismatch");
    int64_t sum = 0;
    for (int64_t w : widths) sum += w;
    if (sum != input_dim)
        throw std::invalid_argument("fusion: modality widths do not sum to input dim");
}

}  // namespace

Tensor FusionOperator::encode(const Tensor& x) const {
    if (x.cols() != input_dim_)
        throw std::invalid_argument("fusion encode: width " + std::to_string(x.cols()) +
                                    " != " + std::to_string(input_dim_));
    switch (kind_) {
        case FusionKind::concat: return x;
        case FusionKind::pca: {
            Tensor centered = x;
            for (int64_t i = 0; i < centered.rows(); ++i)
                for (int64_t j = 0; j < centered.cols(); ++j)
                    centered.at(i, j) -= mean_.at(0, j);
            return matmul(centered, components_);
        }
        case FusionKind::ae:
        case FusionKind::dae: return encoder_.forward(x);
        case FusionKind::vae: {
            Tensor h = encoder_.size() ? encoder_.forward(x) : x;
            return mu_head_.forward(h);
        }
    }
    throw std::logic_error("fusion encode: bad kind");
}

Tensor FusionOperator::decode(const Tensor& h) const {
    if (h.cols() != latent_dim_)
        throw std::invalid_argument("fusion decode: width " + std::to_string(h.cols()) +
                                    " != " + std::to_string(latent_dim_));
    switch (kind_) {
        case FusionKind::concat: return h;
        case FusionKind::pca: {
            Tensor out = matmul_nt(h, components_);
            for (int64_t i = 0; i < out.rows(); ++i)
                for (int64_t j = 0; j < out.cols(); ++j) out.at(i, j) += mean_.at(0, j);
            return out;
        }
        case FusionKind::ae:
        case FusionKind::dae:
        case FusionKind::vae: return decoder_.forward(h);
    }
    throw std::logic_error("fusion decode: bad kind");
}

EmbeddingSet FusionOperator::decode_modalities(const Tensor& h) const {
    return EmbeddingSet::split_concat(decode(h), widths_, names_);
}

uint64_t FusionOperator::params_hash() const {
    uint64_t h = 0xcbf29ce484222325ULL;
    auto fold = [&h](const Tensor& t) {
        h = fnv1a64(t.data.data(), t.data.size() * sizeof(double), h);
    };
    fold(mean_);
    fold(components_);
    auto fold_net = [&](const Sequential& net) {
        for (const Parameter* p : const_cast<Sequential&>(net).params()) fold(p->value);
    };
    fold_net(encoder_);
    fold_net(decoder_);
    fold_net(mu_head_);
    fold_net(logvar_head_);
    return h;
}

int64_t FusionOperator::encoder_param_count() const {
    switch (kind_) {
        case FusionKind::concat: return 0;
        case FusionKind::pca: return components_.numel() + mean_.numel();
        case FusionKind::ae:
        case FusionKind::dae: return param_count(const_cast<Sequential&>(encoder_));
        case FusionKind::vae:
            return param_count(const_cast<Sequential&>(encoder_)) +
                   param_count(const_cast<Sequential&>(mu_head_)) +
                   param_count(const_cast<Sequential&>(logvar_head_));
    }
    return 0;
}

FusionOperator make_concat_operator(std::vector<int64_t> widths, std::vector<std::string> names) {
    FusionOperator op;
    op.kind_ = FusionKind::concat;
    int64_t sum = 0;
    for (int64_t w : widths) sum += w;
    op.input_dim_ = sum;
    op.latent_dim_ = sum;
    default_modality_meta(sum, widths, names);
    op.widths_ = std::move(widths);
    op.names_ = std::move(names);
    return op;
}

FusionOperator fit_pca(const Tensor& x, int64_t k, std::vector<int64_t> widths,
                       std::vector<std::string> names) {
    const int64_t n = x.rows(), d = x.cols();
    if (k < 1 || k > std::min(n, d))
        throw std::invalid_argument("fit_pca: k out of range");

    FusionOperator op;
    op.kind_ = FusionKind::pca;
    op.input_dim_ = d;
    op.latent_dim_ = k;
    default_modality_meta(d, widths, names);
    op.widths_ = std::move(widths);
    op.names_ = std::move(names);

    op.mean_ = Tensor::matrix(1, d);
    for (int64_t j = 0; j < d; ++j) {
        double m = 0.0;
        for (int64_t i = 0; i < n; ++i) m += x.at(i, j);
        op.mean_.at(0, j) = m / static_cast<double>(n);
    }
    Tensor centered = x;
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < d; ++j) centered.at(i, j) -= op.mean_.at(0, j);
    Tensor cov = matmul_tn(centered, centered);
    scale_inplace(cov, 1.0 / static_cast<double>(n));

    Tensor evals, evecs;
    symmetric_eigen(cov, evals, evecs);
    op.eigenvalues_ = evals;
    op.components_ = slice_cols(evecs, 0, k);

    Tensor recon = op.decode(op.encode(x));
    op.initial_val_loss_ = op.final_val_loss_ =
        sum_sq_diff(recon, x) / static_cast<double>(n);
    return op;
}

// ---------------------------------------------------------------------------
// autoencoder family
// ---------------------------------------------------------------------------

namespace {

double validation_recon_loss(const FusionOperator& op, const Tensor& x_val) {
    if (x_val.rows() == 0) return 0.0;
    Tensor recon = op.decode(op.encode(x_val));
    return sum_sq_diff(recon, x_val) / static_cast<double>(x_val.rows());
}

}  // namespace

FusionOperator fit_autoencoder(FusionKind kind, const Tensor& x_train, const Tensor& x_val,
                               const AeConfig& cfg, Rng rng, std::vector<int64_t> widths,
                               std::vector<std::string> names) {
    if (kind != FusionKind::ae && kind != FusionKind::vae && kind != FusionKind::dae)
        throw std::invalid_argument("fit_autoencoder: kind must be ae, vae or dae");
    const int64_t d = x_train.cols();
    const int64_t latent = cfg.latent;
    if (latent < 1 || latent >= d)
        throw std::invalid_argument("fit_autoencoder: latent must be in [1, input)");

    FusionOperator op;
    op.kind_ = kind;
    op.input_dim_ = d;
    op.latent_dim_ = latent;
    default_modality_meta(d, widths, names);
    op.widths_ = std::move(widths);
    op.names_ = std::move(names);

    std::vector<int64_t> dec_hidden(cfg.hidden.rbegin(), cfg.hidden.rend());
    Rng init_rng = rng.split("init");
    if (kind == FusionKind::vae) {
        // trunk carries the hidden stack; two linear heads give mu / logvar
        const int64_t trunk_out = cfg.hidden.empty() ? d : cfg.hidden.back();
        if (!cfg.hidden.empty()) {
            std::vector<int64_t> trunk_hidden(cfg.hidden.begin(), cfg.hidden.end() - 1);
            op.encoder_ = make_mlp(d, trunk_hidden, cfg.hidden.back(), cfg.hidden_act,
                                   cfg.hidden_act, init_rng, "fusion.trunk");
        }
        op.mu_head_ = make_mlp(trunk_out, {}, latent, Activation::identity,
                               Activation::identity, init_rng, "fusion.mu");
        op.logvar_head_ = make_mlp(trunk_out, {}, latent, Activation::identity,
                                   Activation::identity, init_rng, "fusion.logvar");
    } else {
        op.encoder_ = make_mlp(d, cfg.hidden, latent, cfg.hidden_act, Activation::identity,
                               init_rng, "fusion.enc");
    }
    op.decoder_ = make_mlp(latent, dec_hidden, d, cfg.hidden_act, Activation::identity,
                           init_rng, "fusion.dec");

    op.initial_val_loss_ = validation_recon_loss(op, x_val);
    op.final_val_loss_ = op.initial_val_loss_;
    if (cfg.epochs == 0 || x_train.rows() == 0) return op;

    std::vector<Parameter*> params;
    auto collect = [&params](Sequential& net) {
        for (Parameter* p : net.params()) params.push_back(p);
    };
    collect(op.encoder_);
    collect(op.decoder_);
    if (kind == FusionKind::vae) {
        collect(op.mu_head_);
        collect(op.logvar_head_);
    }
    auto zero_all = [&params]() {
        for (Parameter* p : params) p->grad.fill(0.0);
    };

    Adam opt(cfg.lr);
    const int64_t n = x_train.rows();
    std::vector<int64_t> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng = rng.split("shuffle");
    Rng noise_rng = rng.split("noise");

    for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        for (int64_t start = 0; start < n; start += cfg.batch) {
            const int64_t end = std::min(n, start + cfg.batch);
            std::vector<int64_t> rows(order.begin() + start, order.begin() + end);
            Tensor clean = take_rows(x_train, rows);
            Tensor input = clean;
            if (kind == FusionKind::dae && cfg.noise_sigma > 0.0)
                for (double& v : input.data) v += cfg.noise_sigma * noise_rng.normal();

            zero_all();
            if (kind == FusionKind::vae) {
                Tape trunk_tape, mu_tape, lv_tape, dec_tape;
                Tensor h = op.encoder_.size() ? op.encoder_.forward_train(input, trunk_tape)
                                              : input;
                Tensor mu = op.mu_head_.forward_train(h, mu_tape);
                Tensor logvar = op.logvar_head_.forward_train(h, lv_tape);
                Tensor eps = Tensor::zeros_like(mu);
                for (double& v : eps.data) v = noise_rng.normal();
                Tensor z = mu;
                for (size_t i = 0; i < z.data.size(); ++i)
                    z.data[i] += eps.data[i] * std::exp(0.5 * logvar.data[i]);
                Tensor recon = op.decoder_.forward_train(z, dec_tape);
                LossValue rl = recon_sse_loss(recon, clean);
                VaeKl kl = vae_kl_loss(mu, logvar);
                const double loss = rl.value + cfg.beta * kl.value;
                if (!std::isfinite(loss))
                    throw std::runtime_error("fit_autoencoder: training diverged");
                Tensor dz = op.decoder_.backward(rl.grad, dec_tape);
                Tensor dmu = dz;
                for (size_t i = 0; i < dmu.data.size(); ++i)
                    dmu.data[i] += cfg.beta * kl.dmu.data[i];
                Tensor dlogvar = Tensor::zeros_like(logvar);
                for (size_t i = 0; i < dlogvar.data.size(); ++i)
                    dlogvar.data[i] = dz.data[i] * eps.data[i] * 0.5 *
                                          std::exp(0.5 * logvar.data[i]) +
                                      cfg.beta * kl.dlogvar.data[i];
                Tensor dh = op.mu_head_.backward(dmu, mu_tape);
                add_inplace(dh, op.logvar_head_.backward(dlogvar, lv_tape));
                if (op.encoder_.size()) op.encoder_.backward(dh, trunk_tape);
            } else {
                Tape enc_tape, dec_tape;
                Tensor z = op.encoder_.forward_train(input, enc_tape);
                Tensor recon = op.decoder_.forward_train(z, dec_tape);
                LossValue rl = recon_sse_loss(recon, clean);
                if (!std::isfinite(rl.value))
                    throw std::runtime_error("fit_autoencoder: training diverged");
                Tensor dz = op.decoder_.backward(rl.grad, dec_tape);
                op.encoder_.backward(dz, enc_tape);
            }
            opt.step(params);
        }
        op.epoch_val_loss_.push_back(validation_recon_loss(op, x_val));
    }
    op.final_val_loss_ = op.epoch_val_loss_.empty() ? op.initial_val_loss_
                                                    : op.epoch_val_loss_.back();
    return op;
}

}  // namespace omnifuse

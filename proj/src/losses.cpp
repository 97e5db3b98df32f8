#include "omnifuse/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace omnifuse {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(what) + ": shape mismatch " + a.shape_str() +
                                    " vs " + b.shape_str());
}

constexpr double kBceClamp = 1e-7;

}  // namespace

LossKind loss_kind_from_string(const std::string& s) {
    if (s == "mse") return LossKind::mse;
    if (s == "bce") return LossKind::bce;
    if (s == "softmax_ce") return LossKind::softmax_ce;
    if (s == "cosine") return LossKind::cosine;
    if (s == "vae_kl") return LossKind::vae_kl;
    throw std::invalid_argument("unknown loss kind: " + s);
}

LossValue mse_loss(const Tensor& pred, const Tensor& target) {
    require_same_shape(pred, target, "mse");
    LossValue out;
    out.grad = Tensor::zeros_like(pred);
    const double inv = 1.0 / static_cast<double>(pred.numel());
    for (size_t i = 0; i < pred.data.size(); ++i) {
        const double d = pred.data[i] - target.data[i];
        out.value += d * d * inv;
        out.grad.data[i] = 2.0 * d * inv;
    }
    return out;
}

LossValue recon_sse_loss(const Tensor& pred, const Tensor& target) {
    require_same_shape(pred, target, "recon");
    LossValue out;
    out.grad = Tensor::zeros_like(pred);
    const double inv = 1.0 / static_cast<double>(pred.rows());
    for (size_t i = 0; i < pred.data.size(); ++i) {
        const double d = pred.data[i] - target.data[i];
        out.value += d * d * inv;
        out.grad.data[i] = 2.0 * d * inv;
    }
    return out;
}

LossValue bce_loss(const Tensor& prob, const Tensor& target) {
    require_same_shape(prob, target, "bce");
    LossValue out;
    out.grad = Tensor::zeros_like(prob);
    const double inv = 1.0 / static_cast<double>(prob.numel());
    for (size_t i = 0; i < prob.data.size(); ++i) {
        const double t = target.data[i];
        if (t != 0.0 && t != 1.0)
            throw std::invalid_argument("bce: targets must be in {0,1}");
        const double p = std::clamp(prob.data[i], kBceClamp, 1.0 - kBceClamp);
        out.value += -(t * std::log(p) + (1.0 - t) * std::log(1.0 - p)) * inv;
        out.grad.data[i] = (p - t) / (p * (1.0 - p)) * inv;
    }
    return out;
}

Tensor softmax_rows(const Tensor& logits) {
    Tensor p = logits;
    for (int64_t i = 0; i < p.rows(); ++i) {
        double* row = p.row_ptr(i);
        double mx = row[0];
        for (int64_t j = 1; j < p.cols(); ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (int64_t j = 0; j < p.cols(); ++j) {
            row[j] = std::exp(row[j] - mx);
            z += row[j];
        }
        for (int64_t j = 0; j < p.cols(); ++j) row[j] /= z;
    }
    return p;
}

LossValue softmax_ce_loss(const Tensor& logits, const std::vector<int>& labels) {
    if (static_cast<int64_t>(labels.size()) != logits.rows())
        throw std::invalid_argument("softmax_ce: label count != rows");
    LossValue out;
    Tensor p = softmax_rows(logits);
    const double inv = 1.0 / static_cast<double>(logits.rows());
    out.grad = p;
    for (int64_t i = 0; i < logits.rows(); ++i) {
        const int c = labels[static_cast<size_t>(i)];
        if (c < 0 || c >= logits.cols())
            throw std::invalid_argument("softmax_ce: class index out of range");
        out.value += -std::log(std::max(p.at(i, c), 1e-300)) * inv;
        out.grad.at(i, c) -= 1.0;
    }
    scale_inplace(out.grad, inv);
    return out;
}

LossValue cosine_loss(const Tensor& pred, const Tensor& target) {
    require_same_shape(pred, target, "cosine");
    LossValue out;
    out.grad = Tensor::zeros_like(pred);
    const int64_t n = pred.rows(), d = pred.cols();
    const double inv = 1.0 / static_cast<double>(n);
    for (int64_t i = 0; i < n; ++i) {
        const double* a = pred.row_ptr(i);
        const double* b = target.row_ptr(i);
        double ab = 0.0, aa = 0.0, bb = 0.0;
        for (int64_t j = 0; j < d; ++j) {
            ab += a[j] * b[j];
            aa += a[j] * a[j];
            bb += b[j] * b[j];
        }
        const double na = std::sqrt(aa), nb = std::sqrt(bb);
        if (na == 0.0 || nb == 0.0) {
            out.value += 1.0 * inv;  // zero-norm row: treated as orthogonal
            continue;
        }
        const double cosv = ab / (na * nb);
        out.value += (1.0 - cosv) * inv;
        double* g = out.grad.row_ptr(i);
        for (int64_t j = 0; j < d; ++j)
            g[j] = -(b[j] / (na * nb) - cosv * a[j] / aa) * inv;
    }
    return out;
}

VaeKl vae_kl_loss(const Tensor& mu, const Tensor& logvar) {
    require_same_shape(mu, logvar, "vae_kl");
    VaeKl out;
    out.dmu = Tensor::zeros_like(mu);
    out.dlogvar = Tensor::zeros_like(logvar);
    const double inv = 1.0 / static_cast<double>(mu.rows());
    for (size_t i = 0; i < mu.data.size(); ++i) {
        const double m = mu.data[i];
        const double lv = logvar.data[i];
        const double v = std::exp(lv);
        out.value += -0.5 * (1.0 + lv - m * m - v) * inv;
        out.dmu.data[i] = m * inv;
        out.dlogvar.data[i] = 0.5 * (v - 1.0) * inv;
    }
    return out;
}

double loss_eval(LossKind kind, const Tensor& pred, const Tensor& target,
                 const std::vector<int>& labels) {
    switch (kind) {
        case LossKind::mse: return mse_loss(pred, target).value;
        case LossKind::bce: return bce_loss(pred, target).value;
        case LossKind::softmax_ce: return softmax_ce_loss(pred, labels).value;
        case LossKind::cosine: return cosine_loss(pred, target).value;
        case LossKind::vae_kl: return vae_kl_loss(pred, target).value;
    }
    throw std::logic_error("loss_eval: bad kind");
}

}  // namespace omnifuse

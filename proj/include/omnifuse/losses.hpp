#pragma once

#include <string>
#include <vector>

#include "omnifuse/tensor.hpp"

namespace omnifuse {

enum class LossKind { mse, bce, softmax_ce, cosine, vae_kl };

LossKind loss_kind_from_string(const std::string& s);

struct LossValue {
    double value = 0.0;
    Tensor grad;  // dL/dpred, same shape as pred
};

// mean over all entries of (pred - target)^2
LossValue mse_loss(const Tensor& pred, const Tensor& target);

// mean over samples of the per-row squared Euclidean distance; this is the
// reconstruction objective (sum over output dims, averaged over rows)
LossValue recon_sse_loss(const Tensor& pred, const Tensor& target);

// binary cross entropy on probabilities; targets in {0,1}; probabilities
// clamped to [1e-7, 1 - 1e-7] before the logs
LossValue bce_loss(const Tensor& prob, const Tensor& target);

// softmax cross entropy on raw logits [N x C] against class indices
LossValue softmax_ce_loss(const Tensor& logits, const std::vector<int>& labels);

// mean over rows of (1 - cosine similarity); zero-norm rows count distance 1
LossValue cosine_loss(const Tensor& pred, const Tensor& target);

// KL(N(mu, sigma) || N(0, 1)) summed per sample, averaged over samples.
// Returns grads for both heads.
struct VaeKl {
    double value = 0.0;
    Tensor dmu;
    Tensor dlogvar;
};
VaeKl vae_kl_loss(const Tensor& mu, const Tensor& logvar);

// scalar-only evaluation for the generic kinds (softmax targets are class
// indices carried in `labels`; unused for the other kinds)
double loss_eval(LossKind kind, const Tensor& pred, const Tensor& target,
                 const std::vector<int>& labels = {});

Tensor softmax_rows(const Tensor& logits);

}  // namespace omnifuse

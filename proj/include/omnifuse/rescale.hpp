#pragma once

#include "omnifuse/embedding.hpp"

namespace omnifuse {

// Per-modality, per-dimension affine rescaling: the fit-set minimum maps to
// -1 and the maximum to +1. Unseen data may exceed the fit range and is
// clamped to [-1.5, 1.5]; constant dimensions map to 0.
class Rescaler {
public:
    static Rescaler fit(const EmbeddingSet& e);

    EmbeddingSet apply(const EmbeddingSet& e) const;
    bool fitted() const { return fitted_; }
    int64_t total_width() const;

    static constexpr double kClamp = 1.5;

    // raw state, used by checkpointing
    const std::vector<Tensor>& mins() const { return min_; }
    const std::vector<Tensor>& maxs() const { return max_; }
    const std::vector<std::string>& names() const { return names_; }
    static Rescaler from_state(std::vector<Tensor> mins, std::vector<Tensor> maxs,
                               std::vector<std::string> names);

private:
    std::vector<Tensor> min_, max_;  // [1 x d_m] each
    std::vector<std::string> names_;
    bool fitted_ = false;
};

}  // namespace omnifuse

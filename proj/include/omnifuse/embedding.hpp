#pragma once

#include <string>
#include <vector>

#include "omnifuse/tensor.hpp"

namespace omnifuse {

// Per-modality embedding matrices for one dataset; one modality per expert,
// all sharing the same row count.
struct EmbeddingSet {
    struct Modality {
        std::string name;
        Tensor matrix;  // [N x d_m]
    };
    std::vector<Modality> modalities;

    int64_t n_rows() const;
    std::vector<int64_t> widths() const;
    int64_t total_width() const;
    std::vector<std::string> names() const;

    Tensor concat() const;
    static EmbeddingSet split_concat(const Tensor& all, const std::vector<int64_t>& widths,
                                     const std::vector<std::string>& names);
    EmbeddingSet take(const std::vector<int64_t>& row_idx) const;
    EmbeddingSet select(const std::vector<int64_t>& modality_idx) const;
};

}  // namespace omnifuse

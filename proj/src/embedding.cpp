#include "omnifuse/embedding.hpp"

#include <stdexcept>

namespace omnifuse {

int64_t EmbeddingSet::n_rows() const {
    if (modalities.empty()) return 0;
    const int64_t n = modalities[0].matrix.rows();
    for (const Modality& m : modalities)
        if (m.matrix.rows() != n)
            throw std::logic_error("embedding set: unequal row counts across modalities");
    return n;
}

std::vector<int64_t> EmbeddingSet::widths() const {
    std::vector<int64_t> w;
    for (const Modality& m : modalities) w.push_back(m.matrix.cols());
    return w;
}

int64_t EmbeddingSet::total_width() const {
    int64_t t = 0;
    for (const Modality& m : modalities) t += m.matrix.cols();
    return t;
}

std::vector<std::string> EmbeddingSet::names() const {
    std::vector<std::string> n;
    for (const Modality& m : modalities) n.push_back(m.name);
    return n;
}

Tensor EmbeddingSet::concat() const {
    std::vector<Tensor> mats;
    for (const Modality& m : modalities) mats.push_back(m.matrix);
    return hconcat(mats);
}

EmbeddingSet EmbeddingSet::split_concat(const Tensor& all, const std::vector<int64_t>& widths,
                                        const std::vector<std::string>& names) {
    if (widths.size() != names.size())
        throw std::invalid_argument("split_concat: widths/names size mismatch");
    EmbeddingSet out;
    int64_t off = 0;
    for (size_t i = 0; i < widths.size(); ++i) {
        out.modalities.push_back({names[i], slice_cols(all, off, off + widths[i])});
        off += widths[i];
    }
    if (off != all.cols()) throw std::invalid_argument("split_concat: widths do not sum to cols");
    return out;
}

EmbeddingSet EmbeddingSet::take(const std::vector<int64_t>& row_idx) const {
    EmbeddingSet out;
    for (const Modality& m : modalities) out.modalities.push_back({m.name, take_rows(m.matrix, row_idx)});
    return out;
}

EmbeddingSet EmbeddingSet::select(const std::vector<int64_t>& modality_idx) const {
    EmbeddingSet out;
    for (int64_t i : modality_idx) out.modalities.push_back(modalities.at(static_cast<size_t>(i)));
    return out;
}

}  // namespace omnifuse

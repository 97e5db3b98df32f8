#include "omnifuse/rescale.hpp"

#include <algorithm>
#include <stdexcept>

namespace omnifuse {

Rescaler Rescaler::fit(const EmbeddingSet& e) {
    if (e.modalities.empty() || e.n_rows() == 0)
        throw std::invalid_argument("rescaler: cannot fit on an empty set");
    Rescaler r;
    for (const EmbeddingSet::Modality& m : e.modalities) {
        const int64_t d = m.matrix.cols();
        Tensor lo = Tensor::matrix(1, d);
        Tensor hi = Tensor::matrix(1, d);
        for (int64_t j = 0; j < d; ++j) {
            double mn = m.matrix.at(0, j), mx = mn;
            for (int64_t i = 1; i < m.matrix.rows(); ++i) {
                mn = std::min(mn, m.matrix.at(i, j));
                mx = std::max(mx, m.matrix.at(i, j));
            }
            lo.at(0, j) = mn;
            hi.at(0, j) = mx;
        }
        r.min_.push_back(std::move(lo));
        r.max_.push_back(std::move(hi));
        r.names_.push_back(m.name);
    }
    r.fitted_ = true;
    return r;
}

EmbeddingSet Rescaler::apply(const EmbeddingSet& e) const {
    if (!fitted_) throw std::logic_error("rescaler: apply before fit");
    if (e.modalities.size() != min_.size())
        throw std::invalid_argument("rescaler: modality count mismatch");
    EmbeddingSet out;
    for (size_t m = 0; m < e.modalities.size(); ++m) {
        const Tensor& src = e.modalities[m].matrix;
        if (src.cols() != min_[m].cols())
            throw std::invalid_argument("rescaler: width mismatch in modality '" +
                                        e.modalities[m].name + "'");
        Tensor dst = Tensor::matrix(src.rows(), src.cols());
        for (int64_t j = 0; j < src.cols(); ++j) {
            const double lo = min_[m].at(0, j), hi = max_[m].at(0, j);
            const double range = hi - lo;
            for (int64_t i = 0; i < src.rows(); ++i) {
                double v = 0.0;  // constant fit dimension maps to 0
                if (range > 0.0) {
                    v = 2.0 * (src.at(i, j) - lo) / range - 1.0;
                    v = std::clamp(v, -kClamp, kClamp);
                }
                dst.at(i, j) = v;
            }
        }
        out.modalities.push_back({e.modalities[m].name, std::move(dst)});
    }
    return out;
}

int64_t Rescaler::total_width() const {
    int64_t t = 0;
    for (const Tensor& m : min_) t += m.cols();
    return t;
}

Rescaler Rescaler::from_state(std::vector<Tensor> mins, std::vector<Tensor> maxs,
                              std::vector<std::string> names) {
    if (mins.size() != maxs.size() || mins.size() != names.size())
        throw std::invalid_argument("rescaler: inconsistent state");
    Rescaler r;
    r.min_ = std::move(mins);
    r.max_ = std::move(maxs);
    r.names_ = std::move(names);
    r.fitted_ = true;
    return r;
}

}  // namespace omnifuse

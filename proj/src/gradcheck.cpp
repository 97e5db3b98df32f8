#include "omnifuse/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace omnifuse {

GradCheckResult grad_check(const std::vector<Parameter*>& params,
                           const std::function<double()>& loss_and_backward,
                           const std::function<double()>& loss_only, double h,
                           int64_t max_entries_per_param) {
    if (h <= 0.0) throw std::invalid_argument("grad_check: h must be positive");
    loss_and_backward();
    std::vector<Tensor> analytic;
    analytic.reserve(params.size());
    for (const Parameter* p : params) analytic.push_back(p->grad);

    GradCheckResult res;
    for (size_t k = 0; k < params.size(); ++k) {
        Parameter* p = params[k];
        const int64_t n = p->value.numel();
        int64_t stride = 1;
        if (max_entries_per_param > 0 && n > max_entries_per_param)
            stride = (n + max_entries_per_param - 1) / max_entries_per_param;
        for (int64_t i = 0; i < n; i += stride) {
            const double orig = p->value.data[static_cast<size_t>(i)];
            p->value.data[static_cast<size_t>(i)] = orig + h;
            const double lp = loss_only();
            p->value.data[static_cast<size_t>(i)] = orig - h;
            const double lm = loss_only();
            p->value.data[static_cast<size_t>(i)] = orig;
            const double fd = (lp - lm) / (2.0 * h);
            const double an = analytic[k].data[static_cast<size_t>(i)];
            const double rel =
                std::fabs(an - fd) / std::max({std::fabs(an), std::fabs(fd), 1e-12});
            ++res.entries_checked;
            if (rel > res.max_rel_err) {
                res.max_rel_err = rel;
                res.worst_param = p->name;
                res.worst_index = i;
                res.analytic = an;
                res.numeric = fd;
            }
        }
    }
    return res;
}

}  // namespace omnifuse

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "omnifuse/nn.hpp"

namespace omnifuse {

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::string worst_param;
    int64_t worst_index = -1;
    double analytic = 0.0;
    double numeric = 0.0;
    int64_t entries_checked = 0;
};

// Central finite-difference check of analytic gradients.
//   loss_and_backward: zeroes grads, runs a train-mode forward + backward,
//                      returns the loss (must be deterministic).
//   loss_only:         evaluates the same loss without touching grads.
// Relative error per entry: |analytic - fd| / max(|analytic|, |fd|, 1e-12).
// max_entries_per_param > 0 subsamples large parameters (deterministic stride).
GradCheckResult grad_check(const std::vector<Parameter*>& params,
                           const std::function<double()>& loss_and_backward,
                           const std::function<double()>& loss_only, double h,
                           int64_t max_entries_per_param = -1);

}  // namespace omnifuse

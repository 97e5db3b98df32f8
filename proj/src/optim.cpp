#include "omnifuse/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace omnifuse {

namespace {

void require_finite_grads(const std::vector<Parameter*>& params) {
    for (const Parameter* p : params)
        if (!p->grad.all_finite())
            throw std::runtime_error("optimizer: nonfinite gradient in parameter '" + p->name +
                                     "', step aborted");
}

}  // namespace

void Sgd::step(const std::vector<Parameter*>& params) {
    require_finite_grads(params);
    for (Parameter* p : params)
        for (size_t i = 0; i < p->value.data.size(); ++i)
            p->value.data[i] -= lr_ * p->grad.data[i];
}

void Adam::step(const std::vector<Parameter*>& params) {
    require_finite_grads(params);
    if (m_.empty()) {
        for (const Parameter* p : params) {
            m_.push_back(Tensor::zeros_like(p->value));
            v_.push_back(Tensor::zeros_like(p->value));
        }
    }
    if (m_.size() != params.size())
        throw std::logic_error("adam: parameter list changed between steps");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t k = 0; k < params.size(); ++k) {
        Parameter* p = params[k];
        for (size_t i = 0; i < p->value.data.size(); ++i) {
            const double g = p->grad.data[i];
            double& m = m_[k].data[i];
            double& v = v_[k].data[i];
            m = beta1_ * m + (1.0 - beta1_) * g;
            v = beta2_ * v + (1.0 - beta2_) * g * g;
            const double mhat = m / bc1;
            const double vhat = v / bc2;
            p->value.data[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

}  // namespace omnifuse

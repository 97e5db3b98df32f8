#pragma once

#include <vector>

#include "omnifuse/nn.hpp"

namespace omnifuse {

class Optimizer {
public:
    virtual ~Optimizer() = default;
    // applies one update from the accumulated grads; throws on nonfinite grads
    virtual void step(const std::vector<Parameter*>& params) = 0;
};

class Sgd : public Optimizer {
public:
    explicit Sgd(double lr) : lr_(lr) {}
    void step(const std::vector<Parameter*>& params) override;

private:
    double lr_;
};

class Adam : public Optimizer {
public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}
    void step(const std::vector<Parameter*>& params) override;

private:
    double lr_, beta1_, beta2_, eps_;
    int64_t t_ = 0;
    std::vector<Tensor> m_, v_;  // indexed like params
};

}  // namespace omnifuse

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "omnifuse/rng.hpp"
#include "omnifuse/tensor.hpp"

namespace omnifuse {

enum class Activation { identity, relu, elu, tanh_, sigmoid };

Activation activation_from_string(const std::string& s);
std::string activation_to_string(Activation a);
double apply_activation(Activation a, double x);
// derivative expressed from (pre-activation z, output y)
double activation_grad(Activation a, double z, double y);

struct Parameter {
    Tensor value;
    Tensor grad;
    std::string name;

    Parameter() = default;
    Parameter(Tensor v, std::string n)
        : value(std::move(v)), grad(Tensor::zeros_like(value)), name(std::move(n)) {}
};

// Per-feature batch normalization state. gamma/beta are trainable; the
// running statistics are buffers updated in train mode and used at inference.
struct BatchNormState {
    Parameter gamma;
    Parameter beta;
    Tensor running_mean;
    Tensor running_var;
    double momentum = 0.9;
    double eps = 1e-5;
    // when set, train-mode forward normalizes with the running statistics
    // and leaves them untouched (frozen-stats fine-tuning / grad checks)
    bool freeze_stats = false;
};

// Saved forward intermediates for one layer invocation.
struct LayerCache {
    Tensor x;           // layer input
    Tensor pre_bn;      // x*W + b
    Tensor normalized;  // (pre_bn - mean) / sqrt(var + eps)
    Tensor pre_act;     // input of the activation
    Tensor out;         // activation output
    Tensor batch_mean;
    Tensor batch_var;
};

class Layer {
public:
    virtual ~Layer() = default;
    // pure inference pass (batchnorm uses running stats)
    virtual Tensor forward(const Tensor& x) const = 0;
    // training pass: records intermediates into cache, may update BN stats
    virtual Tensor forward_train(const Tensor& x, LayerCache& cache) = 0;
    // consumes dL/dout, accumulates parameter grads, returns dL/dx
    virtual Tensor backward(const Tensor& dout, const LayerCache& cache) = 0;
    virtual std::vector<Parameter*> params() = 0;
    virtual std::unique_ptr<Layer> clone() const = 0;
    virtual int64_t in_dim() const = 0;
    virtual int64_t out_dim() const = 0;
    virtual std::string describe() const = 0;
};

// Fully connected layer: act(BN?(x*W + b)).
class DenseLayer : public Layer {
public:
    DenseLayer(int64_t in, int64_t out, Activation act, bool batch_norm, Rng& rng,
               const std::string& name);

    Tensor forward(const Tensor& x) const override;
    Tensor forward_train(const Tensor& x, LayerCache& cache) override;
    Tensor backward(const Tensor& dout, const LayerCache& cache) override;
    std::vector<Parameter*> params() override;
    std::unique_ptr<Layer> clone() const override;
    int64_t in_dim() const override { return in_; }
    int64_t out_dim() const override { return out_; }
    std::string describe() const override;

    Parameter& weight() { return w_; }
    Parameter& bias() { return b_; }
    bool has_bn() const { return has_bn_; }
    BatchNormState& bn() { return bn_; }
    Activation activation() const { return act_; }

private:
    int64_t in_ = 0, out_ = 0;
    Activation act_ = Activation::identity;
    bool has_bn_ = false;
    Parameter w_;  // [in x out]
    Parameter b_;  // [out]
    BatchNormState bn_;
    std::string name_;
};

// Fixed 3x3 same-padding convolution over row-flattened [N x (C*H*W)]
// feature maps, with a per-channel bias and an activation. Kept simple on
// purpose; only used by the optional image-mode student backbone.
class Conv2dLayer : public Layer {
public:
    Conv2dLayer(int64_t in_c, int64_t h, int64_t w, int64_t out_c, Activation act,
                Rng& rng, const std::string& name);

    Tensor forward(const Tensor& x) const override;
    Tensor forward_train(const Tensor& x, LayerCache& cache) override;
    Tensor backward(const Tensor& dout, const LayerCache& cache) override;
    std::vector<Parameter*> params() override;
    std::unique_ptr<Layer> clone() const override;
    int64_t in_dim() const override { return in_c_ * height_ * width_; }
    int64_t out_dim() const override { return out_c_ * height_ * width_; }
    std::string describe() const override;

    Parameter& weight() { return w_; }
    Parameter& bias() { return b_; }
    int64_t in_channels() const { return in_c_; }
    int64_t out_channels() const { return out_c_; }
    int64_t height() const { return height_; }
    int64_t width() const { return width_; }
    Activation activation() const { return act_; }

private:
    Tensor convolve(const Tensor& x) const;

    int64_t in_c_, height_, width_, out_c_;
    Activation act_;
    Parameter w_;  // [out_c x in_c*9]
    Parameter b_;  // [out_c]
    std::string name_;
};

// 2x2 average pooling over [N x (C*H*W)] maps; H and W must be even.
class AvgPool2dLayer : public Layer {
public:
    AvgPool2dLayer(int64_t c, int64_t h, int64_t w);

    Tensor forward(const Tensor& x) const override;
    Tensor forward_train(const Tensor& x, LayerCache& cache) override;
    Tensor backward(const Tensor& dout, const LayerCache& cache) override;
    std::vector<Parameter*> params() override { return {}; }
    std::unique_ptr<Layer> clone() const override;
    int64_t in_dim() const override { return c_ * h_ * w_; }
    int64_t out_dim() const override { return c_ * (h_ / 2) * (w_ / 2); }
    std::string describe() const override;

    int64_t channels() const { return c_; }
    int64_t height() const { return h_; }
    int64_t width() const { return w_; }

private:
    int64_t c_, h_, w_;
};

using Tape = std::vector<LayerCache>;

// Ordered stack of layers with an explicit tape: forward_train() fills the
// tape, backward() consumes it in reverse. All models in this project are
// sequential stacks, so no general graph is needed.
class Sequential {
public:
    Sequential() = default;
    Sequential(const Sequential& o);
    Sequential& operator=(const Sequential& o);
    Sequential(Sequential&&) = default;
    Sequential& operator=(Sequential&&) = default;

    void add(std::unique_ptr<Layer> layer);
    size_t size() const { return layers_.size(); }
    Layer& layer(size_t i) { return *layers_[i]; }
    const Layer& layer(size_t i) const { return *layers_[i]; }

    Tensor forward(const Tensor& x) const;
    Tensor forward_train(const Tensor& x, Tape& tape);
    // returns dL/dinput
    Tensor backward(const Tensor& dout, const Tape& tape);

    std::vector<Parameter*> params();
    void zero_grad();
    int64_t in_dim() const;
    int64_t out_dim() const;
    std::string describe() const;

private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

// Builds in->hidden...->out dense stacks; hidden layers share one activation,
// the final layer gets its own.
Sequential make_mlp(int64_t in, const std::vector<int64_t>& hidden, int64_t out,
                    Activation hidden_act, Activation out_act, Rng& rng,
                    const std::string& name_prefix, bool hidden_bn = false);

int64_t param_count(std::vector<Parameter*> params);
int64_t param_count(Sequential& net);
uint64_t param_hash(std::vector<Parameter*> params);
uint64_t param_hash(Sequential& net);

void glorot_init(Tensor& w, int64_t fan_in, int64_t fan_out, Rng& rng);

}  // namespace omnifuse

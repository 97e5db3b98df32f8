#include "omnifuse/nn.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace omnifuse {

Activation activation_from_string(const std::string& s) {
    if (s == "identity") return Activation::identity;
    if (s == "relu") return Activation::relu;
    if (s == "elu") return Activation::elu;
    if (s == "tanh") return Activation::tanh_;
    if (s == "sigmoid") return Activation::sigmoid;
    throw std::invalid_argument("unknown activation: " + s);
}

std::string activation_to_string(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::relu: return "relu";
        case Activation::elu: return "elu";
        case Activation::tanh_: return "tanh";
        case Activation::sigmoid: return "sigmoid";
    }
    return "?";
}

double apply_activation(Activation a, double x) {
    switch (a) {
        case Activation::identity: return x;
        case Activation::relu: return x > 0.0 ? x : 0.0;
        case Activation::elu: return x > 0.0 ? x : std::expm1(x);
        case Activation::tanh_: return std::tanh(x);
        case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-x));
    }
    return x;
}

double activation_grad(Activation a, double z, double y) {
    switch (a) {
        case Activation::identity: return 1.0;
        case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::elu: return z > 0.0 ? 1.0 : y + 1.0;
        case Activation::tanh_: return 1.0 - y * y;
        case Activation::sigmoid: return y * (1.0 - y);
    }
    return 1.0;
}

void glorot_init(Tensor& w, int64_t fan_in, int64_t fan_out, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& v : w.data) v = rng.uniform(-limit, limit);
}

// ---------------------------------------------------------------------------
// DenseLayer
// ---------------------------------------------------------------------------

DenseLayer::DenseLayer(int64_t in, int64_t out, Activation act, bool batch_norm,
                       Rng& rng, const std::string& name)
    : in_(in), out_(out), act_(act), has_bn_(batch_norm), name_(name) {
    if (in < 1 || out < 1) throw std::invalid_argument("dense: dims must be >= 1");
    Tensor w = Tensor::matrix(in, out);
    glorot_init(w, in, out, rng);
    w_ = Parameter(std::move(w), name + ".W");
    // with batchnorm the additive bias is redundant (mean subtraction absorbs
    // it and beta takes its place), so it is fixed at zero and not trained
    b_ = Parameter(Tensor::vector(out), name + ".b");
    if (has_bn_) {
        Tensor g = Tensor::vector(out);
        g.fill(1.0);
        bn_.gamma = Parameter(std::move(g), name + ".bn.gamma");
        bn_.beta = Parameter(Tensor::vector(out), name + ".bn.beta");
        bn_.running_mean = Tensor::vector(out);
        bn_.running_var = Tensor::vector(out);
        bn_.running_var.fill(1.0);
    }
}

namespace {

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
    Tensor z = matmul(x, w);
    for (int64_t i = 0; i < z.rows(); ++i) {
        double* row = z.row_ptr(i);
        for (int64_t j = 0; j < z.cols(); ++j) row[j] += b.data[static_cast<size_t>(j)];
    }
    return z;
}

Tensor colsum(const Tensor& a) {
    Tensor out = Tensor::vector(a.cols());
    for (int64_t i = 0; i < a.rows(); ++i) {
        const double* row = a.row_ptr(i);
        for (int64_t j = 0; j < a.cols(); ++j) out.data[static_cast<size_t>(j)] += row[j];
    }
    return out;
}

}  // namespace

Tensor DenseLayer::forward(const Tensor& x) const {
    if (x.cols() != in_)
        throw std::invalid_argument("dense " + name_ + ": input width " +
                                    std::to_string(x.cols()) + " != " + std::to_string(in_));
    check_finite(x, "dense input");
    Tensor z = affine(x, w_.value, b_.value);
    if (has_bn_) {
        for (int64_t i = 0; i < z.rows(); ++i) {
            double* row = z.row_ptr(i);
            for (int64_t j = 0; j < out_; ++j) {
                const size_t d = static_cast<size_t>(j);
                const double inv = 1.0 / std::sqrt(bn_.running_var.data[d] + bn_.eps);
                row[j] = bn_.gamma.value.data[d] * (row[j] - bn_.running_mean.data[d]) * inv +
                         bn_.beta.value.data[d];
            }
        }
    }
    for (double& v : z.data) v = apply_activation(act_, v);
    return z;
}

Tensor DenseLayer::forward_train(const Tensor& x, LayerCache& cache) {
    if (x.cols() != in_)
        throw std::invalid_argument("dense " + name_ + ": input width " +
                                    std::to_string(x.cols()) + " != " + std::to_string(in_));
    check_finite(x, "dense input");
    cache.x = x;
    Tensor z = affine(x, w_.value, b_.value);
    cache.pre_bn = z;
    if (has_bn_) {
        const int64_t n = z.rows();
        Tensor mean = Tensor::vector(out_);
        Tensor var = Tensor::vector(out_);
        if (bn_.freeze_stats) {
            mean = bn_.running_mean;
            var = bn_.running_var;
        } else {
            if (n < 2)
                throw std::invalid_argument("batchnorm: train batch must have >= 2 rows");
            for (int64_t i = 0; i < n; ++i) {
                const double* row = z.row_ptr(i);
                for (int64_t j = 0; j < out_; ++j) mean.data[static_cast<size_t>(j)] += row[j];
            }
            scale_inplace(mean, 1.0 / static_cast<double>(n));
            for (int64_t i = 0; i < n; ++i) {
                const double* row = z.row_ptr(i);
                for (int64_t j = 0; j < out_; ++j) {
                    const double d = row[j] - mean.data[static_cast<size_t>(j)];
                    var.data[static_cast<size_t>(j)] += d * d;
                }
            }
            scale_inplace(var, 1.0 / static_cast<double>(n));
            for (size_t d = 0; d < static_cast<size_t>(out_); ++d) {
                bn_.running_mean.data[d] =
                    bn_.momentum * bn_.running_mean.data[d] + (1.0 - bn_.momentum) * mean.data[d];
                bn_.running_var.data[d] =
                    bn_.momentum * bn_.running_var.data[d] + (1.0 - bn_.momentum) * var.data[d];
            }
        }
        cache.batch_mean = mean;
        cache.batch_var = var;
        Tensor xhat = Tensor::matrix(n, out_);
        Tensor bn_out = Tensor::matrix(n, out_);
        for (int64_t i = 0; i < n; ++i) {
            const double* row = z.row_ptr(i);
            double* hrow = xhat.row_ptr(i);
            double* orow = bn_out.row_ptr(i);
            for (int64_t j = 0; j < out_; ++j) {
                const size_t d = static_cast<size_t>(j);
                const double inv = 1.0 / std::sqrt(var.data[d] + bn_.eps);
                hrow[j] = (row[j] - mean.data[d]) * inv;
                orow[j] = bn_.gamma.value.data[d] * hrow[j] + bn_.beta.value.data[d];
            }
        }
        cache.normalized = std::move(xhat);
        cache.pre_act = std::move(bn_out);
    } else {
        cache.pre_act = z;
    }
    Tensor out = cache.pre_act;
    for (double& v : out.data) v = apply_activation(act_, v);
    cache.out = out;
    return out;
}

Tensor DenseLayer::backward(const Tensor& dout, const LayerCache& cache) {
    const int64_t n = dout.rows();
    // through the activation
    Tensor da = dout;
    for (size_t i = 0; i < da.data.size(); ++i)
        da.data[i] *= activation_grad(act_, cache.pre_act.data[i], cache.out.data[i]);

    Tensor dz;
    if (has_bn_) {
        const Tensor& xhat = cache.normalized;
        for (int64_t j = 0; j < out_; ++j) {
            const size_t d = static_cast<size_t>(j);
            double dg = 0.0, db = 0.0;
            for (int64_t i = 0; i < n; ++i) {
                dg += da.at(i, j) * xhat.at(i, j);
                db += da.at(i, j);
            }
            bn_.gamma.grad.data[d] += dg;
            bn_.beta.grad.data[d] += db;
        }
        dz = Tensor::matrix(n, out_);
        if (bn_.freeze_stats) {
            for (int64_t j = 0; j < out_; ++j) {
                const size_t d = static_cast<size_t>(j);
                const double inv = 1.0 / std::sqrt(cache.batch_var.data[d] + bn_.eps);
                const double g = bn_.gamma.value.data[d] * inv;
                for (int64_t i = 0; i < n; ++i) dz.at(i, j) = da.at(i, j) * g;
            }
        } else {
            const double invn = 1.0 / static_cast<double>(n);
            for (int64_t j = 0; j < out_; ++j) {
                const size_t d = static_cast<size_t>(j);
                const double inv = 1.0 / std::sqrt(cache.batch_var.data[d] + bn_.eps);
                const double gamma = bn_.gamma.value.data[d];
                double sum_dxhat = 0.0, sum_dxhat_xc = 0.0, sum_xc = 0.0;
                for (int64_t i = 0; i < n; ++i) {
                    const double dxhat = da.at(i, j) * gamma;
                    const double xc = cache.pre_bn.at(i, j) - cache.batch_mean.data[d];
                    sum_dxhat += dxhat;
                    sum_dxhat_xc += dxhat * xc;
                    sum_xc += xc;
                }
                const double dvar = sum_dxhat_xc * (-0.5) * inv * inv * inv;
                const double dmean = -inv * sum_dxhat + dvar * (-2.0) * invn * sum_xc;
                for (int64_t i = 0; i < n; ++i) {
                    const double dxhat = da.at(i, j) * gamma;
                    const double xc = cache.pre_bn.at(i, j) - cache.batch_mean.data[d];
                    dz.at(i, j) = dxhat * inv + dvar * 2.0 * xc * invn + dmean * invn;
                }
            }
        }
    } else {
        dz = std::move(da);
    }

    add_inplace(w_.grad, matmul_tn(cache.x, dz));
    if (!has_bn_) add_inplace(b_.grad, colsum(dz));
    return matmul_nt(dz, w_.value);
}

std::vector<Parameter*> DenseLayer::params() {
    if (has_bn_) return {&w_, &bn_.gamma, &bn_.beta};
    return {&w_, &b_};
}

std::unique_ptr<Layer> DenseLayer::clone() const {
    return std::make_unique<DenseLayer>(*this);
}

std::string DenseLayer::describe() const {
    std::ostringstream os;
    os << "dense " << in_ << "->" << out_ << " " << activation_to_string(act_);
    if (has_bn_) os << " +bn";
    return os.str();
}

// ---------------------------------------------------------------------------
// Conv2dLayer — fixed 3x3, same padding, stride 1
// ---------------------------------------------------------------------------

Conv2dLayer::Conv2dLayer(int64_t in_c, int64_t h, int64_t w, int64_t out_c,
                         Activation act, Rng& rng, const std::string& name)
    : in_c_(in_c), height_(h), width_(w), out_c_(out_c), act_(act), name_(name) {
    Tensor wt = Tensor::matrix(out_c, in_c * 9);
    glorot_init(wt, in_c * 9, out_c * 9, rng);
    w_ = Parameter(std::move(wt), name + ".W");
    b_ = Parameter(Tensor::vector(out_c), name + ".b");
}

Tensor Conv2dLayer::convolve(const Tensor& x) const {
    const int64_t n = x.rows();
    Tensor out = Tensor::matrix(n, out_c_ * height_ * width_);
    for (int64_t s = 0; s < n; ++s) {
        const double* xs = x.row_ptr(s);
        double* os = out.row_ptr(s);
        for (int64_t o = 0; o < out_c_; ++o) {
            const double* wo = w_.value.row_ptr(o);
            const double bias = b_.value.data[static_cast<size_t>(o)];
            for (int64_t i = 0; i < height_; ++i) {
                for (int64_t j = 0; j < width_; ++j) {
                    double acc = bias;
                    for (int64_t c = 0; c < in_c_; ++c) {
                        for (int64_t di = -1; di <= 1; ++di) {
                            const int64_t ii = i + di;
                            if (ii < 0 || ii >= height_) continue;
                            for (int64_t dj = -1; dj <= 1; ++dj) {
                                const int64_t jj = j + dj;
                                if (jj < 0 || jj >= width_) continue;
                                acc += xs[(c * height_ + ii) * width_ + jj] *
                                       wo[c * 9 + (di + 1) * 3 + (dj + 1)];
                            }
                        }
                    }
                    os[(o * height_ + i) * width_ + j] = acc;
                }
            }
        }
    }
    return out;
}

Tensor Conv2dLayer::forward(const Tensor& x) const {
    if (x.cols() != in_dim())
        throw std::invalid_argument("conv " + name_ + ": input width mismatch");
    Tensor z = convolve(x);
    for (double& v : z.data) v = apply_activation(act_, v);
    return z;
}

Tensor Conv2dLayer::forward_train(const Tensor& x, LayerCache& cache) {
    if (x.cols() != in_dim())
        throw std::invalid_argument("conv " + name_ + ": input width mismatch");
    cache.x = x;
    cache.pre_act = convolve(x);
    Tensor out = cache.pre_act;
    for (double& v : out.data) v = apply_activation(act_, v);
    cache.out = out;
    return out;
}

Tensor Conv2dLayer::backward(const Tensor& dout, const LayerCache& cache) {
    const int64_t n = dout.rows();
    Tensor da = dout;
    for (size_t i = 0; i < da.data.size(); ++i)
        da.data[i] *= activation_grad(act_, cache.pre_act.data[i], cache.out.data[i]);

    Tensor dx = Tensor::matrix(n, in_dim());
    for (int64_t s = 0; s < n; ++s) {
        const double* xs = cache.x.row_ptr(s);
        const double* ds = da.row_ptr(s);
        double* dxs = dx.row_ptr(s);
        for (int64_t o = 0; o < out_c_; ++o) {
            const double* wo = w_.value.row_ptr(o);
            double* dwo = w_.grad.row_ptr(o);
            double dbias = 0.0;
            for (int64_t i = 0; i < height_; ++i) {
                for (int64_t j = 0; j < width_; ++j) {
                    const double g = ds[(o * height_ + i) * width_ + j];
                    dbias += g;
                    if (g == 0.0) continue;
                    for (int64_t c = 0; c < in_c_; ++c) {
                        for (int64_t di = -1; di <= 1; ++di) {
                            const int64_t ii = i + di;
                            if (ii < 0 || ii >= height_) continue;
                            for (int64_t dj = -1; dj <= 1; ++dj) {
                                const int64_t jj = j + dj;
                                if (jj < 0 || jj >= width_) continue;
                                const int64_t widx = c * 9 + (di + 1) * 3 + (dj + 1);
                                dwo[widx] += xs[(c * height_ + ii) * width_ + jj] * g;
                                dxs[(c * height_ + ii) * width_ + jj] += wo[widx] * g;
                            }
                        }
                    }
                }
            }
            b_.grad.data[static_cast<size_t>(o)] += dbias;
        }
    }
    return dx;
}

std::vector<Parameter*> Conv2dLayer::params() { return {&w_, &b_}; }

std::unique_ptr<Layer> Conv2dLayer::clone() const {
    return std::make_unique<Conv2dLayer>(*this);
}

std::string Conv2dLayer::describe() const {
    std::ostringstream os;
    os << "conv3x3 " << in_c_ << "x" << height_ << "x" << width_ << "->" << out_c_ << " "
       << activation_to_string(act_);
    return os.str();
}

// ---------------------------------------------------------------------------
// AvgPool2dLayer
// ---------------------------------------------------------------------------

AvgPool2dLayer::AvgPool2dLayer(int64_t c, int64_t h, int64_t w) : c_(c), h_(h), w_(w) {
    if (h % 2 != 0 || w % 2 != 0)
        throw std::invalid_argument("avgpool: H and W must be even");
}

Tensor AvgPool2dLayer::forward(const Tensor& x) const {
    const int64_t n = x.rows(), oh = h_ / 2, ow = w_ / 2;
    Tensor out = Tensor::matrix(n, c_ * oh * ow);
    for (int64_t s = 0; s < n; ++s) {
        const double* xs = x.row_ptr(s);
        double* os = out.row_ptr(s);
        for (int64_t c = 0; c < c_; ++c)
            for (int64_t i = 0; i < oh; ++i)
                for (int64_t j = 0; j < ow; ++j) {
                    const int64_t base = (c * h_ + 2 * i) * w_ + 2 * j;
                    os[(c * oh + i) * ow + j] =
                        0.25 * (xs[base] + xs[base + 1] + xs[base + w_] + xs[base + w_ + 1]);
                }
    }
    return out;
}

Tensor AvgPool2dLayer::forward_train(const Tensor& x, LayerCache& cache) {
    cache.x = x;
    cache.out = forward(x);
    return cache.out;
}

Tensor AvgPool2dLayer::backward(const Tensor& dout, const LayerCache&) {
    const int64_t n = dout.rows(), oh = h_ / 2, ow = w_ / 2;
    Tensor dx = Tensor::matrix(n, c_ * h_ * w_);
    for (int64_t s = 0; s < n; ++s) {
        const double* ds = dout.row_ptr(s);
        double* dxs = dx.row_ptr(s);
        for (int64_t c = 0; c < c_; ++c)
            for (int64_t i = 0; i < oh; ++i)
                for (int64_t j = 0; j < ow; ++j) {
                    const double g = 0.25 * ds[(c * oh + i) * ow + j];
                    const int64_t base = (c * h_ + 2 * i) * w_ + 2 * j;
                    dxs[base] += g;
                    dxs[base + 1] += g;
                    dxs[base + w_] += g;
                    dxs[base + w_ + 1] += g;
                }
    }
    return dx;
}

std::unique_ptr<Layer> AvgPool2dLayer::clone() const {
    return std::make_unique<AvgPool2dLayer>(*this);
}

std::string AvgPool2dLayer::describe() const {
    std::ostringstream os;
    os << "avgpool2x2 " << c_ << "x" << h_ << "x" << w_;
    return os.str();
}

// ---------------------------------------------------------------------------
// Sequential
// ---------------------------------------------------------------------------

Sequential::Sequential(const Sequential& o) {
    layers_.reserve(o.layers_.size());
    for (const auto& l : o.layers_) layers_.push_back(l->clone());
}

Sequential& Sequential::operator=(const Sequential& o) {
    if (this == &o) return *this;
    layers_.clear();
    layers_.reserve(o.layers_.size());
    for (const auto& l : o.layers_) layers_.push_back(l->clone());
    return *this;
}

void Sequential::add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

Tensor Sequential::forward(const Tensor& x) const {
    Tensor h = x;
    for (const auto& l : layers_) h = l->forward(h);
    return h;
}

Tensor Sequential::forward_train(const Tensor& x, Tape& tape) {
    tape.clear();
    tape.resize(layers_.size());
    Tensor h = x;
    for (size_t i = 0; i < layers_.size(); ++i) h = layers_[i]->forward_train(h, tape[i]);
    return h;
}

Tensor Sequential::backward(const Tensor& dout, const Tape& tape) {
    if (tape.size() != layers_.size())
        throw std::logic_error("sequential: backward without matching forward tape");
    Tensor g = dout;
    for (size_t i = layers_.size(); i-- > 0;) g = layers_[i]->backward(g, tape[i]);
    return g;
}

std::vector<Parameter*> Sequential::params() {
    std::vector<Parameter*> out;
    for (auto& l : layers_)
        for (Parameter* p : l->params()) out.push_back(p);
    return out;
}

void Sequential::zero_grad() {
    for (Parameter* p : params()) p->grad.fill(0.0);
}

int64_t Sequential::in_dim() const {
    if (layers_.empty()) throw std::logic_error("sequential: empty");
    return layers_.front()->in_dim();
}

int64_t Sequential::out_dim() const {
    if (layers_.empty()) throw std::logic_error("sequential: empty");
    return layers_.back()->out_dim();
}

std::string Sequential::describe() const {
    std::ostringstream os;
    for (size_t i = 0; i < layers_.size(); ++i) os << (i ? " | " : "") << layers_[i]->describe();
    return os.str();
}

Sequential make_mlp(int64_t in, const std::vector<int64_t>& hidden, int64_t out,
                    Activation hidden_act, Activation out_act, Rng& rng,
                    const std::string& name_prefix, bool hidden_bn) {
    Sequential net;
    int64_t prev = in;
    for (size_t i = 0; i < hidden.size(); ++i) {
        net.add(std::make_unique<DenseLayer>(prev, hidden[i], hidden_act, hidden_bn, rng,
                                             name_prefix + ".l" + std::to_string(i)));
        prev = hidden[i];
    }
    net.add(std::make_unique<DenseLayer>(prev, out, out_act, false, rng,
                                         name_prefix + ".l" + std::to_string(hidden.size())));
    return net;
}

int64_t param_count(std::vector<Parameter*> params) {
    int64_t n = 0;
    for (const Parameter* p : params) n += p->value.numel();
    return n;
}

int64_t param_count(Sequential& net) { return param_count(net.params()); }

uint64_t param_hash(std::vector<Parameter*> params) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const Parameter* p : params)
        h = fnv1a64(p->value.data.data(), p->value.data.size() * sizeof(double), h);
    return h;
}

uint64_t param_hash(Sequential& net) { return param_hash(net.params()); }

}  // namespace omnifuse

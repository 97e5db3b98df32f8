#include "omnifuse/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>

namespace omnifuse {

namespace {

int64_t shape_numel(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) {
        if (d < 0) throw std::invalid_argument("tensor: negative dimension");
        n *= d;
    }
    return n;
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() +
                                " vs " + b.shape_str());
}

}  // namespace

Tensor::Tensor(std::vector<int64_t> s) : shape(std::move(s)) {
    data.assign(static_cast<size_t>(shape_numel(shape)), 0.0);
}

Tensor::Tensor(std::vector<int64_t> s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
    if (shape_numel(shape) != static_cast<int64_t>(data.size()))
        throw std::invalid_argument("tensor: shape/data size mismatch");
}

Tensor Tensor::matrix(int64_t rows, int64_t cols) { return Tensor({rows, cols}); }
Tensor Tensor::vector(int64_t n) { return Tensor({n}); }
Tensor Tensor::zeros_like(const Tensor& t) { return Tensor(t.shape); }

int64_t Tensor::numel() const { return static_cast<int64_t>(data.size()); }

int64_t Tensor::rows() const {
    if (shape.size() != 2) throw std::logic_error("tensor: rows() on non-matrix");
    return shape[0];
}

int64_t Tensor::cols() const {
    if (shape.size() != 2) throw std::logic_error("tensor: cols() on non-matrix");
    return shape[1];
}

double& Tensor::at(int64_t i, int64_t j) { return data[static_cast<size_t>(i * cols() + j)]; }
double Tensor::at(int64_t i, int64_t j) const {
    return data[static_cast<size_t>(i * cols() + j)];
}

double* Tensor::row_ptr(int64_t i) { return data.data() + i * cols(); }
const double* Tensor::row_ptr(int64_t i) const { return data.data() + i * cols(); }

void Tensor::fill(double v) { data.assign(data.size(), v); }

bool Tensor::same_shape(const Tensor& o) const { return shape == o.shape; }

bool Tensor::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
    os << "]";
    return os.str();
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape.size() != 2 || b.shape.size() != 2 || a.cols() != b.rows())
        shape_error("matmul", a, b);
    const int64_t m = a.rows(), k = a.cols(), n = b.cols();
    Tensor out = Tensor::matrix(m, n);
    for (int64_t i = 0; i < m; ++i) {
        const double* arow = a.row_ptr(i);
        double* orow = out.row_ptr(i);
        for (int64_t p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = b.row_ptr(p);
            for (int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    if (a.shape.size() != 2 || b.shape.size() != 2 || a.rows() != b.rows())
        shape_error("matmul_tn", a, b);
    const int64_t m = a.rows(), k = a.cols(), n = b.cols();
    Tensor out = Tensor::matrix(k, n);
    for (int64_t r = 0; r < m; ++r) {
        const double* arow = a.row_ptr(r);
        const double* brow = b.row_ptr(r);
        for (int64_t i = 0; i < k; ++i) {
            const double av = arow[i];
            if (av == 0.0) continue;
            double* orow = out.row_ptr(i);
            for (int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    if (a.shape.size() != 2 || b.shape.size() != 2 || a.cols() != b.cols())
        shape_error("matmul_nt", a, b);
    const int64_t m = a.rows(), k = a.cols(), n = b.rows();
    Tensor out = Tensor::matrix(m, n);
    for (int64_t i = 0; i < m; ++i) {
        const double* arow = a.row_ptr(i);
        double* orow = out.row_ptr(i);
        for (int64_t j = 0; j < n; ++j) {
            const double* brow = b.row_ptr(j);
            double acc = 0.0;
            for (int64_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            orow[j] = acc;
        }
    }
    return out;
}

Tensor transpose(const Tensor& a) {
    const int64_t m = a.rows(), n = a.cols();
    Tensor out = Tensor::matrix(n, m);
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
    return out;
}

Tensor hconcat(const std::vector<Tensor>& mats) {
    if (mats.empty()) throw std::invalid_argument("hconcat: empty list");
    const int64_t rows = mats[0].rows();
    int64_t total = 0;
    for (const Tensor& m : mats) {
        if (m.rows() != rows) shape_error("hconcat", mats[0], m);
        total += m.cols();
    }
    Tensor out = Tensor::matrix(rows, total);
    for (int64_t i = 0; i < rows; ++i) {
        double* orow = out.row_ptr(i);
        int64_t off = 0;
        for (const Tensor& m : mats) {
            const double* row = m.row_ptr(i);
            for (int64_t j = 0; j < m.cols(); ++j) orow[off + j] = row[j];
            off += m.cols();
        }
    }
    return out;
}

Tensor slice_cols(const Tensor& a, int64_t begin, int64_t end) {
    if (begin < 0 || end > a.cols() || begin > end)
        throw std::invalid_argument("slice_cols: bad range");
    Tensor out = Tensor::matrix(a.rows(), end - begin);
    for (int64_t i = 0; i < a.rows(); ++i) {
        const double* row = a.row_ptr(i);
        double* orow = out.row_ptr(i);
        for (int64_t j = begin; j < end; ++j) orow[j - begin] = row[j];
    }
    return out;
}

Tensor take_rows(const Tensor& a, const std::vector<int64_t>& idx) {
    Tensor out = Tensor::matrix(static_cast<int64_t>(idx.size()), a.cols());
    for (size_t i = 0; i < idx.size(); ++i) {
        const double* src = a.row_ptr(idx[i]);
        double* dst = out.row_ptr(static_cast<int64_t>(i));
        for (int64_t j = 0; j < a.cols(); ++j) dst[j] = src[j];
    }
    return out;
}

void add_inplace(Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) shape_error("add", a, b);
    for (size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

void scale_inplace(Tensor& a, double s) {
    for (double& v : a.data) v *= s;
}

double dot(const Tensor& a, const Tensor& b) {
    if (a.numel() != b.numel()) shape_error("dot", a, b);
    double acc = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) acc += a.data[i] * b.data[i];
    return acc;
}

double sum_sq_diff(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) shape_error("sum_sq_diff", a, b);
    double acc = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        acc += d * d;
    }
    return acc;
}

void check_finite(const Tensor& t, const char* what) {
    if (!t.all_finite())
        throw std::runtime_error(std::string(what) + ": nonfinite values");
}

}  // namespace omnifuse

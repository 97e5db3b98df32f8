#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace omnifuse {

// Dense row-major tensor of 64-bit reals. Most of the library works with
// 2-D matrices [rows x cols]; 1-D is used for biases and label vectors.
struct Tensor {
    std::vector<int64_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int64_t> s);
    Tensor(std::vector<int64_t> s, std::vector<double> d);

    static Tensor matrix(int64_t rows, int64_t cols);
    static Tensor vector(int64_t n);
    static Tensor zeros_like(const Tensor& t);

    int64_t numel() const;
    int64_t rows() const;  // requires 2-D
    int64_t cols() const;

    double& at(int64_t i, int64_t j);
    double at(int64_t i, int64_t j) const;
    double* row_ptr(int64_t i);
    const double* row_ptr(int64_t i) const;

    void fill(double v);
    bool same_shape(const Tensor& o) const;
    bool all_finite() const;
    std::string shape_str() const;
};

// a[m x k] * b[k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);
// a^T * b where a is [m x k], b is [m x n] -> [k x n]
Tensor matmul_tn(const Tensor& a, const Tensor& b);
// a * b^T where a is [m x k], b is [n x k] -> [m x n]
Tensor matmul_nt(const Tensor& a, const Tensor& b);

Tensor transpose(const Tensor& a);
Tensor hconcat(const std::vector<Tensor>& mats);
Tensor slice_cols(const Tensor& a, int64_t begin, int64_t end);
Tensor take_rows(const Tensor& a, const std::vector<int64_t>& idx);

void add_inplace(Tensor& a, const Tensor& b);
void scale_inplace(Tensor& a, double s);
double dot(const Tensor& a, const Tensor& b);
double sum_sq_diff(const Tensor& a, const Tensor& b);

void check_finite(const Tensor& t, const char* what);

}  // namespace omnifuse

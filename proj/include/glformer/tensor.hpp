#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "glformer/error.hpp"

namespace glformer {

// Dense n-dimensional array of 64-bit floats, row-major. Values are treated as
// immutable once an operation has produced them; all exported operations are
// pure functions and safe to call concurrently.
class Tensor {
public:
    Tensor() = default;

    // Zero-filled tensor of the given shape.
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor scalar(double v);
    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<std::size_t> shape, double v);
    static Tensor identity(std::size_t n);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t ndim() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t dim(std::size_t i) const { return shape_[i]; }
    bool empty() const { return data_.empty() && shape_.empty(); }

    // 2-D accessors (rows x cols).
    std::size_t rows() const { return shape_.at(0); }
    std::size_t cols() const { return shape_.at(1); }
    double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

    double& operator[](std::size_t flat) { return data_[flat]; }
    double operator[](std::size_t flat) const { return data_[flat]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    bool operator==(const Tensor& other) const {
        return shape_ == other.shape_ && data_ == other.data_;
    }

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

std::string shape_str(const std::vector<std::size_t>& shape);

// ---- kernels -------------------------------------------------------------
// All reductions use a fixed ascending-index summation order so that repeated
// runs are bit-identical.

// Standard matrix product; inner-dimension mismatch raises DimensionError
// naming both shapes. Summation over k is ascending.
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b); // elementwise
Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);
Tensor relu(const Tensor& a);

// Numerically stable softmax along `axis` (max subtraction); every slice sums
// to 1.
Tensor softmax(const Tensor& x, std::size_t axis);

// Per-vector normalization over the last axis of length D = gamma.size().
// Pre-affine output is (x - mean) / sqrt(var); when var < eps the pre-affine
// output is 0 (zero-variance convention).
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

Tensor reshape(const Tensor& a, std::vector<std::size_t> shape);
double sum(const Tensor& a);
Tensor row_sums(const Tensor& a);  // m x n -> m x 1
Tensor mean_rows(const Tensor& a); // m x n -> 1 x n

double max_abs(const Tensor& a);
double max_abs_diff(const Tensor& a, const Tensor& b);

} // namespace glformer

#include "glformer/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace glformer {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

} // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_product(shape_)) {
        throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_str(shape_));
    }
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::full(std::vector<std::size_t> shape, double v) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
}

Tensor Tensor::identity(std::size_t n) {
    Tensor t({n, n});
    for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

bool Tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::string shape_str(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.ndim() != 2 || b.ndim() != 2) {
        throw DimensionError("matmul expects 2-D tensors, got " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
    }
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul inner dimensions disagree: " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
    }
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    Tensor out({m, n});
    // i,k,j loop order: each out(i,j) accumulates in ascending k.
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = a.at(i, kk);
            const double* brow = b.data() + kk * n;
            double* orow = out.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

Tensor transpose(const Tensor& a) {
    if (a.ndim() != 2) {
        throw DimensionError("transpose expects a 2-D tensor, got " + shape_str(a.shape()));
    }
    const std::size_t m = a.rows(), n = a.cols();
    Tensor out({n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
    return out;
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + " shape mismatch: " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    }
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
    return out;
}

Tensor add_scalar(const Tensor& a, double c) {
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += c;
    return out;
}

Tensor mul_scalar(const Tensor& a, double c) {
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
    return out;
}

Tensor relu(const Tensor& a) {
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
    return out;
}

Tensor softmax(const Tensor& x, std::size_t axis) {
    if (axis >= x.ndim()) {
        throw DimensionError("softmax axis " + std::to_string(axis) + " invalid for shape " +
                             shape_str(x.shape()));
    }
    const std::size_t len = x.dim(axis);
    std::size_t inner = 1;
    for (std::size_t i = axis + 1; i < x.ndim(); ++i) inner *= x.dim(i);
    std::size_t outer = x.size() / (len * inner);

    Tensor out = x;
    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
            const std::size_t base = o * len * inner + in;
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t l = 0; l < len; ++l) mx = std::max(mx, x[base + l * inner]);
            double denom = 0.0;
            for (std::size_t l = 0; l < len; ++l) {
                const double e = std::exp(x[base + l * inner] - mx);
                out[base + l * inner] = e;
                denom += e;
            }
            const double inv = 1.0 / denom;
            for (std::size_t l = 0; l < len; ++l) out[base + l * inner] *= inv;
        }
    }
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    if (x.ndim() == 0 || gamma.size() != beta.size()) {
        throw DimensionError("layer_norm expects matching gamma/beta over the last axis");
    }
    const std::size_t d = x.shape().back();
    if (gamma.size() != d) {
        throw DimensionError("layer_norm feature width " + std::to_string(d) +
                             " does not match gamma/beta length " + std::to_string(gamma.size()));
    }
    Tensor out = x;
    const std::size_t nvec = x.size() / d;
    for (std::size_t v = 0; v < nvec; ++v) {
        double* row = out.data() + v * d;
        double mean = 0.0;
        for (std::size_t i = 0; i < d; ++i) mean += row[i];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            const double c = row[i] - mean;
            var += c * c;
        }
        var /= static_cast<double>(d);
        if (var < eps) {
            for (std::size_t i = 0; i < d; ++i) row[i] = beta[i];
        } else {
            const double inv = 1.0 / std::sqrt(var);
            for (std::size_t i = 0; i < d; ++i) row[i] = (row[i] - mean) * inv * gamma[i] + beta[i];
        }
    }
    return out;
}

Tensor reshape(const Tensor& a, std::vector<std::size_t> shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    if (n != a.size()) {
        throw DimensionError("reshape from " + shape_str(a.shape()) + " to " + shape_str(shape) +
                             " changes element count");
    }
    return Tensor(std::move(shape), a.raw());
}

double sum(const Tensor& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i];
    return s;
}

Tensor row_sums(const Tensor& a) {
    Tensor out({a.rows(), 1});
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += a.at(i, j);
        out.at(i, 0) = s;
    }
    return out;
}

Tensor mean_rows(const Tensor& a) {
    Tensor out({1, a.cols()});
    for (std::size_t j = 0; j < a.cols(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.rows(); ++i) s += a.at(i, j);
        out.at(0, j) = s / static_cast<double>(a.rows());
    }
    return out;
}

double max_abs(const Tensor& a) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i]));
    return m;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

} // namespace glformer

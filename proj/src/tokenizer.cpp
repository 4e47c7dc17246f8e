#include "glformer/tokenizer.hpp"

#include <cmath>

namespace glformer {

namespace {

void check_frame(const Tensor& frame) {
    if (frame.ndim() != 3 || frame.dim(0) < 1 || frame.dim(1) < 1 || frame.dim(2) < 1) {
        throw DimensionError("frame feature must be c x h x w with all dims >= 1, got " +
                             shape_str(frame.shape()));
    }
}

} // namespace

Tensor tokenize(const Tensor& frame) {
    check_frame(frame);
    const std::size_t c = frame.dim(0), m = frame.dim(1) * frame.dim(2);
    return transpose(reshape(frame, {c, m}));
}

Tensor tokenize(const Tensor& frame, const Tensor& proj) {
    check_frame(frame);
    if (proj.ndim() != 2 || proj.rows() != frame.dim(0)) {
        throw DimensionError("token projection must be c x D with c = " +
                             std::to_string(frame.dim(0)) + ", got " + shape_str(proj.shape()));
    }
    return matmul(tokenize(frame), proj);
}

Var tokenize(const Var& frame) {
    check_frame(frame.value());
    const std::size_t c = frame.value().dim(0);
    const std::size_t m = frame.value().dim(1) * frame.value().dim(2);
    return transpose(reshape(frame, {c, m}));
}

Var tokenize(const Var& frame, const Var& proj) {
    check_frame(frame.value());
    if (proj.value().ndim() != 2 || proj.value().rows() != frame.value().dim(0)) {
        throw DimensionError("token projection must be c x D with c = " +
                             std::to_string(frame.value().dim(0)) + ", got " +
                             shape_str(proj.value().shape()));
    }
    return matmul(tokenize(frame), proj);
}

Tensor detokenize(const Tensor& tokens, std::size_t c, std::size_t h, std::size_t w) {
    if (tokens.ndim() != 2 || tokens.rows() != h * w || tokens.cols() != c) {
        throw DimensionError("detokenize expects " + std::to_string(h * w) + " x " +
                             std::to_string(c) + " tokens, got " + shape_str(tokens.shape()));
    }
    return reshape(transpose(tokens), {c, h, w});
}

Tensor positional_encoding(std::size_t h, std::size_t w, std::size_t d) {
    if (d == 0 || d % 4 != 0) {
        throw ConfigError("positional encoding dimension must be divisible by 4, got " +
                          std::to_string(d));
    }
    const std::size_t half = d / 2;   // channels per coordinate
    const std::size_t pairs = half / 2;
    std::vector<double> inv_freq(pairs);
    for (std::size_t i = 0; i < pairs; ++i) {
        inv_freq[i] = 1.0 / std::pow(10000.0, 2.0 * static_cast<double>(i) /
                                                  static_cast<double>(half));
    }
    Tensor out({h * w, d});
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            double* row = out.data() + (y * w + x) * d;
            for (std::size_t i = 0; i < pairs; ++i) {
                const double ay = static_cast<double>(y) * inv_freq[i];
                const double ax = static_cast<double>(x) * inv_freq[i];
                row[2 * i] = std::sin(ay);
                row[2 * i + 1] = std::cos(ay);
                row[half + 2 * i] = std::sin(ax);
                row[half + 2 * i + 1] = std::cos(ax);
            }
        }
    }
    return out;
}

} // namespace glformer

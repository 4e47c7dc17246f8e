#pragma once

#include <optional>

#include "glformer/tape.hpp"
#include "glformer/tensor.hpp"

namespace glformer {

// Token + positional features of one frame, both M x D with M = h*w.
// Positions depend only on the grid geometry, never on token values; the
// token/position addition happens in the consumer modules.
struct TokenFrame {
    Var tokens;
    Var positions;
};

// Convert a c x h x w frame feature into M x D token features, M = h*w.
// Token y*w + x is the channel vector at spatial position (y, x); without a
// projection this is a bijective reshape (D = c), with a projection the
// channel vector is right-multiplied by proj (c x D).
Tensor tokenize(const Tensor& frame);
Tensor tokenize(const Tensor& frame, const Tensor& proj);
Var tokenize(const Var& frame);
Var tokenize(const Var& frame, const Var& proj);

// Inverse of the projection-free tokenization.
Tensor detokenize(const Tensor& tokens, std::size_t c, std::size_t h, std::size_t w);

// 2-D sinusoidal positional features, M x D. The first D/2 channels encode
// the y coordinate and the last D/2 the x coordinate; each half interleaves
// sin/cos pairs at frequencies 10000^(2i/(D/2)). D must be divisible by 4.
Tensor positional_encoding(std::size_t h, std::size_t w, std::size_t d);

} // namespace glformer

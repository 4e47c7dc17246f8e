#pragma once

#include <utility>

#include "glformer/attention.hpp" // ParamVisitor
#include "glformer/rng.hpp"
#include "glformer/tape.hpp"

namespace glformer {

struct BlenderParams {
    Var w_alpha; // 2D x 2D projection

    void for_each_param(const std::string& prefix, const ParamVisitor& fn);
    void bind(Tape& tape);
};

BlenderParams init_blender(std::size_t d, const Rng& rng);

// Input-conditioned convex weights: project concat[G; L] (2D x NM) by
// w_alpha, split the result into two D x NM halves and softmax across the
// paired halves per element, so alpha_gf + alpha_lf = 1 everywhere.
std::pair<Var, Var> blend_weights(const Var& g, const Var& l, const Var& w_alpha);

// B = alpha_gf * G + alpha_lf * L (elementwise); an elementwise convex
// combination, so min(G, L) <= B <= max(G, L).
Var blend(const Var& g, const Var& l, const Var& w_alpha);

} // namespace glformer

#include "glformer/blender.hpp"

namespace glformer {

void BlenderParams::for_each_param(const std::string& prefix, const ParamVisitor& fn) {
    fn(prefix + "/w_alpha", w_alpha);
}

void BlenderParams::bind(Tape& tape) {
    for_each_param("", [&tape](const std::string&, Var& v) { v = tape.leaf(v.value()); });
}

BlenderParams init_blender(std::size_t d, const Rng& rng) {
    BlenderParams p;
    p.w_alpha = init_uniform({2 * d, 2 * d}, 2 * d, rng.derive("w_alpha"));
    return p;
}

namespace {

void validate_blend(const Var& g, const Var& l, const Var& w_alpha) {
    const Tensor& gv = g.value();
    const Tensor& lv = l.value();
    if (gv.ndim() != 2 || !gv.same_shape(lv)) {
        throw DimensionError("blend expects G and L of identical D x NM shape, got " +
                             shape_str(gv.shape()) + " vs " + shape_str(lv.shape()));
    }
    const std::size_t d = gv.rows();
    if (w_alpha.value().ndim() != 2 || w_alpha.value().rows() != 2 * d ||
        w_alpha.value().cols() != 2 * d) {
        throw DimensionError("blend projection must be 2D x 2D = " + std::to_string(2 * d) +
                             " square, got " + shape_str(w_alpha.value().shape()));
    }
}

} // namespace

std::pair<Var, Var> blend_weights(const Var& g, const Var& l, const Var& w_alpha) {
    validate_blend(g, l, w_alpha);
    const std::size_t d = g.value().rows();
    Var stacked = concat_rows({g, l});          // 2D x NM
    Var logits = matmul(w_alpha, stacked);      // 2D x NM
    Var top = slice_rows(logits, 0, d);
    Var bottom = slice_rows(logits, d, 2 * d);
    // Two-way softmax across the paired halves, elementwise.
    Var alpha_gf = sigmoid(sub(top, bottom));
    Var alpha_lf = sigmoid(sub(bottom, top));
    return {alpha_gf, alpha_lf};
}

Var blend(const Var& g, const Var& l, const Var& w_alpha) {
    auto [alpha_gf, alpha_lf] = blend_weights(g, l, w_alpha);
    return add(mul(alpha_gf, g), mul(alpha_lf, l));
}

} // namespace glformer

#include "glformer/tape.hpp"

#include <cmath>
#include <initializer_list>
#include <limits>
#include <utility>

namespace glformer {

namespace {

Tape* common_tape(std::initializer_list<const Var*> vs) {
    Tape* t = nullptr;
    for (const Var* v : vs) {
        if (!v->tracked()) continue;
        if (t && v->tape() != t) {
            throw ContractError("operation mixes variables from different tapes");
        }
        t = v->tape();
    }
    return t;
}

} // namespace

Var Tape::leaf(Tensor value) {
    auto sp = std::make_shared<const Tensor>(std::move(value));
    nodes_.push_back({sp, nullptr});
    return Var(this, static_cast<NodeId>(nodes_.size()) - 1, sp);
}

Var Tape::record(Tensor value, Pullback pullback) {
    auto sp = std::make_shared<const Tensor>(std::move(value));
    nodes_.push_back({sp, std::move(pullback)});
    return Var(this, static_cast<NodeId>(nodes_.size()) - 1, sp);
}

void Tape::accumulate(NodeId id, const Tensor& grad) {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) {
        throw ContractError("gradient accumulation for an unknown node");
    }
    Tensor& slot = grads_[static_cast<std::size_t>(id)];
    if (slot.size() == 0) {
        slot = grad;
    } else {
        if (!slot.same_shape(grad)) {
            throw ContractError("gradient shape mismatch during accumulation");
        }
        for (std::size_t i = 0; i < slot.size(); ++i) slot[i] += grad[i];
    }
}

void Tape::backward(const Var& output) {
    if (output.tape() != this) throw ContractError("backward: output is not on this tape");
    if (output.value().size() != 1) {
        throw ContractError("backward requires a scalar-valued output node");
    }
    grads_.assign(nodes_.size(), Tensor{});
    accumulate(output.id(), Tensor(output.value().shape(), {1.0}));
    for (NodeId i = output.id(); i >= 0; --i) {
        const auto idx = static_cast<std::size_t>(i);
        if (grads_[idx].size() == 0 || !nodes_[idx].pullback) continue;
        nodes_[idx].pullback(grads_[idx], *this);
    }
}

Tensor Tape::gradient(const Var& v) const {
    if (v.tape() != this) throw ContractError("gradient: variable is not on this tape");
    const auto idx = static_cast<std::size_t>(v.id());
    if (idx >= grads_.size() || grads_[idx].size() == 0) {
        return Tensor(v.value().shape());
    }
    return grads_[idx];
}

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double h) {
    Tensor grad(x.shape());
    Tensor probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + h;
        const double fp = f(probe);
        probe[i] = orig - h;
        const double fm = f(probe);
        probe[i] = orig;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

// ---- operations ------------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
    Tensor out = matmul(a.value(), b.value());
    Tape* t = common_tape({&a, &b});
    if (!t) return Var(std::move(out));
    auto av = a.ptr();
    auto bv = b.ptr();
    const NodeId ai = a.tracked() ? a.id() : -1;
    const NodeId bi = b.tracked() ? b.id() : -1;
    return t->record(std::move(out), [=](const Tensor& g, Tape& tp) {
        if (ai >= 0) tp.accumulate(ai, matmul(g, transpose(*bv)));
        if (bi >= 0) tp.accumulate(bi, matmul(transpose(*av), g));
    });
}

Var transpose(const Var& a) {
    Tensor out = transpose(a.value());
    Tape* t = common_tape({&a});
    if (!t) return Var(std::move(out));
    const NodeId ai = a.id();
    return t->record(std::move(out),
                     [=](const Tensor& g, Tape& tp) { tp.accumulate(ai, transpose(g)); });
}

Var add(const Var& a, const Var& b) {
    Tensor out = add(a.value(), b.value());
    Tape* t = common_tape({&a, &b});
    if (!t) return Var(std::move(out));
    const NodeId ai = a.tracked() ? a.id() : -1;
    const NodeId bi = b.tracked() ? b.id() : -1;
    return t->record(std::move(out), [=](const Tensor& g, Tape& tp) {
        if (ai >= 0) tp.accumulate(ai, g);
        if (bi >= 0) tp.accumulate(bi, g);
    });
}

Var sub(const Var& a, const Var& b) {
    Tensor out = sub(a.value(), b.value());
    Tape* t = common_tape({&a, &b});
    if (!t) return Var(std::move(out));
    const NodeId ai = a.tracked() ? a.id() : -1;
    const NodeId bi = b.tracked() ? b.id() : -1;
    return t->record(std::move(out), [=](const Tensor& g, Tape& tp) {
        if (ai >= 0) tp.accumulate(ai, g);
        if (bi >= 0) tp.accumulate(bi, mul_scalar(g, -1.0));
    });
}

Var mul(const Var& a, const Var& b) {
    Tensor out = mul(a.value(), b.value());
    Tape* t = common_tape({&a, &b});
    if (!t) return Var(std::move(out));
    auto av = a.ptr();
    auto bv = b.ptr();
    const NodeId ai = a.tracked() ? a.id() : -1;
    const NodeId bi = b.tracked() ? b.id() : -1;
    return t->record(std::move(out), [=](const Tensor& g, Tape& tp) {
        if (ai >= 0) tp.accumulate(ai, mul(g, *bv));
        if (bi >= 0) tp.accumulate(bi, mul(g, *av));
    });
}

Var add_scalar(const Var& a, double c) {
    Tensor out = add_scalar(a.value(), c);
    Tape* t = common_tape({&a});
    if (!t) return Var(std::move(out));
    const NodeId ai = a.id();
    return t->record(std::move(out), [=](const Tensor& g, Tape& tp) { tp.accumulate(ai, g); });
}

Var mul_scalar(const Var& a, double c) {
    Tensor out = mul_scalar(a.value(), c);
    Tape* t = common_tape({&a});
    if (!t) return Var(std::move(out));
    const NodeId ai = a.id();
    return t->record(std::move(out),
                     [=](const Tensor& g, Tape& tp) { tp.accumulate(ai, mul_scalar(g, c)); });
}

Var relu(const Var& a) {
    Tensor out = relu(a.value());
    Tape* t = common_tape({&a});
    if (!t) return Var(std::move(out));
    auto av = a.ptr();
    const NodeId ai = a.id();
    return t->record(std::move(out), [=](const Tensor& g, Tape& tp) {
        Tensor da = g;
        for (std::size_t i = 0; i < da.size(); ++i) {
            if ((*av)[i] <= 0.0) da[i] = 0.0;
        }
        tp.accumulate(ai, da);
    });
}

Var softmax(const Var& x, std::size_t axis) {
    Tensor out = softmax(x.value(), axis);
    Tape* t = common_tape({&x});
    if (!t) return Var(std::move(out));
    const NodeId xi = x.id();
    auto outv = std::make_shared<const Tensor>(out);
    return t->record(std::move(out), [=](const Tensor& g, Tape& tp) {
        const Tensor& p = *outv;
        const std::size_t len = p.dim(axis);
        std::size_t inner = 1;
        for (std::size_t i = axis + 1; i < p.ndim(); ++i) inner *= p.dim(i);
        const std::size_t outer = p.size() / (len * inner);
        Tensor dx(p.shape());
        for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t in = 0; in < inner; ++in) {
                const std::size_t base = o * len * inner + in;
                double dot = 0.0;
                for (std::size_t l = 0; l < len; ++l) {
                    dot += g[base + l * inner] * p[base + l * inner];
                }
                for (std::size_t l = 0; l < len; ++l) {
                    const std::size_t k = base + l * inner;
                    dx[k] = p[k] * (g[k] - dot);
                }
            }
        }
        tp.accumulate(xi, dx);
    });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
    Tensor out = layer_norm(x.value(), gamma.value(), beta.value(), eps);
    Tape* t = common_tape({&x, &gamma, &beta});
    if (!t) return Var(std::move(out));
    auto xv = x.ptr();
    auto gv = gamma.ptr();
    const NodeId xi = x.tracked() ? x.id() : -1;
    const NodeId gi = gamma.tracked() ? gamma.id() : -1;
    const NodeId bi = beta.tracked() ? beta.id() : -1;
    return t->record(std::move(out), [=](const Tensor& g, Tape& tp) {
        const std::size_t d = xv->shape().back();
        const std::size_t nvec = xv->size() / d;
        Tensor dx(xv->shape());
        Tensor dgamma(gv->shape());
        Tensor dbeta(gv->shape());
        std::vector<double> y(d);
        for (std::size_t v = 0; v < nvec; ++v) {
            const double* row = xv->data() + v * d;
            const double* grow = g.data() + v * d;
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
                // Pre-affine output is the constant 0: only beta receives gradient.
                for (std::size_t i = 0; i < d; ++i) dbeta[i] += grow[i];
                continue;
            }
            const double inv = 1.0 / std::sqrt(var);
            double mean_gy = 0.0, mean_gyy = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                y[i] = (row[i] - mean) * inv;
                const double gy = grow[i] * (*gv)[i];
                mean_gy += gy;
                mean_gyy += gy * y[i];
            }
            mean_gy /= static_cast<double>(d);
            mean_gyy /= static_cast<double>(d);
            for (std::size_t i = 0; i < d; ++i) {
                const double gy = grow[i] * (*gv)[i];
                dx[v * d + i] = inv * (gy - mean_gy - y[i] * mean_gyy);
                dgamma[i] += grow[i] * y[i];
                dbeta[i] += grow[i];
            }
        }
        if (xi >= 0) tp.accumulate(xi, dx);
        if (gi >= 0) tp.accumulate(gi, dgamma);
        if (bi >= 0) tp.accumulate(bi, dbeta);
    });
}

Var reshape(const Var& a, std::vector<std::size_t> shape) {
    Tensor out = reshape(a.value(), std::move(shape));
    Tape* t = common_tape({&a});
    if (!t) return Var(std::move(out));
    const NodeId ai = a.id();
    auto orig_shape = a.value().shape();
    return t->record(std::move(out), [=](const Tensor& g, Tape& tp) {
        tp.accumulate(ai, reshape(g, orig_shape));
    });
}

Var sum(const Var& a) {
    Tensor out = Tensor::scalar(sum(a.value()));
    Tape* t = common_tape({&a});
    if (!t) return Var(std::move(out));
    const NodeId ai = a.id();
    auto shape = a.value().shape();
    return t->record(std::move(out), [=](const Tensor& g, Tape& tp) {
        tp.accumulate(ai, Tensor::full(shape, g[0]));
    });
}

Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw EmptyInputError("concat_rows: no parts");
    const std::size_t n = parts[0].value().cols();
    std::size_t mtotal = 0;
    std::vector<const Var*> ptrs;
    ptrs.reserve(parts.size());
    for (const Var& p : parts) {
        if (p.value().ndim() != 2 || p.value().cols() != n) {
            throw DimensionError("concat_rows parts must be 2-D with equal column counts");
        }
        mtotal += p.value().rows();
        ptrs.push_back(&p);
    }
    Tensor out({mtotal, n});
    std::size_t r = 0;
    for (const Var& p : parts) {
        std::copy(p.value().data(), p.value().data() + p.value().size(), out.data() + r * n);
        r += p.value().rows();
    }
    Tape* t = nullptr;
    for (const Var& p : parts) {
        if (p.tracked()) {
            if (t && p.tape() != t) throw ContractError("concat_rows mixes tapes");
            t = p.tape();
        }
    }
    if (!t) return Var(std::move(out));
    std::vector<std::pair<NodeId, std::size_t>> spans; // (node, rows), node -1 if constant
    for (const Var& p : parts) {
        spans.emplace_back(p.tracked() ? p.id() : -1, p.value().rows());
    }
    return t->record(std::move(out), [spans, n](const Tensor& g, Tape& tp) {
        std::size_t r = 0;
        for (const auto& [id, rows] : spans) {
            if (id >= 0) {
                Tensor part({rows, n});
                std::copy(g.data() + r * n, g.data() + (r + rows) * n, part.data());
                tp.accumulate(id, part);
            }
            r += rows;
        }
    });
}

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw EmptyInputError("concat_cols: no parts");
    const std::size_t m = parts[0].value().rows();
    std::size_t ntotal = 0;
    for (const Var& p : parts) {
        if (p.value().ndim() != 2 || p.value().rows() != m) {
            throw DimensionError("concat_cols parts must be 2-D with equal row counts");
        }
        ntotal += p.value().cols();
    }
    Tensor out({m, ntotal});
    std::size_t c = 0;
    for (const Var& p : parts) {
        const std::size_t pc = p.value().cols();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < pc; ++j) out.at(i, c + j) = p.value().at(i, j);
        c += pc;
    }
    Tape* t = nullptr;
    for (const Var& p : parts) {
        if (p.tracked()) {
            if (t && p.tape() != t) throw ContractError("concat_cols mixes tapes");
            t = p.tape();
        }
    }
    if (!t) return Var(std::move(out));
    std::vector<std::pair<NodeId, std::size_t>> spans;
    for (const Var& p : parts) spans.emplace_back(p.tracked() ? p.id() : -1, p.value().cols());
    return t->record(std::move(out), [spans, m](const Tensor& g, Tape& tp) {
        std::size_t c = 0;
        for (const auto& [id, cols] : spans) {
            if (id >= 0) {
                Tensor part({m, cols});
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < cols; ++j) part.at(i, j) = g.at(i, c + j);
                tp.accumulate(id, part);
            }
            c += cols;
        }
    });
}

Var slice_rows(const Var& a, std::size_t r0, std::size_t r1) {
    const Tensor& v = a.value();
    if (v.ndim() != 2 || r0 > r1 || r1 > v.rows()) {
        throw DimensionError("slice_rows [" + std::to_string(r0) + ", " + std::to_string(r1) +
                             ") invalid for shape " + shape_str(v.shape()));
    }
    const std::size_t n = v.cols();
    Tensor out({r1 - r0, n});
    std::copy(v.data() + r0 * n, v.data() + r1 * n, out.data());
    Tape* t = common_tape({&a});
    if (!t) return Var(std::move(out));
    const NodeId ai = a.id();
    const std::size_t m = v.rows();
    return t->record(std::move(out), [=](const Tensor& g, Tape& tp) {
        Tensor da({m, n});
        std::copy(g.data(), g.data() + g.size(), da.data() + r0 * n);
        tp.accumulate(ai, da);
    });
}

Var slice_cols(const Var& a, std::size_t c0, std::size_t c1) {
    const Tensor& v = a.value();
    if (v.ndim() != 2 || c0 > c1 || c1 > v.cols()) {
        throw DimensionError("slice_cols [" + std::to_string(c0) + ", " + std::to_string(c1) +
                             ") invalid for shape " + shape_str(v.shape()));
    }
    const std::size_t m = v.rows();
    Tensor out({m, c1 - c0});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = c0; j < c1; ++j) out.at(i, j - c0) = v.at(i, j);
    Tape* t = common_tape({&a});
    if (!t) return Var(std::move(out));
    const NodeId ai = a.id();
    const std::size_t n = v.cols();
    return t->record(std::move(out), [=](const Tensor& g, Tape& tp) {
        Tensor da({m, n});
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < g.cols(); ++j) da.at(i, c0 + j) = g.at(i, j);
        tp.accumulate(ai, da);
    });
}

namespace {

void require_rowvec(const Var& a, const Var& v, const char* op) {
    if (a.value().ndim() != 2 || v.value().ndim() != 2 || v.value().rows() != 1 ||
        v.value().cols() != a.value().cols()) {
        throw DimensionError(std::string(op) + ": expected m x n and 1 x n, got " +
                             shape_str(a.value().shape()) + " and " +
                             shape_str(v.value().shape()));
    }
}

} // namespace

Var add_rowvec(const Var& a, const Var& v) {
    require_rowvec(a, v, "add_rowvec");
    const std::size_t m = a.value().rows(), n = a.value().cols();
    Tensor out = a.value();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.at(i, j) += v.value()[j];
    Tape* t = common_tape({&a, &v});
    if (!t) return Var(std::move(out));
    const NodeId ai = a.tracked() ? a.id() : -1;
    const NodeId vi = v.tracked() ? v.id() : -1;
    return t->record(std::move(out), [=](const Tensor& g, Tape& tp) {
        if (ai >= 0) tp.accumulate(ai, g);
        if (vi >= 0) {
            Tensor dv({1, n});
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) dv[j] += g.at(i, j);
            tp.accumulate(vi, dv);
        }
    });
}

Var mul_rowvec(const Var& a, const Var& v) {
    require_rowvec(a, v, "mul_rowvec");
    const std::size_t m = a.value().rows(), n = a.value().cols();
    Tensor out = a.value();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.at(i, j) *= v.value()[j];
    Tape* t = common_tape({&a, &v});
    if (!t) return Var(std::move(out));
    auto av = a.ptr();
    auto vv = v.ptr();
    const NodeId ai = a.tracked() ? a.id() : -1;
    const NodeId vi = v.tracked() ? v.id() : -1;
    return t->record(std::move(out), [=](const Tensor& g, Tape& tp) {
        if (ai >= 0) {
            Tensor da = g;
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) da.at(i, j) *= (*vv)[j];
            tp.accumulate(ai, da);
        }
        if (vi >= 0) {
            Tensor dv({1, n});
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) dv[j] += g.at(i, j) * av->at(i, j);
            tp.accumulate(vi, dv);
        }
    });
}

Var mul_colvec(const Var& a, const Var& v) {
    if (a.value().ndim() != 2 || v.value().ndim() != 2 || v.value().cols() != 1 ||
        v.value().rows() != a.value().rows()) {
        throw DimensionError("mul_colvec: expected m x n and m x 1, got " +
                             shape_str(a.value().shape()) + " and " +
                             shape_str(v.value().shape()));
    }
    const std::size_t m = a.value().rows(), n = a.value().cols();
    Tensor out = a.value();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.at(i, j) *= v.value()[i];
    Tape* t = common_tape({&a, &v});
    if (!t) return Var(std::move(out));
    auto av = a.ptr();
    auto vv = v.ptr();
    const NodeId ai = a.tracked() ? a.id() : -1;
    const NodeId vi = v.tracked() ? v.id() : -1;
    return t->record(std::move(out), [=](const Tensor& g, Tape& tp) {
        if (ai >= 0) {
            Tensor da = g;
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) da.at(i, j) *= (*vv)[i];
            tp.accumulate(ai, da);
        }
        if (vi >= 0) {
            Tensor dv({m, 1});
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) dv[i] += g.at(i, j) * av->at(i, j);
            tp.accumulate(vi, dv);
        }
    });
}

Var row_sums(const Var& a) {
    Tensor out = row_sums(a.value());
    Tape* t = common_tape({&a});
    if (!t) return Var(std::move(out));
    const NodeId ai = a.id();
    const std::size_t m = a.value().rows(), n = a.value().cols();
    return t->record(std::move(out), [=](const Tensor& g, Tape& tp) {
        Tensor da({m, n});
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) da.at(i, j) = g[i];
        tp.accumulate(ai, da);
    });
}

Var mean_rows(const Var& a) {
    Tensor out = mean_rows(a.value());
    Tape* t = common_tape({&a});
    if (!t) return Var(std::move(out));
    const NodeId ai = a.id();
    const std::size_t m = a.value().rows(), n = a.value().cols();
    return t->record(std::move(out), [=](const Tensor& g, Tape& tp) {
        Tensor da({m, n});
        const double inv = 1.0 / static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) da.at(i, j) = g[j] * inv;
        tp.accumulate(ai, da);
    });
}

Var sqrt0(const Var& a) {
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? std::sqrt(out[i]) : 0.0;
    Tape* t = common_tape({&a});
    if (!t) return Var(std::move(out));
    const NodeId ai = a.id();
    auto outv = std::make_shared<const Tensor>(out);
    return t->record(std::move(out), [=](const Tensor& g, Tape& tp) {
        Tensor da = g;
        for (std::size_t i = 0; i < da.size(); ++i) {
            const double s = (*outv)[i];
            da[i] = s > 0.0 ? g[i] / (2.0 * s) : 0.0;
        }
        tp.accumulate(ai, da);
    });
}

Var recip(const Var& a) {
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / out[i];
    Tape* t = common_tape({&a});
    if (!t) return Var(std::move(out));
    const NodeId ai = a.id();
    auto outv = std::make_shared<const Tensor>(out);
    return t->record(std::move(out), [=](const Tensor& g, Tape& tp) {
        Tensor da = g;
        for (std::size_t i = 0; i < da.size(); ++i) {
            const double r = (*outv)[i];
            da[i] = -g[i] * r * r;
        }
        tp.accumulate(ai, da);
    });
}

Var sigmoid(const Var& a) {
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = out[i];
        if (v >= 0.0) {
            out[i] = 1.0 / (1.0 + std::exp(-v));
        } else {
            const double e = std::exp(v);
            out[i] = e / (1.0 + e);
        }
    }
    Tape* t = common_tape({&a});
    if (!t) return Var(std::move(out));
    const NodeId ai = a.id();
    auto outv = std::make_shared<const Tensor>(out);
    return t->record(std::move(out), [=](const Tensor& g, Tape& tp) {
        Tensor da = g;
        for (std::size_t i = 0; i < da.size(); ++i) {
            const double s = (*outv)[i];
            da[i] = g[i] * s * (1.0 - s);
        }
        tp.accumulate(ai, da);
    });
}

Var scale(const Var& s, const Var& x) {
    if (s.value().size() != 1) {
        throw DimensionError("scale expects a single-element scale factor, got " +
                             shape_str(s.value().shape()));
    }
    const double sv = s.value()[0];
    Tensor out = mul_scalar(x.value(), sv);
    Tape* t = common_tape({&s, &x});
    if (!t) return Var(std::move(out));
    auto xv = x.ptr();
    auto sshape = s.value().shape();
    const NodeId si = s.tracked() ? s.id() : -1;
    const NodeId xi = x.tracked() ? x.id() : -1;
    return t->record(std::move(out), [=](const Tensor& g, Tape& tp) {
        if (si >= 0) {
            double ds = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) ds += g[i] * (*xv)[i];
            tp.accumulate(si, Tensor(sshape, {ds}));
        }
        if (xi >= 0) tp.accumulate(xi, mul_scalar(g, sv));
    });
}

Var mask_mul(const Var& a, const Tensor& mask) {
    Tensor out = mul(a.value(), mask);
    Tape* t = common_tape({&a});
    if (!t) return Var(std::move(out));
    const NodeId ai = a.id();
    auto maskv = std::make_shared<const Tensor>(mask);
    return t->record(std::move(out), [=](const Tensor& g, Tape& tp) {
        tp.accumulate(ai, mul(g, *maskv));
    });
}

Var weighted_sqdist(const Var& r, const Var& w) {
    const Tensor& rv = r.value();
    const Tensor& wv = w.value();
    if (rv.ndim() != 2 || wv.ndim() != 2 || wv.rows() != 1 || wv.cols() != rv.cols()) {
        throw DimensionError("weighted_sqdist: expected M x D and 1 x D, got " +
                             shape_str(rv.shape()) + " and " + shape_str(wv.shape()));
    }
    const std::size_t m = rv.rows(), d = rv.cols();
    Tensor out({m, m});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                const double diff = rv.at(i, k) - rv.at(j, k);
                acc += wv[k] * diff * diff;
            }
            out.at(i, j) = acc;
        }
    }
    Tape* t = common_tape({&r, &w});
    if (!t) return Var(std::move(out));
    auto rp = r.ptr();
    auto wp = w.ptr();
    const NodeId ri = r.tracked() ? r.id() : -1;
    const NodeId wi = w.tracked() ? w.id() : -1;
    return t->record(std::move(out), [=](const Tensor& g, Tape& tp) {
        Tensor dr({m, d});
        Tensor dw({1, d});
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                const double gij = g.at(i, j);
                if (gij == 0.0) continue;
                for (std::size_t k = 0; k < d; ++k) {
                    const double diff = rp->at(i, k) - rp->at(j, k);
                    const double c = 2.0 * (*wp)[k] * diff * gij;
                    dr.at(i, k) += c;
                    dr.at(j, k) -= c;
                    dw[k] += gij * diff * diff;
                }
            }
        }
        if (ri >= 0) tp.accumulate(ri, dr);
        if (wi >= 0) tp.accumulate(wi, dw);
    });
}

Var cosine_matrix(const Var& r, double norm_eps) {
    const Tensor& rv = r.value();
    if (rv.ndim() != 2) {
        throw DimensionError("cosine_matrix expects a 2-D tensor, got " + shape_str(rv.shape()));
    }
    const std::size_t m = rv.rows(), d = rv.cols();
    std::vector<double> norms(m);
    for (std::size_t i = 0; i < m; ++i) {
        double q = 0.0;
        for (std::size_t k = 0; k < d; ++k) q += rv.at(i, k) * rv.at(i, k);
        norms[i] = std::sqrt(q);
    }
    Tensor out({m, m});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            if (norms[i] < norm_eps || norms[j] < norm_eps) continue;
            double dot = 0.0;
            for (std::size_t k = 0; k < d; ++k) dot += rv.at(i, k) * rv.at(j, k);
            out.at(i, j) = dot / (norms[i] * norms[j]);
        }
    }
    Tape* t = common_tape({&r});
    if (!t) return Var(std::move(out));
    const NodeId ri = r.id();
    auto rp = r.ptr();
    auto outv = std::make_shared<const Tensor>(out);
    return t->record(std::move(out), [=](const Tensor& g, Tape& tp) {
        Tensor dr({m, d});
        for (std::size_t i = 0; i < m; ++i) {
            if (norms[i] < norm_eps) continue;
            for (std::size_t j = 0; j < m; ++j) {
                if (norms[j] < norm_eps) continue;
                const double gij = g.at(i, j);
                if (gij == 0.0) continue;
                const double cij = outv->at(i, j);
                const double inv_ninj = 1.0 / (norms[i] * norms[j]);
                const double inv_ni2 = 1.0 / (norms[i] * norms[i]);
                const double inv_nj2 = 1.0 / (norms[j] * norms[j]);
                for (std::size_t k = 0; k < d; ++k) {
                    dr.at(i, k) += gij * (rp->at(j, k) * inv_ninj - cij * rp->at(i, k) * inv_ni2);
                    dr.at(j, k) += gij * (rp->at(i, k) * inv_ninj - cij * rp->at(j, k) * inv_nj2);
                }
            }
        }
        tp.accumulate(ri, dr);
    });
}

Var stack_cols3(const Var& a, const Var& b, const Var& c) {
    const Tensor& av = a.value();
    if (!av.same_shape(b.value()) || !av.same_shape(c.value())) {
        throw DimensionError("stack_cols3 expects three tensors of identical shape");
    }
    const std::size_t p = av.size();
    Tensor out({p, 3});
    for (std::size_t i = 0; i < p; ++i) {
        out.at(i, 0) = a.value()[i];
        out.at(i, 1) = b.value()[i];
        out.at(i, 2) = c.value()[i];
    }
    Tape* t = common_tape({&a, &b, &c});
    if (!t) return Var(std::move(out));
    const NodeId ids[3] = {a.tracked() ? a.id() : -1, b.tracked() ? b.id() : -1,
                           c.tracked() ? c.id() : -1};
    auto shape = av.shape();
    return t->record(std::move(out), [=](const Tensor& g, Tape& tp) {
        for (std::size_t col = 0; col < 3; ++col) {
            if (ids[col] < 0) continue;
            Tensor dpart(shape);
            for (std::size_t i = 0; i < p; ++i) dpart[i] = g.at(i, col);
            tp.accumulate(ids[col], dpart);
        }
    });
}

} // namespace glformer

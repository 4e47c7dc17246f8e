#include "reference.hpp"

#include <cmath>

namespace glformer::ref {

Tensor matmul(const Tensor& a, const Tensor& b) {
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t kk = 0; kk < k; ++kk) acc += a.at(i, kk) * b.at(kk, j);
            out.at(i, j) = acc;
        }
    }
    return out;
}

namespace {

// z_q^T U_t^T V_t x_k / sqrt(Dv), all by scalar loops.
double scaled_logit(const Tensor& u, const Tensor& v, const double* zq, const double* xk,
                    std::size_t d, std::size_t dv) {
    double acc = 0.0;
    for (std::size_t r = 0; r < dv; ++r) {
        double uq = 0.0, vk = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            uq += u.at(r, c) * zq[c];
            vk += v.at(r, c) * xk[c];
        }
        acc += uq * vk;
    }
    return acc / std::sqrt(static_cast<double>(dv));
}

} // namespace

Tensor spatial_mhsa(const Tensor& z, const AttentionParams& p) {
    return temporal_mhsa(z, {z}, p);
}

Tensor temporal_mhsa(const Tensor& queries, const std::vector<Tensor>& frames,
                     const AttentionParams& p) {
    const std::size_t m = queries.rows(), d = queries.cols();
    const std::size_t heads = p.heads();
    const std::size_t dv = d / heads;
    const std::size_t k_per = frames[0].rows();

    Tensor out({m, d});
    std::vector<double> weights(frames.size() * k_per);
    std::vector<double> pooled(dv);
    for (std::size_t t = 0; t < heads; ++t) {
        const Tensor& u = p.query_proj[t].value();
        const Tensor& v = p.key_proj[t].value();
        const Tensor& wv = p.value_proj[t].value();
        const Tensor& wo = p.out_proj[t].value();
        for (std::size_t q = 0; q < m; ++q) {
            const double* zq = queries.data() + q * d;
            // O_tnqk proportional to exp(logit), normalized over all (n, k).
            double denom = 0.0;
            for (std::size_t n = 0; n < frames.size(); ++n) {
                for (std::size_t k = 0; k < k_per; ++k) {
                    const double e =
                        std::exp(scaled_logit(u, v, zq, frames[n].data() + k * d, d, dv));
                    weights[n * k_per + k] = e;
                    denom += e;
                }
            }
            for (double& wgt : weights) wgt /= denom;

            // sum_n sum_k O_tnqk * (W'_t x_k^n), then W_t on the pooled vector.
            std::fill(pooled.begin(), pooled.end(), 0.0);
            for (std::size_t n = 0; n < frames.size(); ++n) {
                for (std::size_t k = 0; k < k_per; ++k) {
                    const double* xk = frames[n].data() + k * d;
                    const double o = weights[n * k_per + k];
                    for (std::size_t r = 0; r < dv; ++r) {
                        double val = 0.0;
                        for (std::size_t c = 0; c < d; ++c) val += wv.at(r, c) * xk[c];
                        pooled[r] += o * val;
                    }
                }
            }
            for (std::size_t r = 0; r < d; ++r) {
                double acc = 0.0;
                for (std::size_t c = 0; c < dv; ++c) acc += wo.at(r, c) * pooled[c];
                out.at(q, r) += acc;
            }
        }
    }
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    const std::size_t d = x.shape().back();
    const std::size_t nvec = x.size() / d;
    Tensor out = x;
    for (std::size_t v = 0; v < nvec; ++v) {
        double* row = out.data() + v * d;
        double mean = 0.0;
        for (std::size_t i = 0; i < d; ++i) mean += row[i];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t i = 0; i < d; ++i) var += (row[i] - mean) * (row[i] - mean);
        var /= static_cast<double>(d);
        for (std::size_t i = 0; i < d; ++i) {
            const double pre = var < eps ? 0.0 : (row[i] - mean) / std::sqrt(var);
            row[i] = pre * gamma[i] + beta[i];
        }
    }
    return out;
}

Tensor transformer_sublayer(const Tensor& x, const Tensor& sub_out, const FfnParams& f,
                            double ln_eps) {
    const std::size_t m = x.rows(), d = x.cols();
    Tensor y({m, d});
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + sub_out[i];
    y = ref::layer_norm(y, f.ln1_gamma.value(), f.ln1_beta.value(), ln_eps);

    const Tensor& w1 = f.w1.value();
    const Tensor& w2 = f.w2.value();
    const std::size_t dff = w1.rows();
    Tensor z({m, d});
    std::vector<double> hidden(dff);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t hcol = 0; hcol < dff; ++hcol) {
            double acc = f.b1.value()[hcol];
            for (std::size_t c = 0; c < d; ++c) acc += w1.at(hcol, c) * y.at(i, c);
            hidden[hcol] = acc > 0.0 ? acc : 0.0;
        }
        for (std::size_t r = 0; r < d; ++r) {
            double acc = f.b2.value()[r];
            for (std::size_t c = 0; c < dff; ++c) acc += w2.at(r, c) * hidden[c];
            z.at(i, r) = y.at(i, r) + acc;
        }
    }
    return ref::layer_norm(z, f.ln2_gamma.value(), f.ln2_beta.value(), ln_eps);
}

Tensor transformer_forward(const std::vector<Tensor>& tokens,
                           const std::vector<Tensor>& positions, const TransformerParams& p) {
    const std::size_t n = tokens.size();
    std::vector<Tensor> state(n);
    for (std::size_t f = 0; f < n; ++f) state[f] = add(tokens[f], positions[f]);

    for (const TransformerLayerParams& layer : p.layers) {
        std::vector<Tensor> inter(n);
        for (std::size_t f = 0; f < n; ++f) {
            inter[f] = transformer_sublayer(state[f], spatial_mhsa(state[f], layer.spatial.attn),
                                            layer.spatial.ffn, p.ln_eps);
        }
        for (std::size_t f = 0; f < n; ++f) {
            state[f] =
                transformer_sublayer(inter[f], temporal_mhsa(inter[f], inter, layer.temporal.attn),
                                     layer.temporal.ffn, p.ln_eps);
        }
    }

    const std::size_t m = state[0].rows(), d = state[0].cols();
    Tensor out({n * m, d});
    for (std::size_t f = 0; f < n; ++f) {
        std::copy(state[f].data(), state[f].data() + m * d, out.data() + f * m * d);
    }
    return out;
}

Tensor edge_scores(const Tensor& r, const EdgeMlpParams& mlp) {
    const std::size_t m = r.rows(), d = r.cols();

    std::vector<double> variance(d, 0.0);
    for (std::size_t c = 0; c < d; ++c) {
        double mean = 0.0;
        for (std::size_t i = 0; i < m; ++i) mean += r.at(i, c);
        mean /= static_cast<double>(m);
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) acc += (r.at(i, c) - mean) * (r.at(i, c) - mean);
        variance[c] = acc / static_cast<double>(m) + 1e-8;
    }
    std::vector<double> norm(m);
    for (std::size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < d; ++c) acc += r.at(i, c) * r.at(i, c);
        norm[i] = std::sqrt(acc);
    }

    const Tensor& w1 = mlp.w1.value();
    const Tensor& w2 = mlp.w2.value();
    const std::size_t hidden = w1.rows();
    Tensor out({m, m});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            double d2 = 0.0, dot = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                const double diff = r.at(i, c) - r.at(j, c);
                d2 += diff * diff / variance[c];
                dot += r.at(i, c) * r.at(j, c);
            }
            const double euc = std::sqrt(d2);
            const double cos =
                (norm[i] < 1e-12 || norm[j] < 1e-12) ? 0.0 : dot / (norm[i] * norm[j]);
            const double feats[3] = {euc, cos, dot};
            double score = mlp.b2.value()[0];
            for (std::size_t hcol = 0; hcol < hidden; ++hcol) {
                double acc = mlp.b1.value()[hcol];
                for (std::size_t c = 0; c < 3; ++c) acc += w1.at(hcol, c) * feats[c];
                score += w2.at(0, hcol) * (acc > 0.0 ? acc : 0.0);
            }
            out.at(i, j) = score;
        }
    }
    return out;
}

Tensor adjacency(const Tensor& e) {
    const std::size_t m = e.rows();
    Tensor out({m, m});
    for (std::size_t i = 0; i < m; ++i) {
        double denom = 0.0;
        for (std::size_t j = 0; j < m; ++j) denom += std::exp(e.at(i, j));
        for (std::size_t j = 0; j < m; ++j) out.at(i, j) = std::exp(e.at(i, j)) / denom;
    }
    return out;
}

Tensor adjacency_tensor(const Tensor& a, const PruneConfig& cfg) {
    const std::size_t m = a.rows();
    const std::size_t s_total = cfg.thresholds.size();
    Tensor packed({s_total, m, m});
    for (std::size_t i = 0; i < m; ++i) packed[i * m + i] = 1.0; // slice 1 = E
    for (std::size_t i = 0; i < m; ++i) {
        double degree = 1.0;
        for (std::size_t j = 0; j < m; ++j) degree += a.at(i, j);
        for (std::size_t j = 0; j < m; ++j) {
            if (i == j) continue;
            const double prob = cfg.lambda * a.at(i, j) / degree;
            for (std::size_t s = 2; s <= s_total; ++s) {
                if (prob >= cfg.thresholds[s - 2] && prob < cfg.thresholds[s - 1]) {
                    packed[((s - 1) * m + i) * m + j] = a.at(i, j);
                }
            }
        }
    }
    return packed;
}

std::pair<Tensor, Tensor> soft_select(const Tensor& packed, const PruneConfig& cfg) {
    const std::size_t s_total = packed.dim(0), m = packed.dim(1);
    auto combine = [&](const Tensor& phi) {
        std::vector<double> w(s_total);
        double denom = 0.0;
        for (std::size_t s = 0; s < s_total; ++s) {
            w[s] = std::exp(phi[s]);
            denom += w[s];
        }
        Tensor q({m, m});
        for (std::size_t s = 0; s < s_total; ++s) {
            const double ws = w[s] / denom;
            for (std::size_t i = 0; i < m * m; ++i) q[i] += ws * packed[s * m * m + i];
        }
        return q;
    };
    return {combine(cfg.phi1.value()), combine(cfg.phi2.value())};
}

Tensor laplacian_normalize(const Tensor& y) {
    const std::size_t m = y.rows();
    std::vector<double> inv_sqrt(m);
    for (std::size_t i = 0; i < m; ++i) {
        double deg = 0.0;
        for (std::size_t j = 0; j < m; ++j) deg += y.at(i, j);
        inv_sqrt[i] = 1.0 / std::sqrt(deg);
    }
    Tensor out({m, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) out.at(i, j) = inv_sqrt[i] * y.at(i, j) * inv_sqrt[j];
    return out;
}

Tensor pruned_adjacency(const Tensor& r, const EdgeMlpParams& mlp, const PruneConfig& cfg) {
    const Tensor a = adjacency(edge_scores(r, mlp));
    const auto [q1, q2] = ref::soft_select(ref::adjacency_tensor(a, cfg), cfg);
    Tensor y = ref::matmul(q1, q2);
    for (std::size_t i = 0; i < a.rows(); ++i) y.at(i, i) += 1.0;
    return laplacian_normalize(y);
}

Tensor graph_conv_layer(const Tensor& h, const Tensor& w, const EdgeMlpParams& mlp,
                        const PruneConfig& cfg) {
    const Tensor abar = pruned_adjacency(transpose(h), mlp, cfg);
    Tensor out = ref::matmul(ref::matmul(w, h), abar);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
    return out;
}

Tensor graph_conv_block(const Tensor& h, const GraphConvParams& p) {
    Tensor out({h.rows(), h.cols()});
    if (!p.weights.empty()) {
        Tensor conv = h;
        for (const Var& w : p.weights) conv = graph_conv_layer(conv, w.value(), p.mlp, p.prune);
        out = conv;
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += p.prune.rho * h[i];
    return out;
}

Tensor graphformer_forward(const std::vector<Tensor>& tokens,
                           const std::vector<Tensor>& positions, const GraphFormerParams& p) {
    const std::size_t n = tokens.size();
    const std::size_t m = tokens[0].rows(), d = tokens[0].cols();

    std::vector<Tensor> inter(n);
    for (std::size_t f = 0; f < n; ++f) {
        inter[f] = graph_conv_block(transpose(add(tokens[f], positions[f])), p.spatial);
    }

    Tensor out({n * m, d});
    if (p.mode == TemporalGraphMode::Full) {
        Tensor all({d, n * m});
        for (std::size_t f = 0; f < n; ++f)
            for (std::size_t r = 0; r < d; ++r)
                for (std::size_t c = 0; c < m; ++c) all.at(r, f * m + c) = inter[f].at(r, c);
        const Tensor j = graph_conv_block(all, p.temporal);
        for (std::size_t row = 0; row < n * m; ++row)
            for (std::size_t c = 0; c < d; ++c) out.at(row, c) = j.at(c, row);
        return out;
    }

    for (std::size_t loc = 0; loc < m; ++loc) {
        Tensor t({d, n});
        for (std::size_t f = 0; f < n; ++f)
            for (std::size_t r = 0; r < d; ++r) t.at(r, f) = inter[f].at(r, loc);
        const Tensor j = graph_conv_block(t, p.temporal);
        for (std::size_t f = 0; f < n; ++f)
            for (std::size_t r = 0; r < d; ++r) out.at(f * m + loc, r) = j.at(r, f);
    }
    return out;
}

std::pair<Tensor, Tensor> blend_weights(const Tensor& g, const Tensor& l,
                                        const Tensor& w_alpha) {
    const std::size_t d = g.rows(), cols = g.cols();
    Tensor agf({d, cols}), alf({d, cols});
    for (std::size_t col = 0; col < cols; ++col) {
        for (std::size_t r = 0; r < d; ++r) {
            double z1 = 0.0, z2 = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                z1 += w_alpha.at(r, k) * g.at(k, col) + w_alpha.at(r, d + k) * l.at(k, col);
                z2 += w_alpha.at(d + r, k) * g.at(k, col) + w_alpha.at(d + r, d + k) * l.at(k, col);
            }
            // Two-logit softmax per element.
            const double e1 = std::exp(z1), e2 = std::exp(z2);
            agf.at(r, col) = e1 / (e1 + e2);
            alf.at(r, col) = e2 / (e1 + e2);
        }
    }
    return {agf, alf};
}

Tensor blend(const Tensor& g, const Tensor& l, const Tensor& w_alpha) {
    const auto [agf, alf] = blend_weights(g, l, w_alpha);
    Tensor out({g.rows(), g.cols()});
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = agf[i] * g[i] + alf[i] * l[i];
    return out;
}

} // namespace glformer::ref

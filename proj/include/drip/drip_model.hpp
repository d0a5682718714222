#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "drip/domain_encoder.hpp"
#include "drip/errors.hpp"
#include "drip/matrix.hpp"
#include "drip/ops.hpp"
#include "drip/param_store.hpp"
#include "drip/rng.hpp"

namespace drip {

struct DripConfig {
    std::size_t num_domains = 0;   // K
    std::size_t embed_dim = 64;    // d, must match the domain encoders
    std::size_t width = 64;        // m
    std::size_t layers = 1;        // L
    std::size_t heads = 1;         // h, must divide width
    double dropout = 0.1;

    std::size_t seq_len() const { return num_domains + 1; }
    std::size_t head_dim() const { return width / heads; }
    std::size_t ffn_dim() const { return 4 * width; }

    void validate() const {
        if (num_domains == 0) throw ConfigError("num_domains must be positive");
        if (layers < 1) throw ConfigError("layers must be >= 1");
        if (heads == 0 || width % heads != 0)
            throw ConfigError("head count must divide width");
        if (!(dropout >= 0.0 && dropout < 1.0))
            throw ConfigError("dropout must be in [0,1)");
    }
};

// Per-layer forward activations kept for backprop.
struct LayerCache {
    Matrix input;                 // H^l            (T, m)
    Matrix q, k, v;               // projections    (T, m)
    std::vector<Matrix> attn;     // per head       (T, T) row-stochastic
    Matrix headcat;               // concat of A_i V_i (T, m)
    Matrix msa_drop;              // dropout multipliers (T, m)
    Matrix n1, n1_xhat;           // post-attention layer norm
    Vector n1_invstd;
    Matrix ffn_pre;               // (T, 4m) pre-activation
    Matrix ffn_act;               // gelu output
    Matrix ffn_drop;              // (T, m)
    Matrix out_xhat;              // final layer norm cache
    Vector out_invstd;
    Matrix output;                // H^{l+1}        (T, m)
};

struct EncoderCache {
    Matrix h0;
    std::vector<LayerCache> layers;
    const Matrix& final_output() const { return layers.back().output; }
};

// Which source fed each input row; needed to route input gradients to the
// mask token and the projector weights (frozen encoder rows get no gradient).
struct InputSources {
    // size K; nullptr means the mask token was used for that domain.
    std::vector<const double*> embeddings;
};

// The DRIP model: mask/summary tokens, per-domain input projectors, the
// transformer stack, per-domain output projectors and the domain-preference
// head. All parameters live in one store; the domain-encoder tables stay
// outside it and are never updated here.
class DripModel {
public:
    DripConfig cfg;
    ParamStore store;

    DripModel(const DripConfig& config, std::uint64_t init_seed) : cfg(config) {
        cfg.validate();
        register_params();
        init_params(init_seed);
    }

    explicit DripModel(const DripConfig& config) : cfg(config) {
        cfg.validate();
        register_params();
    }

    // ------------------------------------------------------------------
    // Input construction

    // Builds H^0 from per-domain sources: entry k null => phi_k(e_[M]).
    Matrix build_input(const InputSources& src) const {
        if (src.embeddings.size() != cfg.num_domains)
            throw DripError("build_input: wrong number of domains");
        Matrix h0(cfg.seq_len(), cfg.width);
        const Param& es = store.get("summary_token");
        std::copy(es.value.begin(), es.value.end(), h0.row(0));
        const Param& em = store.get("mask_token");
        for (std::size_t k = 0; k < cfg.num_domains; ++k) {
            const double* x = src.embeddings[k] ? src.embeddings[k] : em.value.data();
            const Param& W = store.get(phi_w(k));
            const Param& b = store.get(phi_b(k));
            affine_forward(x, cfg.embed_dim, W.value.data(), b.value.data(),
                           h0.row(k + 1), cfg.width);
        }
        return h0;
    }

    // Inference-style sources per the user's train-G row: unseen => mask token.
    // train_mask (optional, seen domains only) additionally masks seen domains.
    InputSources sources_for(const std::vector<std::uint8_t>& g_row,
                             const std::vector<const DomainEncoderParams*>& encoders,
                             std::uint32_t user,
                             const std::vector<std::uint8_t>* train_mask = nullptr) const {
        if (g_row.size() != cfg.num_domains || encoders.size() != cfg.num_domains)
            throw DripError("sources_for: dimension mismatch");
        InputSources src;
        src.embeddings.assign(cfg.num_domains, nullptr);
        for (std::size_t k = 0; k < cfg.num_domains; ++k) {
            const bool masked = train_mask && (*train_mask)[k];
            if (!g_row[k] || masked) continue;
            if (!encoders[k] || !encoders[k]->has_user(user))
                throw DataError("missing embedding for seen, unmasked domain " +
                                std::to_string(k));
            src.embeddings[k] = encoders[k]->user_embedding(user);
        }
        return src;
    }

    // Routes dH0 to the summary token, projectors, and (for masked rows) the
    // mask token. Frozen encoder rows absorb no gradient.
    void backward_input(const InputSources& src, const Matrix& dh0) {
        Param& es = store.get("summary_token");
        for (std::size_t j = 0; j < cfg.width; ++j) es.grad[j] += dh0(0, j);
        Param& em = store.get("mask_token");
        for (std::size_t k = 0; k < cfg.num_domains; ++k) {
            const bool from_mask = src.embeddings[k] == nullptr;
            const double* x = from_mask ? em.value.data() : src.embeddings[k];
            Param& W = store.get(phi_w(k));
            Param& b = store.get(phi_b(k));
            affine_backward(x, cfg.embed_dim, W.value.data(), dh0.row(k + 1), cfg.width,
                            W.grad.data(), b.grad.data(),
                            from_mask ? em.grad.data() : nullptr);
        }
    }

    // ------------------------------------------------------------------
    // Transformer stack (post-norm, no position embedding)

    EncoderCache forward(const Matrix& h0, bool train_mode = false,
                         Rng* rng = nullptr) const {
        if (h0.rows != cfg.seq_len() || h0.cols != cfg.width)
            throw DripError("forward: bad input shape");
        EncoderCache cache;
        cache.h0 = h0;
        cache.layers.resize(cfg.layers);
        const Matrix* cur = &cache.h0;
        const double rate = train_mode ? cfg.dropout : 0.0;
        for (std::size_t l = 0; l < cfg.layers; ++l) {
            layer_forward(l, *cur, cache.layers[l], rate, rng);
            cur = &cache.layers[l].output;
        }
        return cache;
    }

    // Accumulates parameter gradients; writes the gradient w.r.t. H^0.
    void backward(const EncoderCache& cache, const Matrix& dhL, Matrix& dh0) {
        Matrix grad = dhL;
        for (std::size_t l = cfg.layers; l-- > 0;) {
            Matrix next;
            layer_backward(l, cache.layers[l], grad, next);
            grad = std::move(next);
        }
        dh0 = std::move(grad);
    }

    // ------------------------------------------------------------------
    // Preference heads

    Vector domain_logits(const double* h_s) const {
        Vector z(cfg.num_domains);
        const Param& W = store.get("domain_head.w");
        const Param& b = store.get("domain_head.b");
        affine_forward(h_s, cfg.width, W.value.data(), b.value.data(), z.data(),
                       cfg.num_domains);
        return z;
    }

    // p(d_k | u): full softmax over all K domains.
    Vector domain_preference(const double* h_s) const {
        return softmax(domain_logits(h_s));
    }

    void domain_head_backward(const double* h_s, const Vector& dz, double* dh_s) {
        Param& W = store.get("domain_head.w");
        Param& b = store.get("domain_head.b");
        affine_backward(h_s, cfg.width, W.value.data(), dz.data(), cfg.num_domains,
                        W.grad.data(), b.grad.data(), dh_s);
    }

    // z_{u,k} = psi_k(h_k): projection back into the domain encoder space.
    Vector item_projection(std::size_t k, const double* h_k) const {
        Vector z(cfg.embed_dim);
        const Param& W = store.get(psi_w(k));
        const Param& b = store.get(psi_b(k));
        affine_forward(h_k, cfg.width, W.value.data(), b.value.data(), z.data(),
                       cfg.embed_dim);
        return z;
    }

    void item_projection_backward(std::size_t k, const double* h_k, const Vector& dz,
                                  double* dh_k) {
        Param& W = store.get(psi_w(k));
        Param& b = store.get(psi_b(k));
        affine_backward(h_k, cfg.width, W.value.data(), dz.data(), cfg.embed_dim,
                        W.grad.data(), b.grad.data(), dh_k);
    }

    // p(v | u, d_k): full softmax over the domain's item vocabulary.
    Vector item_preference(const Vector& z, const DomainEncoderParams& enc) const {
        const std::size_t n = enc.item_table().rows();
        if (n == 0) throw DataError("item_preference: empty vocabulary");
        Vector logits(n);
        for (std::size_t v = 0; v < n; ++v)
            logits[v] = dot(z.data(), enc.item_table().row(v), cfg.embed_dim);
        return softmax(logits);
    }

    static std::string phi_w(std::size_t k) { return "proj_in." + std::to_string(k) + ".w"; }
    static std::string phi_b(std::size_t k) { return "proj_in." + std::to_string(k) + ".b"; }
    static std::string psi_w(std::size_t k) { return "proj_out." + std::to_string(k) + ".w"; }
    static std::string psi_b(std::size_t k) { return "proj_out." + std::to_string(k) + ".b"; }

private:
    static std::string ln(std::size_t l, int which, const char* part) {
        return "enc.l" + std::to_string(l) + ".ln" + std::to_string(which) + "." + part;
    }
    static std::string lp(std::size_t l, const char* part) {
        return "enc.l" + std::to_string(l) + "." + part;
    }

    void register_params() {
        const std::size_t d = cfg.embed_dim, m = cfg.width, f = cfg.ffn_dim();
        store.add("mask_token", {d});
        store.add("summary_token", {m});
        for (std::size_t k = 0; k < cfg.num_domains; ++k) {
            store.add(phi_w(k), {d, m});
            store.add(phi_b(k), {m});
        }
        for (std::size_t l = 0; l < cfg.layers; ++l) {
            store.add(lp(l, "wq"), {m, m});
            store.add(lp(l, "wk"), {m, m});
            store.add(lp(l, "wv"), {m, m});
            store.add(lp(l, "wo"), {m, m});
            store.add(ln(l, 1, "gamma"), {m});
            store.add(ln(l, 1, "beta"), {m});
            store.add(lp(l, "ffn.w1"), {m, f});
            store.add(lp(l, "ffn.b1"), {f});
            store.add(lp(l, "ffn.w2"), {f, m});
            store.add(lp(l, "ffn.b2"), {m});
            store.add(ln(l, 2, "gamma"), {m});
            store.add(ln(l, 2, "beta"), {m});
        }
        for (std::size_t k = 0; k < cfg.num_domains; ++k) {
            store.add(psi_w(k), {m, d});
            store.add(psi_b(k), {d});
        }
        store.add("domain_head.w", {m, cfg.num_domains});
        store.add("domain_head.b", {cfg.num_domains});
    }

    void init_params(std::uint64_t seed) {
        Rng rng(seed);
        for (Param* p : store.params()) {
            if (p->name.find("gamma") != std::string::npos) {
                std::fill(p->value.begin(), p->value.end(), 1.0);
            } else if (p->name.find("beta") != std::string::npos ||
                       p->name.find(".b") == p->name.size() - 2 ||
                       p->name.ends_with(".b1") || p->name.ends_with(".b2")) {
                // biases start at zero
            } else if (p->name == "mask_token" || p->name == "summary_token") {
                for (auto& v : p->value) v = rng.normal(0.0, 0.01);
            } else {
                // Xavier-uniform for affine maps.
                const double fan_in = static_cast<double>(p->rows());
                const double fan_out = static_cast<double>(p->cols());
                const double limit = std::sqrt(6.0 / (fan_in + fan_out));
                for (auto& v : p->value) v = rng.uniform(-limit, limit);
            }
        }
    }

    void layer_forward(std::size_t l, const Matrix& input, LayerCache& c, double rate,
                       Rng* rng) const {
        const std::size_t T = cfg.seq_len(), m = cfg.width, h = cfg.heads,
                          dh = cfg.head_dim(), f = cfg.ffn_dim();
        const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
        c.input = input;
        matmul(input, false, as_matrix(store.get(lp(l, "wq")), m, m), false, c.q);
        matmul(input, false, as_matrix(store.get(lp(l, "wk")), m, m), false, c.k);
        matmul(input, false, as_matrix(store.get(lp(l, "wv")), m, m), false, c.v);
        c.attn.assign(h, Matrix(T, T));
        c.headcat = Matrix(T, m);
        Vector scores(T);
        for (std::size_t head = 0; head < h; ++head) {
            const std::size_t off = head * dh;
            Matrix& A = c.attn[head];
            for (std::size_t i = 0; i < T; ++i) {
                for (std::size_t j = 0; j < T; ++j)
                    scores[j] = scale * dot(c.q.row(i) + off, c.k.row(j) + off, dh);
                softmax(scores.data(), T, A.row(i));
            }
            for (std::size_t i = 0; i < T; ++i) {
                double* out = c.headcat.row(i) + off;
                for (std::size_t j = 0; j < T; ++j) {
                    const double a = A(i, j);
                    const double* vrow = c.v.row(j) + off;
                    for (std::size_t t = 0; t < dh; ++t) out[t] += a * vrow[t];
                }
            }
        }
        Matrix msa;
        matmul(c.headcat, false, as_matrix(store.get(lp(l, "wo")), m, m), false, msa);

        c.msa_drop = Matrix(T, m);
        if (rate > 0.0 && rng)
            dropout_mask(rate, c.msa_drop.size(), *rng, c.msa_drop.data.data());
        else
            c.msa_drop.fill(1.0);

        Matrix res1(T, m);
        for (std::size_t i = 0; i < T * m; ++i)
            res1.data[i] = input.data[i] + msa.data[i] * c.msa_drop.data[i];

        c.n1 = Matrix(T, m);
        c.n1_xhat = Matrix(T, m);
        c.n1_invstd.assign(T, 0.0);
        const Param& g1 = store.get(ln(l, 1, "gamma"));
        const Param& b1 = store.get(ln(l, 1, "beta"));
        for (std::size_t i = 0; i < T; ++i)
            layer_norm(res1.row(i), m, g1.value.data(), b1.value.data(), c.n1.row(i),
                       c.n1_xhat.row(i), &c.n1_invstd[i]);

        c.ffn_pre = Matrix(T, f);
        matmul(c.n1, false, as_matrix(store.get(lp(l, "ffn.w1")), m, f), false, c.ffn_pre);
        const Param& fb1 = store.get(lp(l, "ffn.b1"));
        for (std::size_t i = 0; i < T; ++i) {
            double* row = c.ffn_pre.row(i);
            for (std::size_t j = 0; j < f; ++j) row[j] += fb1.value[j];
        }
        c.ffn_act = Matrix(T, f);
        for (std::size_t i = 0; i < T * f; ++i)
            c.ffn_act.data[i] = gelu(c.ffn_pre.data[i]);
        Matrix ffn_out;
        matmul(c.ffn_act, false, as_matrix(store.get(lp(l, "ffn.w2")), f, m), false,
               ffn_out);
        const Param& fb2 = store.get(lp(l, "ffn.b2"));
        for (std::size_t i = 0; i < T; ++i) {
            double* row = ffn_out.row(i);
            for (std::size_t j = 0; j < m; ++j) row[j] += fb2.value[j];
        }

        c.ffn_drop = Matrix(T, m);
        if (rate > 0.0 && rng)
            dropout_mask(rate, c.ffn_drop.size(), *rng, c.ffn_drop.data.data());
        else
            c.ffn_drop.fill(1.0);

        Matrix res2(T, m);
        for (std::size_t i = 0; i < T * m; ++i)
            res2.data[i] = c.n1.data[i] + ffn_out.data[i] * c.ffn_drop.data[i];

        c.output = Matrix(T, m);
        c.out_xhat = Matrix(T, m);
        c.out_invstd.assign(T, 0.0);
        const Param& g2 = store.get(ln(l, 2, "gamma"));
        const Param& b2 = store.get(ln(l, 2, "beta"));
        for (std::size_t i = 0; i < T; ++i)
            layer_norm(res2.row(i), m, g2.value.data(), b2.value.data(), c.output.row(i),
                       c.out_xhat.row(i), &c.out_invstd[i]);

        for (double v : c.output.data)
            if (!std::isfinite(v))
                throw NumericalFault("non-finite activation in encoder layer " +
                                     std::to_string(l));
    }

    void layer_backward(std::size_t l, const LayerCache& c, const Matrix& dout,
                        Matrix& dinput) {
        const std::size_t T = cfg.seq_len(), m = cfg.width, h = cfg.heads,
                          dh = cfg.head_dim(), f = cfg.ffn_dim();
        const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

        // Final layer norm.
        Param& g2 = store.get(ln(l, 2, "gamma"));
        Param& b2 = store.get(ln(l, 2, "beta"));
        Matrix dres2(T, m);
        for (std::size_t i = 0; i < T; ++i)
            layer_norm_backward(c.out_xhat.row(i), c.out_invstd[i], m, g2.value.data(),
                                dout.row(i), dres2.row(i), g2.grad.data(),
                                b2.grad.data());

        // res2 = n1 + ffn_out * drop
        Matrix dffn_out(T, m);
        for (std::size_t i = 0; i < T * m; ++i)
            dffn_out.data[i] = dres2.data[i] * c.ffn_drop.data[i];
        Matrix dn1 = dres2;  // residual branch

        // FFN backward.
        Param& fw2 = store.get(lp(l, "ffn.w2"));
        Param& fb2 = store.get(lp(l, "ffn.b2"));
        for (std::size_t i = 0; i < T; ++i)
            for (std::size_t j = 0; j < m; ++j) fb2.grad[j] += dffn_out(i, j);
        {
            Matrix dW2;
            matmul(c.ffn_act, true, dffn_out, false, dW2);
            for (std::size_t i = 0; i < f * m; ++i) fw2.grad[i] += dW2.data[i];
        }
        Matrix dact;
        matmul(dffn_out, false, as_matrix(fw2, f, m), true, dact);
        Matrix dpre(T, f);
        for (std::size_t i = 0; i < T * f; ++i)
            dpre.data[i] = dact.data[i] * gelu_grad(c.ffn_pre.data[i]);
        Param& fw1 = store.get(lp(l, "ffn.w1"));
        Param& fb1 = store.get(lp(l, "ffn.b1"));
        for (std::size_t i = 0; i < T; ++i)
            for (std::size_t j = 0; j < f; ++j) fb1.grad[j] += dpre(i, j);
        {
            Matrix dW1;
            matmul(c.n1, true, dpre, false, dW1);
            for (std::size_t i = 0; i < m * f; ++i) fw1.grad[i] += dW1.data[i];
        }
        matmul(dpre, false, as_matrix(fw1, m, f), true, dn1, /*accumulate=*/true);

        // Post-attention layer norm. Recompute res1 from the caches.
        Param& g1 = store.get(ln(l, 1, "gamma"));
        Param& b1 = store.get(ln(l, 1, "beta"));
        Matrix dres1(T, m);
        for (std::size_t i = 0; i < T; ++i)
            layer_norm_backward(c.n1_xhat.row(i), c.n1_invstd[i], m, g1.value.data(),
                                dn1.row(i), dres1.row(i), g1.grad.data(),
                                b1.grad.data());

        // res1 = input + msa * drop
        Matrix dmsa(T, m);
        for (std::size_t i = 0; i < T * m; ++i)
            dmsa.data[i] = dres1.data[i] * c.msa_drop.data[i];
        dinput = dres1;  // residual branch

        Param& wo = store.get(lp(l, "wo"));
        {
            Matrix dWo;
            matmul(c.headcat, true, dmsa, false, dWo);
            for (std::size_t i = 0; i < m * m; ++i) wo.grad[i] += dWo.data[i];
        }
        Matrix dheadcat;
        matmul(dmsa, false, as_matrix(wo, m, m), true, dheadcat);

        Matrix dq(T, m), dk(T, m), dv(T, m);
        Vector da(T), ds(T);
        for (std::size_t head = 0; head < h; ++head) {
            const std::size_t off = head * dh;
            const Matrix& A = c.attn[head];
            for (std::size_t i = 0; i < T; ++i) {
                const double* dci = dheadcat.row(i) + off;
                // dA_i row, dV accumulation.
                for (std::size_t j = 0; j < T; ++j) {
                    da[j] = dot(dci, c.v.row(j) + off, dh);
                    double* dvj = dv.row(j) + off;
                    const double a = A(i, j);
                    for (std::size_t t = 0; t < dh; ++t) dvj[t] += a * dci[t];
                }
                softmax_backward(A.row(i), da.data(), T, ds.data());
                double* dqi = dq.row(i) + off;
                for (std::size_t j = 0; j < T; ++j) {
                    const double sij = ds[j] * scale;
                    const double* kj = c.k.row(j) + off;
                    double* dkj = dk.row(j) + off;
                    const double* qi = c.q.row(i) + off;
                    for (std::size_t t = 0; t < dh; ++t) {
                        dqi[t] += sij * kj[t];
                        dkj[t] += sij * qi[t];
                    }
                }
            }
        }

        Param& wq = store.get(lp(l, "wq"));
        Param& wk = store.get(lp(l, "wk"));
        Param& wv = store.get(lp(l, "wv"));
        Matrix tmp;
        matmul(c.input, true, dq, false, tmp);
        for (std::size_t i = 0; i < m * m; ++i) wq.grad[i] += tmp.data[i];
        matmul(c.input, true, dk, false, tmp);
        for (std::size_t i = 0; i < m * m; ++i) wk.grad[i] += tmp.data[i];
        matmul(c.input, true, dv, false, tmp);
        for (std::size_t i = 0; i < m * m; ++i) wv.grad[i] += tmp.data[i];
        matmul(dq, false, as_matrix(wq, m, m), true, dinput, /*accumulate=*/true);
        matmul(dk, false, as_matrix(wk, m, m), true, dinput, /*accumulate=*/true);
        matmul(dv, false, as_matrix(wv, m, m), true, dinput, /*accumulate=*/true);
    }

    // Borrow a Param's value buffer as a Matrix for matmul.
    static Matrix as_matrix(const Param& p, std::size_t r, std::size_t c) {
        Matrix m(r, c);
        m.data = p.value;
        return m;
    }
};

}  // namespace drip

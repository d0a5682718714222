#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "drip/errors.hpp"
#include "drip/matrix.hpp"
#include "drip/rng.hpp"

namespace drip {

constexpr double kLayerNormEps = 1e-5;

// Exp-normalize with max subtraction; writes probabilities into out.
inline void softmax(const double* logits, std::size_t n, double* out) {
    if (n == 0) throw DripError("softmax: empty input");
    double mx = logits[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, logits[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::exp(logits[i] - mx);
        sum += out[i];
    }
    for (std::size_t i = 0; i < n; ++i) out[i] /= sum;
}

inline Vector softmax(const Vector& logits) {
    Vector out(logits.size());
    softmax(logits.data(), logits.size(), out.data());
    return out;
}

inline double log_sum_exp(const double* logits, std::size_t n) {
    if (n == 0) throw DripError("log_sum_exp: empty input");
    double mx = logits[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, logits[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += std::exp(logits[i] - mx);
    return mx + std::log(sum);
}

// Backward of softmax per row: ds = p ⊙ (dp − <dp, p>).
inline void softmax_backward(const double* p, const double* dp, std::size_t n, double* ds) {
    double inner = 0.0;
    for (std::size_t i = 0; i < n; ++i) inner += dp[i] * p[i];
    for (std::size_t i = 0; i < n; ++i) ds[i] = p[i] * (dp[i] - inner);
}

// y = gamma ⊙ (x − mean)/sqrt(var + eps) + beta.
// Caches xhat and invstd for the backward pass when requested.
inline void layer_norm(const double* x, std::size_t n,
                       const double* gamma, const double* beta,
                       double* y, double* xhat_out = nullptr, double* invstd_out = nullptr) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x[i];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double c = x[i] - mean;
        var += c * c;
    }
    var /= static_cast<double>(n);
    const double invstd = 1.0 / std::sqrt(var + kLayerNormEps);
    for (std::size_t i = 0; i < n; ++i) {
        const double xh = (x[i] - mean) * invstd;
        if (xhat_out) xhat_out[i] = xh;
        y[i] = gamma[i] * xh + beta[i];
    }
    if (invstd_out) *invstd_out = invstd;
}

inline Vector layer_norm(const Vector& x, const Vector& gamma, const Vector& beta) {
    Vector y(x.size());
    layer_norm(x.data(), x.size(), gamma.data(), beta.data(), y.data());
    return y;
}

// Accumulates dgamma/dbeta, writes dx.
inline void layer_norm_backward(const double* xhat, double invstd, std::size_t n,
                                const double* gamma, const double* dy,
                                double* dx, double* dgamma, double* dbeta) {
    double sum_dxhat = 0.0;
    double sum_dxhat_xhat = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dxh = dy[i] * gamma[i];
        sum_dxhat += dxh;
        sum_dxhat_xhat += dxh * xhat[i];
        if (dgamma) dgamma[i] += dy[i] * xhat[i];
        if (dbeta) dbeta[i] += dy[i];
    }
    const double nn = static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double dxh = dy[i] * gamma[i];
        dx[i] = invstd / nn * (nn * dxh - sum_dxhat - xhat[i] * sum_dxhat_xhat);
    }
}

inline double gelu(double x) {
    return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2));
}

inline double gelu_grad(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    return cdf + x * pdf;
}

// Inverted dropout: mask entries are 0 or 1/(1−p); multiply elementwise in
// both directions. rate = 0 produces the identity mask.
inline void dropout_mask(double rate, std::size_t n, Rng& rng, double* mask) {
    if (rate <= 0.0) {
        std::fill(mask, mask + n, 1.0);
        return;
    }
    const double keep = 1.0 / (1.0 - rate);
    for (std::size_t i = 0; i < n; ++i) mask[i] = rng.uniform() < rate ? 0.0 : keep;
}

}  // namespace drip

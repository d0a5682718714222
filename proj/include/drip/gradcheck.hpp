#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "drip/param_store.hpp"
#include "drip/rng.hpp"

namespace drip {

struct GradCheckFailure {
    std::string param;
    std::size_t index;
    double analytic;
    double numeric;
    double rel_error;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::vector<GradCheckFailure> failures;
    bool ok(double tolerance) const { return max_rel_error <= tolerance; }
};

// Central finite differences against analytic gradients on a random coordinate
// subsample. loss_fn must be deterministic (dropout off, masks frozen) and must
// populate store gradients on every call.
inline GradCheckReport check_gradients(const std::function<double()>& loss_fn,
                                       ParamStore& store, double tolerance,
                                       std::size_t samples_per_param = 16,
                                       std::uint64_t seed = 7,
                                       double step = 1e-4) {
    Rng rng(seed);
    store.zero_grads();
    loss_fn();
    std::vector<std::vector<double>> analytic;
    for (Param* p : store.params()) analytic.push_back(p->grad);

    GradCheckReport report;
    auto params = store.params();
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Param* p = params[pi];
        const std::size_t n = p->size();
        const std::size_t samples = std::min(samples_per_param, n);
        for (std::size_t s = 0; s < samples; ++s) {
            const std::size_t j = n <= samples_per_param ? s : rng.index(n);
            const double orig = p->value[j];
            p->value[j] = orig + step;
            store.zero_grads();
            const double lp = loss_fn();
            p->value[j] = orig - step;
            store.zero_grads();
            const double lm = loss_fn();
            p->value[j] = orig;
            const double numeric = (lp - lm) / (2.0 * step);
            const double an = analytic[pi][j];
            const double denom = std::max({1.0, std::abs(an), std::abs(numeric)});
            const double rel = std::abs(an - numeric) / denom;
            ++report.checked;
            if (rel > report.max_rel_error) report.max_rel_error = rel;
            if (rel > tolerance)
                report.failures.push_back({p->name, j, an, numeric, rel});
        }
    }
    // Leave the store's gradients consistent with its (restored) values.
    store.zero_grads();
    loss_fn();
    return report;
}

}  // namespace drip

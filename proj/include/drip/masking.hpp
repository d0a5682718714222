#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <vector>

#include "drip/errors.hpp"
#include "drip/rng.hpp"

namespace drip {

// Random -> adaptive masking mixture: eps_i = max(floor, 1 - slope * i).
struct MaskSchedule {
    double floor = 0.5;
    double slope = 0.002;
    bool adaptive = true;  // when false the schedule is pinned at 1 (random only)

    double epsilon(std::size_t epoch) const {
        if (!adaptive) return 1.0;
        return std::max(floor, 1.0 - slope * static_cast<double>(epoch));
    }
};

enum class MaskMode { Random, Adaptive };

// Training-time mask over a user's seen domains. Unseen domains are handled
// by the input construction, not here.
struct MaskPlan {
    std::vector<std::uint8_t> masked;  // size K; only seen entries may be 1
    MaskMode mode = MaskMode::Random;
};

// Per-domain adaptive probabilities: proportional to the model's current
// domain preference over the seen set while preserving the expected mask
// count rho * |S_u|, clamped at 0.95 so the redraw loop terminates quickly.
inline std::vector<double> adaptive_mask_probs(const std::vector<std::uint8_t>& g_row,
                                               const std::vector<double>& domain_prefs,
                                               double rho, double clamp = 0.95) {
    const std::size_t K = g_row.size();
    std::vector<double> probs(K, 0.0);
    double seen_pref = 0.0;
    std::size_t n_seen = 0;
    for (std::size_t k = 0; k < K; ++k) {
        if (!g_row[k]) continue;
        seen_pref += domain_prefs[k];
        ++n_seen;
    }
    if (seen_pref <= 0.0) {
        for (std::size_t k = 0; k < K; ++k)
            if (g_row[k]) probs[k] = std::min(clamp, rho);
        return probs;
    }
    for (std::size_t k = 0; k < K; ++k) {
        if (!g_row[k]) continue;
        const double p =
            rho * static_cast<double>(n_seen) * domain_prefs[k] / seen_pref;
        probs[k] = std::min(clamp, p);
    }
    return probs;
}

// Draws one mask plan. Redraws until at least one seen domain is masked and at
// least one stays unmasked. Users with fewer than two seen domains cannot
// satisfy both constraints and return nullopt (skipped by the trainer).
inline std::optional<MaskPlan> sample_mask(const std::vector<std::uint8_t>& g_row,
                                           const std::vector<double>& domain_prefs,
                                           double rho, double epsilon, Rng& rng) {
    const std::size_t K = g_row.size();
    std::size_t n_seen = 0;
    for (auto g : g_row) n_seen += g;
    if (n_seen < 2) return std::nullopt;

    MaskPlan plan;
    plan.mode = rng.bernoulli(epsilon) ? MaskMode::Random : MaskMode::Adaptive;
    std::vector<double> probs;
    if (plan.mode == MaskMode::Adaptive)
        probs = adaptive_mask_probs(g_row, domain_prefs, rho);

    plan.masked.assign(K, 0);
    while (true) {
        std::size_t n_masked = 0;
        for (std::size_t k = 0; k < K; ++k) {
            if (!g_row[k]) {
                plan.masked[k] = 0;
                continue;
            }
            const double p = plan.mode == MaskMode::Random ? rho : probs[k];
            plan.masked[k] = rng.bernoulli(p) ? 1 : 0;
            n_masked += plan.masked[k];
        }
        if (n_masked >= 1 && n_masked < n_seen) break;
    }
    return plan;
}

}  // namespace drip

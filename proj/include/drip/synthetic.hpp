#pragma once

#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "drip/dataset.hpp"
#include "drip/errors.hpp"
#include "drip/rng.hpp"

namespace drip {

// Synthetic multi-domain interaction generator with planted per-archetype
// domain preferences and cross-domain-correlated item clusters, so that a
// user's seen-domain history is informative about unseen-domain items.
struct SyntheticConfig {
    std::size_t num_domains = 4;
    std::size_t num_archetypes = 4;
    std::size_t users_per_archetype = 500;
    std::vector<std::vector<double>> archetype_prefs;  // simplex over domains
    std::size_t items_per_domain = 400;
    std::size_t clusters_per_domain = 4;
    double cluster_correlation = 0.8;  // in [0,1]
    std::size_t interactions_per_user = 30;
    std::uint64_t seed = 1;

    void validate() const {
        if (num_domains == 0 || num_archetypes == 0 || users_per_archetype == 0 ||
            items_per_domain == 0 || clusters_per_domain == 0 ||
            interactions_per_user == 0)
            throw ConfigError("synthetic config: counts must be positive");
        if (clusters_per_domain > items_per_domain)
            throw ConfigError("synthetic config: more clusters than items");
        if (!(cluster_correlation >= 0.0 && cluster_correlation <= 1.0))
            throw ConfigError("synthetic config: correlation must be in [0,1]");
        if (archetype_prefs.size() != num_archetypes)
            throw ConfigError("synthetic config: archetype_prefs count mismatch");
        for (const auto& p : archetype_prefs) {
            if (p.size() != num_domains)
                throw ConfigError("synthetic config: preference vector dimension mismatch");
            double sum = 0.0;
            for (double x : p) {
                if (x < 0.0) throw ConfigError("synthetic config: negative probability");
                sum += x;
            }
            if (std::abs(sum - 1.0) > 1e-9)
                throw ConfigError("synthetic config: preferences must sum to 1");
        }
    }

    // Skewed default preferences: archetype a peaks on domain a mod K.
    static std::vector<std::vector<double>> default_prefs(std::size_t archetypes,
                                                          std::size_t domains,
                                                          double peak = 0.55) {
        std::vector<std::vector<double>> prefs(archetypes,
                                               std::vector<double>(domains, 0.0));
        const double rest = (1.0 - peak) / static_cast<double>(domains - 1);
        for (std::size_t a = 0; a < archetypes; ++a)
            for (std::size_t k = 0; k < domains; ++k)
                prefs[a][k] = (k == a % domains) ? peak : rest;
        return prefs;
    }
};

struct SyntheticOutput {
    InteractionDataset dataset;
    std::vector<std::vector<double>> user_domain_prefs;  // planted, per user
    std::vector<std::size_t> user_archetype;
};

inline std::size_t synthetic_item_cluster(const SyntheticConfig& cfg, std::size_t item) {
    const std::size_t per_cluster =
        (cfg.items_per_domain + cfg.clusters_per_domain - 1) / cfg.clusters_per_domain;
    return item / per_cluster;
}

inline SyntheticOutput generate_synthetic(const SyntheticConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    SyntheticOutput out;
    InteractionDataset& ds = out.dataset;

    for (std::size_t k = 0; k < cfg.num_domains; ++k) {
        const std::uint32_t dk = ds.intern_domain("d" + std::to_string(k));
        for (std::size_t i = 0; i < cfg.items_per_domain; ++i)
            ds.intern_item(dk, "d" + std::to_string(k) + "_i" + std::to_string(i));
    }

    const std::size_t per_cluster =
        (cfg.items_per_domain + cfg.clusters_per_domain - 1) / cfg.clusters_per_domain;
    const std::size_t n_users = cfg.num_archetypes * cfg.users_per_archetype;
    for (std::size_t uidx = 0; uidx < n_users; ++uidx) {
        const std::size_t a = uidx / cfg.users_per_archetype;
        const std::uint32_t u = ds.intern_user("u" + std::to_string(uidx));
        out.user_archetype.push_back(a);
        out.user_domain_prefs.push_back(cfg.archetype_prefs[a]);
        const std::vector<double>& prefs = cfg.archetype_prefs[a];
        std::set<std::pair<std::uint32_t, std::uint32_t>> taken;
        std::size_t produced = 0;
        std::size_t attempts = 0;
        const std::size_t max_attempts = cfg.interactions_per_user * 50;
        while (produced < cfg.interactions_per_user && attempts < max_attempts) {
            ++attempts;
            // Domain from the archetype preference vector.
            double r = rng.uniform();
            std::uint32_t k = 0;
            for (; k + 1 < cfg.num_domains; ++k) {
                if (r < prefs[k]) break;
                r -= prefs[k];
            }
            // Cluster: with probability `correlation` the archetype's cluster,
            // shared across domains; otherwise uniform.
            std::size_t cluster;
            if (rng.bernoulli(cfg.cluster_correlation))
                cluster = a % cfg.clusters_per_domain;
            else
                cluster = rng.index(cfg.clusters_per_domain);
            const std::size_t lo = cluster * per_cluster;
            const std::size_t hi = std::min(lo + per_cluster, cfg.items_per_domain);
            if (lo >= hi) continue;
            const auto v = static_cast<std::uint32_t>(lo + rng.index(hi - lo));
            if (!taken.emplace(k, v).second) continue;
            ds.interactions.push_back({u, k, v});
            ++produced;
        }
    }
    ds.finalize();
    return out;
}

inline void save_domain_prefs(const std::string& path, const SyntheticOutput& out) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for write: " + path);
    const auto& ds = out.dataset;
    for (std::uint32_t u = 0; u < ds.num_users(); ++u) {
        os << ds.user_ids[u];
        for (double p : out.user_domain_prefs[u]) os << '\t' << p;
        os << '\n';
    }
    if (!os) throw IoError("write failed: " + path);
}

}  // namespace drip

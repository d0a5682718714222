#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "drip/errors.hpp"
#include "drip/inference.hpp"
#include "drip/split.hpp"

namespace drip {

constexpr double kKldSmoothing = 1e-6;

// |top-K ∩ truth| / |truth| with binary relevance.
inline double recall_at_k(const RankedList& ranked,
                          const std::set<std::pair<std::uint32_t, std::uint32_t>>& truth,
                          std::size_t k) {
    if (truth.empty()) throw DataError("recall_at_k: empty ground truth");
    std::size_t hits = 0;
    const std::size_t n = std::min(k, ranked.size());
    for (std::size_t i = 0; i < n; ++i)
        if (truth.count({ranked[i].domain, ranked[i].item})) ++hits;
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

// Binary-gain NDCG: gain 1/log2(rank+1), rank starting at 1; ideal DCG over
// min(K, |truth|) placements.
inline double ndcg_at_k(const RankedList& ranked,
                        const std::set<std::pair<std::uint32_t, std::uint32_t>>& truth,
                        std::size_t k) {
    if (truth.empty()) throw DataError("ndcg_at_k: empty ground truth");
    double dcg = 0.0;
    const std::size_t n = std::min(k, ranked.size());
    for (std::size_t i = 0; i < n; ++i)
        if (truth.count({ranked[i].domain, ranked[i].item}))
            dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    double idcg = 0.0;
    const std::size_t ideal = std::min(k, truth.size());
    for (std::size_t i = 0; i < ideal; ++i)
        idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    return dcg / idcg;
}

// D_KL(P || Q) in nats; Q is the domain frequency of the top-K list smoothed
// by kKldSmoothing on every support component and renormalized. Terms with
// P_i = 0 contribute nothing.
inline double kld_at_k(const RankedList& ranked, const std::vector<double>& p_truth,
                       const std::vector<std::uint32_t>& support_domains,
                       std::size_t k) {
    const std::size_t n = std::min(k, ranked.size());
    if (n == 0) throw DataError("kld_at_k: empty top-K list");
    std::map<std::uint32_t, double> counts;
    for (auto d : support_domains) counts[d] = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        auto it = counts.find(ranked[i].domain);
        if (it != counts.end()) it->second += 1.0;
    }
    double qsum = 0.0;
    for (auto& [d, c] : counts) {
        c += kKldSmoothing;
        qsum += c;
    }
    double kld = 0.0;
    for (std::size_t i = 0; i < support_domains.size(); ++i) {
        const double p = p_truth[i];
        if (p <= 0.0) continue;
        const double q = counts[support_domains[i]] / qsum;
        kld += p * std::log(p / q);
    }
    return kld;
}

struct MetricsReport {
    std::vector<std::size_t> cutoffs;
    std::map<std::size_t, double> recall;  // mean over qualifying users
    std::map<std::size_t, double> ndcg;
    std::map<std::size_t, double> kld;     // MT only
    std::size_t user_count = 0;
    std::int64_t target_domain = -1;       // >= 0 for ST reports
};

struct EvalOptions {
    std::vector<std::size_t> cutoffs = {20, 50};
    // When set, the KLD ground truth P spans all K domains (built from the
    // user's full interaction history) instead of the unseen-domain support.
    bool kld_over_all_domains = false;
};

// Full-ranking MT evaluation over the given users (defaults to test users).
inline MetricsReport evaluate_mt(const Recommender& rec, const EvaluationSplit& split,
                                 const std::vector<std::uint32_t>& users,
                                 const EvalOptions& opt = {}) {
    const std::size_t K = split.train.num_domains();
    std::size_t max_cut = 0;
    for (auto c : opt.cutoffs) max_cut = std::max(max_cut, c);

    MetricsReport report;
    report.cutoffs = opt.cutoffs;
    std::map<std::size_t, double> recall_sum, ndcg_sum, kld_sum;
    for (auto u : users) {
        std::set<std::pair<std::uint32_t, std::uint32_t>> truth;
        for (std::uint32_t k = 0; k < K; ++k)
            for (auto v : split.held_out[u][k]) truth.insert({k, v});
        if (truth.empty()) continue;  // skipped, not zero-scored

        const RankedList ranked = rec.recommend_mt(u, max_cut);

        // KLD ground-truth distribution.
        std::vector<std::uint32_t> support;
        std::vector<double> p_truth;
        if (opt.kld_over_all_domains) {
            std::vector<double> counts(K, 0.0);
            for (std::uint32_t k = 0; k < K; ++k) {
                counts[k] += static_cast<double>(split.held_out[u][k].size());
                counts[k] += static_cast<double>(split.train.by_user[u][k].size());
            }
            double total = 0.0;
            for (auto c : counts) total += c;
            for (std::uint32_t k = 0; k < K; ++k) {
                support.push_back(k);
                p_truth.push_back(counts[k] / total);
            }
        } else {
            double total = 0.0;
            for (std::uint32_t k = 0; k < K; ++k) {
                if (split.train.G[u][k]) continue;  // seen at train time
                support.push_back(k);
                p_truth.push_back(static_cast<double>(split.held_out[u][k].size()));
                total += p_truth.back();
            }
            for (auto& p : p_truth) p /= total;
        }

        for (auto c : opt.cutoffs) {
            recall_sum[c] += recall_at_k(ranked, truth, c);
            ndcg_sum[c] += ndcg_at_k(ranked, truth, c);
            kld_sum[c] += kld_at_k(ranked, p_truth, support, c);
        }
        ++report.user_count;
    }
    if (report.user_count == 0) throw DataError("evaluate_mt: zero qualifying users");
    for (auto c : opt.cutoffs) {
        report.recall[c] = recall_sum[c] / static_cast<double>(report.user_count);
        report.ndcg[c] = ndcg_sum[c] / static_cast<double>(report.user_count);
        report.kld[c] = kld_sum[c] / static_cast<double>(report.user_count);
    }
    return report;
}

// ST evaluation for one target domain, restricted to users whose hidden set
// contains that domain.
inline MetricsReport evaluate_st(const Recommender& rec, const EvaluationSplit& split,
                                 std::uint32_t target,
                                 const std::vector<std::uint32_t>& users,
                                 const EvalOptions& opt = {}) {
    std::size_t max_cut = 0;
    for (auto c : opt.cutoffs) max_cut = std::max(max_cut, c);
    MetricsReport report;
    report.cutoffs = opt.cutoffs;
    report.target_domain = target;
    std::map<std::size_t, double> recall_sum, ndcg_sum;
    for (auto u : users) {
        if (!split.hidden[u][target]) continue;
        std::set<std::pair<std::uint32_t, std::uint32_t>> truth;
        for (auto v : split.held_out[u][target]) truth.insert({target, v});
        if (truth.empty()) continue;
        const RankedList ranked = rec.recommend_st(u, target, max_cut);
        for (auto c : opt.cutoffs) {
            recall_sum[c] += recall_at_k(ranked, truth, c);
            ndcg_sum[c] += ndcg_at_k(ranked, truth, c);
        }
        ++report.user_count;
    }
    if (report.user_count == 0)
        throw DataError("evaluate_st: zero qualifying users for domain " +
                        std::to_string(target));
    for (auto c : opt.cutoffs) {
        report.recall[c] = recall_sum[c] / static_cast<double>(report.user_count);
        report.ndcg[c] = ndcg_sum[c] / static_cast<double>(report.user_count);
    }
    return report;
}

}  // namespace drip

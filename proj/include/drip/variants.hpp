#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "drip/adam.hpp"
#include "drip/dataset.hpp"
#include "drip/domain_encoder.hpp"
#include "drip/drip_model.hpp"
#include "drip/errors.hpp"
#include "drip/inference.hpp"
#include "drip/metrics.hpp"
#include "drip/training.hpp"

namespace drip {

enum class VariantKind {
    Drip,
    SingleDomain,
    ManyToOneA,
    ManyToOneB,
    FixedUniform,
    FixedActiveness,
    NoAdaptiveMask,
};

inline VariantKind parse_variant(const std::string& s) {
    if (s == "drip") return VariantKind::Drip;
    if (s == "single_domain") return VariantKind::SingleDomain;
    if (s == "many_to_one_a") return VariantKind::ManyToOneA;
    if (s == "many_to_one_b") return VariantKind::ManyToOneB;
    if (s == "fixed_uniform") return VariantKind::FixedUniform;
    if (s == "fixed_activeness") return VariantKind::FixedActiveness;
    if (s == "no_adaptive_mask") return VariantKind::NoAdaptiveMask;
    throw ConfigError("unknown variant: " + s);
}

// Population-std z-normalization; an all-equal list maps to zeros.
inline Vector z_normalize(const Vector& scores) {
    const std::size_t n = scores.size();
    Vector out(n, 0.0);
    if (n == 0) return out;
    double mean = 0.0;
    for (double s : scores) mean += s;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double s : scores) var += (s - mean) * (s - mean);
    var /= static_cast<double>(n);
    if (var <= 0.0) return out;
    const double invstd = 1.0 / std::sqrt(var);
    for (std::size_t i = 0; i < n; ++i) out[i] = (scores[i] - mean) * invstd;
    return out;
}

// ---------------------------------------------------------------------------
// Single-domain learning: all domains as one catalog, one global softmax
// likelihood, no transformer and no domain head.

struct SingleDomainConfig {
    std::size_t dim = 64;
    std::size_t epochs = 50;
    double lr = 0.01;
    std::size_t batch_users = 64;
    std::uint64_t seed = 1;
};

class SingleDomainModel {
public:
    ParamStore store;  // "user_table" (|U|, dim), "item_table" (sum |V_k|, dim)
    std::size_t dim = 0;
    std::vector<std::size_t> item_offset;  // per domain, into the global table

    SingleDomainModel(const InteractionDataset& train, const SingleDomainConfig& cfg)
        : dim(cfg.dim) {
        const std::size_t K = train.num_domains();
        item_offset.resize(K);
        std::size_t total = 0;
        for (std::size_t k = 0; k < K; ++k) {
            item_offset[k] = total;
            total += train.num_items(k);
        }
        Rng rng(cfg.seed);
        Param& users = store.add("user_table", {train.num_users(), dim});
        Param& items = store.add("item_table", {total, dim});
        for (auto& v : users.value) v = rng.normal(0.0, 0.01);
        for (auto& v : items.value) v = rng.normal(0.0, 0.01);
        fit(train, cfg, rng);
    }

    std::size_t global_item(std::uint32_t k, std::uint32_t v) const {
        return item_offset[k] + v;
    }
    std::size_t total_items() const { return store.get("item_table").rows(); }

    // Global softmax over every item for one user.
    Vector item_probs(std::uint32_t u) const {
        const Param& users = store.get("user_table");
        const Param& items = store.get("item_table");
        const std::size_t n = items.rows();
        Vector logits(n);
        for (std::size_t v = 0; v < n; ++v)
            logits[v] = dot(users.row(u), items.row(v), dim);
        return softmax(logits);
    }

private:
    void fit(const InteractionDataset& train, const SingleDomainConfig& cfg, Rng& rng) {
        Param& users = store.get("user_table");
        Param& items = store.get("item_table");
        const std::size_t n_items = items.rows();

        std::vector<std::vector<std::size_t>> positives(train.num_users());
        for (const auto& t : train.interactions)
            positives[t.user].push_back(global_item(t.domain, t.item));
        std::vector<std::uint32_t> user_order;
        for (std::uint32_t u = 0; u < train.num_users(); ++u)
            if (!positives[u].empty()) user_order.push_back(u);

        AdamState adam(store, cfg.lr);
        Vector logits(n_items), p(n_items);
        for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
            rng.shuffle(user_order);
            for (std::size_t start = 0; start < user_order.size();
                 start += cfg.batch_users) {
                const std::size_t end =
                    std::min(start + cfg.batch_users, user_order.size());
                std::size_t batch_triples = 0;
                for (std::size_t i = start; i < end; ++i)
                    batch_triples += positives[user_order[i]].size();
                const double inv_total = 1.0 / static_cast<double>(batch_triples);
                store.zero_grads();
                for (std::size_t i = start; i < end; ++i) {
                    const std::uint32_t u = user_order[i];
                    const double* xu = users.row(u);
                    for (std::size_t v = 0; v < n_items; ++v)
                        logits[v] = dot(xu, items.row(v), dim);
                    softmax(logits.data(), n_items, p.data());
                    const double n_u = static_cast<double>(positives[u].size());
                    double* gu = users.grad_row(u);
                    for (std::size_t v = 0; v < n_items; ++v) {
                        double g = n_u * p[v] * inv_total;
                        if (g == 0.0) continue;
                        const double* xv = items.row(v);
                        double* gv = items.grad_row(v);
                        for (std::size_t t = 0; t < dim; ++t) {
                            gu[t] += g * xv[t];
                            gv[t] += g * xu[t];
                        }
                    }
                    for (auto v : positives[u]) {
                        const double* xv = items.row(v);
                        double* gv = items.grad_row(v);
                        for (std::size_t t = 0; t < dim; ++t) {
                            gu[t] -= inv_total * xv[t];
                            gv[t] -= inv_total * xu[t];
                        }
                    }
                }
                adam.step(store);
            }
        }
    }
};

class SingleDomainRecommender : public Recommender {
public:
    SingleDomainRecommender(const SingleDomainModel& model,
                            const InteractionDataset& train)
        : model_(model), train_(train) {}

    RankedList recommend_mt(std::uint32_t user, std::size_t n) const override {
        const Vector p = model_.item_probs(user);
        RankedList list;
        for (std::uint32_t k = 0; k < train_.num_domains(); ++k) {
            if (train_.G[user][k]) continue;
            for (std::uint32_t v = 0; v < train_.num_items(k); ++v)
                list.push_back({v, k, p[model_.global_item(k, v)]});
        }
        if (list.empty()) throw DataError("recommend_mt: user has no unseen domain");
        sort_ranked(list);
        if (list.size() > n) list.resize(n);
        return list;
    }

    RankedList recommend_st(std::uint32_t user, std::uint32_t domain,
                            std::size_t n) const override {
        if (train_.G[user][domain])
            throw DataError("recommend_st: target domain is seen for this user");
        const Vector p = model_.item_probs(user);
        RankedList list;
        for (std::uint32_t v = 0; v < train_.num_items(domain); ++v)
            list.push_back({v, domain, p[model_.global_item(domain, v)]});
        sort_ranked(list);
        if (list.size() > n) list.resize(n);
        return list;
    }

private:
    const SingleDomainModel& model_;
    const InteractionDataset& train_;
};

// ---------------------------------------------------------------------------
// Many-to-one learning: one DRIP-style model per target domain, trained with
// that domain always masked and the item-level loss only; MT lists are merged
// by per-domain z-normalization (A), optionally weighted by the domain's
// share of training interactions (B).

// Item-level-only loss with a fixed single-domain mask; mirrors compute_loss
// without the domain-preference term.
inline std::optional<double> compute_item_only_loss(
    DripModel& model, const InteractionDataset& train,
    const std::vector<const DomainEncoderParams*>& encoders,
    const std::vector<std::uint32_t>& users, std::uint32_t target, bool train_mode,
    Rng* dropout_rng) {
    const std::size_t d = model.cfg.embed_dim;
    std::size_t total = 0;
    for (auto u : users) total += train.by_user[u][target].size();
    if (total == 0) return std::nullopt;
    const double inv_total = 1.0 / static_cast<double>(total);

    double loss = 0.0;
    for (auto u : users) {
        const auto& items = train.by_user[u][target];
        if (items.empty()) continue;
        std::vector<std::uint8_t> mask(model.cfg.num_domains, 0);
        mask[target] = 1;
        const InputSources src = model.sources_for(train.G[u], encoders, u, &mask);
        const Matrix h0 = model.build_input(src);
        const EncoderCache cache = model.forward(h0, train_mode, dropout_rng);
        const Matrix& hL = cache.final_output();

        const Vector z = model.item_projection(target, hL.row(target + 1));
        const Param& table = encoders[target]->item_table();
        const std::size_t n_items = table.rows();
        Vector logits(n_items);
        for (std::size_t v = 0; v < n_items; ++v)
            logits[v] = dot(z.data(), table.row(v), d);
        const double lse = log_sum_exp(logits.data(), n_items);
        for (auto v : items) loss -= logits[v] - lse;

        Vector dlogits = softmax(logits);
        const double n_u = static_cast<double>(items.size());
        for (auto& g : dlogits) g *= n_u * inv_total;
        for (auto v : items) dlogits[v] -= inv_total;

        Vector dz(d, 0.0);
        for (std::size_t v = 0; v < n_items; ++v) {
            const double g = dlogits[v];
            if (g == 0.0) continue;
            const double* row = table.row(v);
            for (std::size_t i = 0; i < d; ++i) dz[i] += g * row[i];
        }
        Matrix dhL(model.cfg.seq_len(), model.cfg.width);
        model.item_projection_backward(target, hL.row(target + 1), dz,
                                       dhL.row(target + 1));
        Matrix dh0;
        model.backward(cache, dhL, dh0);
        model.backward_input(src, dh0);
    }
    return loss * inv_total;
}

class ManyToOneRecommender : public Recommender {
public:
    // post B weights scores by the domain's share of training interactions.
    ManyToOneRecommender(std::vector<std::unique_ptr<DripModel>> models,
                         std::vector<const DomainEncoderParams*> encoders,
                         const InteractionDataset& train, bool post_b)
        : models_(std::move(models)), encoders_(std::move(encoders)), train_(train),
          post_b_(post_b) {
        domain_share_.assign(train.num_domains(), 0.0);
        for (const auto& t : train.interactions) domain_share_[t.domain] += 1.0;
        for (auto& s : domain_share_)
            s /= static_cast<double>(train.interactions.size());
    }

    RankedList recommend_mt(std::uint32_t user, std::size_t n) const override {
        RankedList merged;
        bool any_unseen = false;
        for (std::uint32_t k = 0; k < train_.num_domains(); ++k) {
            if (train_.G[user][k]) continue;
            any_unseen = true;
            const Vector p = domain_scores(user, k);
            Vector z = z_normalize(p);
            if (post_b_)
                for (auto& s : z) s *= domain_share_[k];
            for (std::uint32_t v = 0; v < z.size(); ++v) merged.push_back({v, k, z[v]});
        }
        if (!any_unseen) throw DataError("recommend_mt: user has no unseen domain");
        sort_ranked(merged);
        if (merged.size() > n) merged.resize(n);
        return merged;
    }

    RankedList recommend_st(std::uint32_t user, std::uint32_t domain,
                            std::size_t n) const override {
        if (train_.G[user][domain])
            throw DataError("recommend_st: target domain is seen for this user");
        const Vector p = domain_scores(user, domain);
        RankedList list;
        for (std::uint32_t v = 0; v < p.size(); ++v) list.push_back({v, domain, p[v]});
        sort_ranked(list);
        if (list.size() > n) list.resize(n);
        return list;
    }

private:
    Vector domain_scores(std::uint32_t user, std::uint32_t k) const {
        const DripModel& model = *models_[k];
        const InputSources src = model.sources_for(train_.G[user], encoders_, user);
        const EncoderCache cache = model.forward(model.build_input(src));
        const Vector z = model.item_projection(k, cache.final_output().row(k + 1));
        return model.item_preference(z, *encoders_[k]);
    }

    std::vector<std::unique_ptr<DripModel>> models_;
    std::vector<const DomainEncoderParams*> encoders_;
    const InteractionDataset& train_;
    bool post_b_;
    Vector domain_share_;
};

// Trains the K per-target models for the many-to-one variants.
inline std::vector<std::unique_ptr<DripModel>> train_many_to_one(
    const InteractionDataset& train, const EvaluationSplit& split,
    const std::vector<const DomainEncoderParams*>& encoders, const TrainConfig& cfg) {
    const std::size_t K = train.num_domains();
    std::vector<std::unique_ptr<DripModel>> models;
    for (std::uint32_t target = 0; target < K; ++target) {
        DripConfig mcfg;
        mcfg.num_domains = K;
        mcfg.embed_dim = encoders[0]->dim;
        mcfg.width = cfg.width;
        mcfg.layers = cfg.layers;
        mcfg.heads = cfg.heads;
        mcfg.dropout = cfg.dropout;
        auto model = std::make_unique<DripModel>(mcfg, cfg.seed + target);
        Rng rng(cfg.seed + target);
        AdamState adam(model->store, cfg.lr, cfg.weight_decay);

        std::vector<std::uint32_t> users;
        for (std::uint32_t u = 0; u < train.num_users(); ++u)
            if (train.G[u][target] && train.seen_count(u) >= 2) users.push_back(u);
        if (users.empty()) continue;  // nothing to learn for this target

        for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
            rng.shuffle(users);
            for (std::size_t start = 0; start < users.size(); start += cfg.batch_size) {
                const std::size_t end = std::min(start + cfg.batch_size, users.size());
                std::vector<std::uint32_t> batch(users.begin() + start,
                                                 users.begin() + end);
                model->store.zero_grads();
                const auto loss = compute_item_only_loss(*model, train, encoders, batch,
                                                         target, true, &rng);
                if (!loss || !std::isfinite(*loss)) continue;
                adam.step(model->store);
            }
        }
        models.push_back(std::move(model));
        (void)split;
    }
    if (models.size() != K)
        throw DataError("many-to-one: some target domain had no eligible users");
    return models;
}

}  // namespace drip

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "drip/adam.hpp"
#include "drip/dataset.hpp"
#include "drip/errors.hpp"
#include "drip/ops.hpp"
#include "drip/param_store.hpp"
#include "drip/rng.hpp"

namespace drip {

// Frozen per-domain id-embedding encoder with inner-product similarity.
// Rows of the user table cover only the users seen in the domain.
struct DomainEncoderParams {
    std::uint32_t domain = 0;
    std::size_t dim = 64;
    std::vector<std::uint32_t> users;     // global user indices, ascending
    std::vector<std::int64_t> user_row;   // global user -> row, -1 if absent
    ParamStore store;                     // "user_table", "item_table"
    bool frozen = false;

    Param& user_table() { return store.get("user_table"); }
    Param& item_table() { return store.get("item_table"); }
    const Param& user_table() const { return store.get("user_table"); }
    const Param& item_table() const { return store.get("item_table"); }

    bool has_user(std::uint32_t u) const {
        return u < user_row.size() && user_row[u] >= 0;
    }
    const double* user_embedding(std::uint32_t u) const {
        if (!has_user(u))
            throw DataError("user " + std::to_string(u) + " not in domain " +
                            std::to_string(domain));
        return user_table().row(static_cast<std::size_t>(user_row[u]));
    }
    const double* item_embedding(std::uint32_t v) const {
        if (v >= item_table().rows())
            throw DataError("item index out of vocabulary: " + std::to_string(v));
        return item_table().row(v);
    }
    double score(std::uint32_t u, std::uint32_t v) const {
        return dot(user_embedding(u), item_embedding(v), dim);
    }
};

struct BprPair {
    std::uint32_t user_row;
    std::uint32_t pos_item;
    std::uint32_t neg_item;
};

// Mean pairwise logistic ranking loss over the batch plus l2 * ||params||^2;
// fills store gradients when populate_grads is set.
inline double bpr_batch_loss(DomainEncoderParams& enc, const std::vector<BprPair>& pairs,
                             double l2, bool populate_grads = true) {
    Param& users = enc.user_table();
    Param& items = enc.item_table();
    const std::size_t d = enc.dim;
    double loss = 0.0;
    const double inv_b = pairs.empty() ? 0.0 : 1.0 / static_cast<double>(pairs.size());
    for (const auto& pr : pairs) {
        const double* xu = users.row(pr.user_row);
        const double* xp = items.row(pr.pos_item);
        const double* xn = items.row(pr.neg_item);
        const double margin = dot(xu, xp, d) - dot(xu, xn, d);
        // -ln sigma(margin), computed stably.
        loss += margin > 0.0 ? std::log1p(std::exp(-margin))
                             : -margin + std::log1p(std::exp(margin));
        if (populate_grads) {
            const double g = -inv_b / (1.0 + std::exp(margin));  // d loss / d margin
            double* gu = users.grad_row(pr.user_row);
            double* gp = items.grad_row(pr.pos_item);
            double* gn = items.grad_row(pr.neg_item);
            for (std::size_t i = 0; i < d; ++i) {
                gu[i] += g * (xp[i] - xn[i]);
                gp[i] += g * xu[i];
                gn[i] -= g * xu[i];
            }
        }
    }
    loss *= inv_b;
    if (l2 != 0.0) {
        for (Param* p : enc.store.params()) {
            for (std::size_t i = 0; i < p->size(); ++i) {
                loss += l2 * p->value[i] * p->value[i];
                if (populate_grads) p->grad[i] += 2.0 * l2 * p->value[i];
            }
        }
    }
    return loss;
}

struct BprConfig {
    std::size_t dim = 64;
    std::size_t epochs = 100;
    double lr = 0.01;
    double l2 = 1e-5;
    std::size_t negatives_per_positive = 1;
    std::size_t batch_size = 128;
    std::uint64_t seed = 1;
};

// Pairwise ranking pretraining of one domain encoder; the returned tables are
// frozen and never updated during the masked-domain training.
inline DomainEncoderParams train_bpr(const InteractionDataset& ds, std::uint32_t k,
                                     const BprConfig& cfg) {
    if (k >= ds.num_domains()) throw DataError("no such domain");
    const std::size_t n_items = ds.num_items(k);
    if (n_items < 2)
        throw DataError("domain " + ds.domain_ids[k] +
                        " has fewer than two items; no valid negative exists");

    DomainEncoderParams enc;
    enc.domain = k;
    enc.dim = cfg.dim;
    enc.user_row.assign(ds.num_users(), -1);
    for (std::uint32_t u = 0; u < ds.num_users(); ++u) {
        if (ds.G[u][k]) {
            enc.user_row[u] = static_cast<std::int64_t>(enc.users.size());
            enc.users.push_back(u);
        }
    }
    if (enc.users.empty()) throw DataError("domain " + ds.domain_ids[k] + " is empty");

    Rng rng(cfg.seed);
    Param& users = enc.store.add("user_table", {enc.users.size(), cfg.dim});
    Param& items = enc.store.add("item_table", {n_items, cfg.dim});
    for (auto& v : users.value) v = rng.normal(0.0, 0.01);
    for (auto& v : items.value) v = rng.normal(0.0, 0.01);

    // Positive list in user-row space, plus per-row positive sets.
    std::vector<std::pair<std::uint32_t, std::uint32_t>> positives;
    std::vector<std::vector<std::uint32_t>> pos_sets(enc.users.size());
    for (std::size_t row = 0; row < enc.users.size(); ++row) {
        for (auto v : ds.by_user[enc.users[row]][k]) {
            positives.emplace_back(static_cast<std::uint32_t>(row), v);
            pos_sets[row].push_back(v);
        }
    }

    auto sample_negative = [&](std::uint32_t row) -> std::int64_t {
        const auto& pos = pos_sets[row];
        if (pos.size() >= n_items) return -1;  // nothing to rank against
        while (true) {
            const auto v = static_cast<std::uint32_t>(rng.index(n_items));
            if (!std::binary_search(pos.begin(), pos.end(), v)) return v;
        }
    };

    AdamState adam(enc.store, cfg.lr);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(positives);
        std::vector<BprPair> batch;
        batch.reserve(cfg.batch_size);
        auto flush = [&]() {
            if (batch.empty()) return;
            enc.store.zero_grads();
            bpr_batch_loss(enc, batch, cfg.l2);
            adam.step(enc.store);
            batch.clear();
        };
        for (const auto& [row, pos] : positives) {
            for (std::size_t n = 0; n < cfg.negatives_per_positive; ++n) {
                const std::int64_t neg = sample_negative(row);
                if (neg < 0) continue;
                batch.push_back({row, pos, static_cast<std::uint32_t>(neg)});
                if (batch.size() >= cfg.batch_size) flush();
            }
        }
        flush();
    }
    enc.frozen = true;
    return enc;
}

inline void save_encoder(const std::string& path, const DomainEncoderParams& enc,
                         std::uint64_t config_hash, std::uint64_t seed) {
    CheckpointHeader hdr;
    hdr.config_hash = config_hash;
    hdr.seed = seed;
    hdr.domain = enc.domain;
    save_checkpoint(path, enc.store, hdr);
}

inline DomainEncoderParams load_encoder(const std::string& path,
                                        const InteractionDataset& ds) {
    DomainEncoderParams enc;
    const CheckpointHeader hdr = load_checkpoint(path, enc.store);
    if (hdr.domain == kNoDomain || hdr.domain >= ds.num_domains())
        throw IoError("encoder checkpoint has no valid domain index: " + path);
    enc.domain = hdr.domain;
    enc.dim = enc.store.get("user_table").cols();
    enc.user_row.assign(ds.num_users(), -1);
    for (std::uint32_t u = 0; u < ds.num_users(); ++u) {
        if (ds.G[u][enc.domain]) {
            enc.user_row[u] = static_cast<std::int64_t>(enc.users.size());
            enc.users.push_back(u);
        }
    }
    if (enc.users.size() != enc.store.get("user_table").rows())
        throw IoError("encoder checkpoint does not match dataset vocabularies: " + path);
    enc.frozen = true;
    return enc;
}

}  // namespace drip

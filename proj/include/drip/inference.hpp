#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "drip/dataset.hpp"
#include "drip/domain_encoder.hpp"
#include "drip/drip_model.hpp"
#include "drip/errors.hpp"

namespace drip {

struct RankedEntry {
    std::uint32_t item;
    std::uint32_t domain;
    double score;
};
using RankedList = std::vector<RankedEntry>;

// Score descending; ties broken by (domain, item) ascending.
inline void sort_ranked(RankedList& list) {
    std::sort(list.begin(), list.end(), [](const RankedEntry& a, const RankedEntry& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.domain != b.domain) return a.domain < b.domain;
        return a.item < b.item;
    });
}

// Scoring interface shared by the full model and the ablation variants, so
// every configuration is evaluated through the identical path.
struct Recommender {
    virtual ~Recommender() = default;
    virtual RankedList recommend_mt(std::uint32_t user, std::size_t n) const = 0;
    virtual RankedList recommend_st(std::uint32_t user, std::uint32_t domain,
                                    std::size_t n) const = 0;
};

// How the MT domain factor is produced; the fixed variants replace the
// learned p(d_k|u) with a global distribution.
enum class DomainFactor { Learned, Uniform, Activeness };

class DripRecommender : public Recommender {
public:
    DripRecommender(const DripModel& model,
                    std::vector<const DomainEncoderParams*> encoders,
                    const InteractionDataset& train,
                    DomainFactor factor = DomainFactor::Learned)
        : model_(model), encoders_(std::move(encoders)), train_(train), factor_(factor) {
        if (factor_ == DomainFactor::Activeness) {
            activeness_.assign(train.num_domains(), 0.0);
            for (const auto& t : train.interactions) activeness_[t.domain] += 1.0;
            const double total = static_cast<double>(train.interactions.size());
            for (auto& a : activeness_) a /= total;
        }
    }

    RankedList recommend_mt(std::uint32_t user, std::size_t n) const override {
        const auto& g_row = train_.G[user];
        const std::size_t K = train_.num_domains();
        std::size_t n_seen = 0;
        for (auto g : g_row) n_seen += g;
        if (n_seen == 0) throw DataError("recommend_mt: user has no seen domain");
        if (n_seen == K) throw DataError("recommend_mt: user has no unseen domain");

        const EncoderCache cache = forward_user(user);
        const Matrix& hL = cache.final_output();
        Vector p_dom;
        switch (factor_) {
            case DomainFactor::Learned: p_dom = model_.domain_preference(hL.row(0)); break;
            case DomainFactor::Uniform:
                p_dom.assign(K, 1.0 / static_cast<double>(K));
                break;
            case DomainFactor::Activeness: p_dom = activeness_; break;
        }

        RankedList list;
        for (std::uint32_t k = 0; k < K; ++k) {
            if (g_row[k]) continue;
            const Vector z = model_.item_projection(k, hL.row(k + 1));
            const Vector p_items = model_.item_preference(z, *encoders_[k]);
            const auto& interacted = train_.by_user[user][k];
            for (std::uint32_t v = 0; v < p_items.size(); ++v) {
                if (std::binary_search(interacted.begin(), interacted.end(), v)) continue;
                list.push_back({v, k, p_items[v] * p_dom[k]});
            }
        }
        sort_ranked(list);
        if (list.size() > n) list.resize(n);
        return list;
    }

    RankedList recommend_st(std::uint32_t user, std::uint32_t domain,
                            std::size_t n) const override {
        if (train_.G[user][domain])
            throw DataError("recommend_st: target domain is seen for this user");
        const EncoderCache cache = forward_user(user);
        const Matrix& hL = cache.final_output();
        const Vector z = model_.item_projection(domain, hL.row(domain + 1));
        const Vector p_items = model_.item_preference(z, *encoders_[domain]);
        RankedList list;
        list.reserve(p_items.size());
        for (std::uint32_t v = 0; v < p_items.size(); ++v)
            list.push_back({v, domain, p_items[v]});
        sort_ranked(list);
        if (list.size() > n) list.resize(n);
        return list;
    }

    Vector domain_preference(std::uint32_t user) const {
        const EncoderCache cache = forward_user(user);
        return model_.domain_preference(cache.final_output().row(0));
    }

private:
    EncoderCache forward_user(std::uint32_t user) const {
        const InputSources src = model_.sources_for(train_.G[user], encoders_, user);
        return model_.forward(model_.build_input(src), /*train_mode=*/false);
    }

    const DripModel& model_;
    std::vector<const DomainEncoderParams*> encoders_;
    const InteractionDataset& train_;
    DomainFactor factor_;
    Vector activeness_;
};

inline void save_recommendations(const std::string& path, const InteractionDataset& ds,
                                 const std::vector<std::uint32_t>& users,
                                 const Recommender& rec, std::size_t n) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for write: " + path);
    for (auto u : users) {
        const RankedList list = rec.recommend_mt(u, n);
        std::size_t rank = 1;
        for (const auto& e : list) {
            os << ds.user_ids[u] << '\t' << rank++ << '\t' << ds.item_ids[e.domain][e.item]
               << '\t' << ds.domain_ids[e.domain] << '\t' << e.score << '\n';
        }
    }
    if (!os) throw IoError("write failed: " + path);
}

}  // namespace drip

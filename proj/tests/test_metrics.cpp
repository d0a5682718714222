#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "drip/metrics.hpp"

using namespace drip;

namespace {

using Truth = std::set<std::pair<std::uint32_t, std::uint32_t>>;

RankedList single_domain_list(std::uint32_t domain, const std::vector<std::uint32_t>& items) {
    RankedList list;
    double score = 1.0;
    for (auto v : items) list.push_back({v, domain, score -= 0.01});
    return list;
}

// Deterministic mock: every unseen-domain item gets a pseudo-random score.
struct MockRecommender : Recommender {
    const InteractionDataset& train;
    std::uint64_t salt;
    MockRecommender(const InteractionDataset& ds, std::uint64_t s) : train(ds), salt(s) {}

    double score(std::uint32_t u, std::uint32_t k, std::uint32_t v) const {
        std::uint64_t x = salt ^ (u * 0x9e3779b97f4a7c15ULL) ^
                          (std::uint64_t(k) << 32) ^ (v * 0xbf58476d1ce4e5b9ULL);
        x ^= x >> 30;
        x *= 0x94d049bb133111ebULL;
        x ^= x >> 31;
        return static_cast<double>(x % 100000) / 100000.0;  // deliberate tie mass
    }
    RankedList recommend_mt(std::uint32_t u, std::size_t n) const override {
        RankedList list;
        for (std::uint32_t k = 0; k < train.num_domains(); ++k) {
            if (train.G[u][k]) continue;
            const auto& inter = train.by_user[u][k];
            for (std::uint32_t v = 0; v < train.num_items(k); ++v)
                if (!std::binary_search(inter.begin(), inter.end(), v))
                    list.push_back({v, k, score(u, k, v)});
        }
        sort_ranked(list);
        if (list.size() > n) list.resize(n);
        return list;
    }
    RankedList recommend_st(std::uint32_t u, std::uint32_t k, std::size_t n) const override {
        RankedList list;
        for (std::uint32_t v = 0; v < train.num_items(k); ++v)
            list.push_back({v, k, score(u, k, v)});
        sort_ranked(list);
        if (list.size() > n) list.resize(n);
        return list;
    }
};

// Random multi-domain dataset plus a random hidden assignment.
struct RandomInstance {
    InteractionDataset ds;
    EvaluationSplit split;
};

RandomInstance random_instance(std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t K = 2 + rng.index(3);
    const std::size_t users = 6 + rng.index(10);
    InteractionDataset ds;
    for (std::size_t k = 0; k < K; ++k) {
        const auto dk = ds.intern_domain("d" + std::to_string(k));
        const std::size_t items = 4 + rng.index(8);
        for (std::size_t i = 0; i < items; ++i)
            ds.intern_item(dk, "d" + std::to_string(k) + "i" + std::to_string(i));
    }
    std::set<Interaction> chosen;
    for (std::size_t j = 0; j < users; ++j) {
        const auto u = ds.intern_user("u" + std::to_string(j));
        const std::size_t n = 3 + rng.index(6);
        for (std::size_t t = 0; t < n; ++t) {
            const auto k = static_cast<std::uint32_t>(rng.index(K));
            const auto v = static_cast<std::uint32_t>(rng.index(ds.num_items(k)));
            if (chosen.insert({u, k, v}).second) ds.interactions.push_back({u, k, v});
        }
    }
    ds.finalize();

    // Hide one random seen domain for each overlapping user.
    std::vector<std::vector<std::uint8_t>> hidden(ds.num_users(),
                                                  std::vector<std::uint8_t>(K, 0));
    std::vector<std::uint32_t> eligible;
    for (std::uint32_t u = 0; u < ds.num_users(); ++u) {
        if (!ds.is_overlapping(u)) continue;
        std::vector<std::uint32_t> seen;
        for (std::uint32_t k = 0; k < K; ++k)
            if (ds.G[u][k]) seen.push_back(k);
        hidden[u][seen[rng.index(seen.size())]] = 1;
        eligible.push_back(u);
    }
    RandomInstance inst;
    inst.split = detail::build_split(ds, hidden, {}, eligible, seed, 0.3, 0.0);
    inst.ds = std::move(ds);
    return inst;
}

}  // namespace

TEST_CASE("recall oracle values") {
    const RankedList ranked = single_domain_list(0, {0, 1, 2, 3, 4, 5});
    SECTION("two of four truths in the top five") {
        const Truth truth = {{0, 1}, {0, 4}, {0, 9}, {0, 11}};
        CHECK(recall_at_k(ranked, truth, 5) == Catch::Approx(0.5).epsilon(1e-15));
    }
    SECTION("cutoff truncates hits") {
        const Truth truth = {{0, 4}};
        CHECK(recall_at_k(ranked, truth, 3) == 0.0);
        CHECK(recall_at_k(ranked, truth, 5) == 1.0);
    }
    SECTION("domain mismatch is not a hit") {
        const Truth truth = {{1, 0}};
        CHECK(recall_at_k(ranked, truth, 5) == 0.0);
    }
    SECTION("empty truth throws") {
        CHECK_THROWS_AS(recall_at_k(ranked, {}, 5), DataError);
    }
}

TEST_CASE("ndcg oracle values") {
    SECTION("single truth at rank three scores 1/log2(4)") {
        const RankedList ranked = single_domain_list(0, {7, 8, 2, 9});
        const Truth truth = {{0, 2}};
        CHECK(ndcg_at_k(ranked, truth, 10) == Catch::Approx(0.5).epsilon(1e-15));
    }
    SECTION("perfect ranking scores one") {
        const RankedList ranked = single_domain_list(0, {3, 1, 4});
        const Truth truth = {{0, 3}, {0, 1}, {0, 4}};
        CHECK(ndcg_at_k(ranked, truth, 3) == Catch::Approx(1.0).epsilon(1e-15));
    }
    SECTION("ideal DCG counts min(K, |truth|) slots") {
        // One hit at rank 1, |truth| = 3, cutoff 2: idcg = 1 + 1/log2(3).
        const RankedList ranked = single_domain_list(0, {3, 9});
        const Truth truth = {{0, 3}, {0, 5}, {0, 6}};
        const double expect = 1.0 / (1.0 + 1.0 / std::log2(3.0));
        CHECK(ndcg_at_k(ranked, truth, 2) == Catch::Approx(expect).epsilon(1e-12));
    }
    SECTION("empty truth throws") {
        CHECK_THROWS_AS(ndcg_at_k(single_domain_list(0, {1}), {}, 5), DataError);
    }
}

TEST_CASE("kld oracle values") {
    SECTION("hand value for a (0.9, 0.1) list against a uniform truth") {
        RankedList ranked;
        for (std::uint32_t v = 0; v < 18; ++v) ranked.push_back({v, 0, 1.0 - 0.01 * v});
        for (std::uint32_t v = 0; v < 2; ++v) ranked.push_back({v, 1, 0.5 - 0.01 * v});
        const double kld = kld_at_k(ranked, {0.5, 0.5}, {0, 1}, 20);
        // 0.5 ln(0.5/0.9) + 0.5 ln(0.5/0.1) = 0.5 ln(25/9), up to smoothing.
        CHECK(kld == Catch::Approx(0.5 * std::log(25.0 / 9.0)).margin(1e-5));
    }
    SECTION("matching distribution scores near zero") {
        RankedList ranked;
        for (std::uint32_t v = 0; v < 10; ++v) ranked.push_back({v, 0, 2.0 - 0.01 * v});
        for (std::uint32_t v = 0; v < 10; ++v) ranked.push_back({v, 1, 1.0 - 0.01 * v});
        CHECK(kld_at_k(ranked, {0.5, 0.5}, {0, 1}, 20) ==
              Catch::Approx(0.0).margin(1e-6));
    }
    SECTION("zero-probability truth components contribute nothing") {
        RankedList ranked;
        for (std::uint32_t v = 0; v < 10; ++v) ranked.push_back({v, 0, 1.0 - 0.01 * v});
        const double kld = kld_at_k(ranked, {1.0, 0.0}, {0, 1}, 10);
        // Q(d0) = (10 + eps) / (10 + 2 eps): effectively zero divergence.
        CHECK(kld == Catch::Approx(0.0).margin(1e-6));
    }
    SECTION("absent domain is punished via smoothing, not infinity") {
        RankedList ranked;
        for (std::uint32_t v = 0; v < 10; ++v) ranked.push_back({v, 0, 1.0 - 0.01 * v});
        const double kld = kld_at_k(ranked, {0.5, 0.5}, {0, 1}, 10);
        CHECK(std::isfinite(kld));
        CHECK(kld > 2.0);  // ~0.5 ln(0.5 / 1e-7)
    }
    SECTION("empty top-K throws") {
        CHECK_THROWS_AS(kld_at_k({}, {1.0}, {0}, 10), DataError);
    }
}

TEST_CASE("evaluators agree with a brute-force reimplementation") {
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const auto inst = random_instance(seed);
        const auto& split = inst.split;
        const std::size_t K = split.train.num_domains();
        MockRecommender rec(split.train, seed * 31);
        EvalOptions opt;
        opt.cutoffs = {3, 10};

        // Users qualifying for MT: nonempty held-out.
        std::vector<std::uint32_t> users = split.test_users;
        double n_used = 0.0;
        std::map<std::size_t, double> recall_sum, ndcg_sum, kld_sum;
        bool any = false;
        for (auto u : users) {
            std::vector<std::pair<std::uint32_t, std::uint32_t>> truth;
            for (std::uint32_t k = 0; k < K; ++k)
                for (auto v : split.held_out[u][k]) truth.emplace_back(k, v);
            if (truth.empty()) continue;
            any = true;
            n_used += 1.0;
            const RankedList ranked = rec.recommend_mt(u, 10);
            for (std::size_t c : opt.cutoffs) {
                // Recall: linear scan.
                double hits = 0.0;
                for (std::size_t i = 0; i < std::min(c, ranked.size()); ++i)
                    for (const auto& t : truth)
                        if (t.first == ranked[i].domain && t.second == ranked[i].item)
                            hits += 1.0;
                recall_sum[c] += hits / static_cast<double>(truth.size());
                // NDCG via the explicit log formula (natural logs).
                double dcg = 0.0;
                for (std::size_t i = 0; i < std::min(c, ranked.size()); ++i)
                    for (const auto& t : truth)
                        if (t.first == ranked[i].domain && t.second == ranked[i].item)
                            dcg += std::log(2.0) / std::log(static_cast<double>(i) + 2.0);
                double idcg = 0.0;
                for (std::size_t i = 0; i < std::min(c, truth.size()); ++i)
                    idcg += std::log(2.0) / std::log(static_cast<double>(i) + 2.0);
                ndcg_sum[c] += dcg / idcg;
                // KLD over the unseen support.
                std::vector<std::uint32_t> support;
                std::vector<double> p;
                double ptot = 0.0;
                for (std::uint32_t k = 0; k < K; ++k) {
                    if (split.train.G[u][k]) continue;
                    support.push_back(k);
                    p.push_back(static_cast<double>(split.held_out[u][k].size()));
                    ptot += p.back();
                }
                std::vector<double> q(support.size(), kKldSmoothing);
                double qtot = static_cast<double>(support.size()) * kKldSmoothing;
                for (std::size_t i = 0; i < std::min(c, ranked.size()); ++i)
                    for (std::size_t s = 0; s < support.size(); ++s)
                        if (support[s] == ranked[i].domain) {
                            q[s] += 1.0;
                            qtot += 1.0;
                        }
                double kld = 0.0;
                for (std::size_t s = 0; s < support.size(); ++s)
                    if (p[s] > 0.0)
                        kld += p[s] / ptot * std::log((p[s] / ptot) / (q[s] / qtot));
                kld_sum[c] += kld;
            }
        }
        if (!any) continue;  // degenerate draw, nothing to compare

        const MetricsReport rep = evaluate_mt(rec, split, users, opt);
        CHECK(rep.user_count == static_cast<std::size_t>(n_used));
        for (std::size_t c : opt.cutoffs) {
            CHECK(std::abs(rep.recall.at(c) - recall_sum[c] / n_used) < 1e-12);
            CHECK(std::abs(rep.ndcg.at(c) - ndcg_sum[c] / n_used) < 1e-12);
            CHECK(std::abs(rep.kld.at(c) - kld_sum[c] / n_used) < 1e-12);
        }

        // ST spot check on the first qualifying (user, domain).
        for (auto u : users) {
            std::int64_t target = -1;
            for (std::uint32_t k = 0; k < K; ++k)
                if (split.hidden[u][k] && !split.held_out[u][k].empty()) target = k;
            if (target < 0) continue;
            const MetricsReport st =
                evaluate_st(rec, split, static_cast<std::uint32_t>(target), {u}, opt);
            const RankedList ranked = rec.recommend_st(u, target, 10);
            std::vector<std::pair<std::uint32_t, std::uint32_t>> truth;
            for (auto v : split.held_out[u][target])
                truth.emplace_back(static_cast<std::uint32_t>(target), v);
            for (std::size_t c : opt.cutoffs) {
                double hits = 0.0;
                for (std::size_t i = 0; i < std::min(c, ranked.size()); ++i)
                    for (const auto& t : truth)
                        if (t.first == ranked[i].domain && t.second == ranked[i].item)
                            hits += 1.0;
                CHECK(std::abs(st.recall.at(c) - hits / truth.size()) < 1e-12);
            }
            break;
        }
    }
}

TEST_CASE("evaluator edge cases") {
    const auto inst = random_instance(7);
    MockRecommender rec(inst.split.train, 99);

    SECTION("zero qualifying users throws") {
        CHECK_THROWS_AS(evaluate_mt(rec, inst.split, {}, {}), DataError);
    }
    SECTION("an oracle recommender achieves recall one") {
        // Perfect recommender: puts the held-out items first.
        struct Oracle : Recommender {
            const EvaluationSplit& split;
            explicit Oracle(const EvaluationSplit& s) : split(s) {}
            RankedList recommend_mt(std::uint32_t u, std::size_t n) const override {
                RankedList list;
                double score = 1e6;
                const std::size_t K = split.train.num_domains();
                for (std::uint32_t k = 0; k < K; ++k)
                    for (auto v : split.held_out[u][k]) list.push_back({v, k, score -= 1.0});
                for (std::uint32_t k = 0; k < K; ++k) {
                    if (split.train.G[u][k]) continue;
                    for (std::uint32_t v = 0; v < split.train.num_items(k); ++v)
                        if (!split.hidden[u][k] ||
                            !std::binary_search(split.held_out[u][k].begin(),
                                                split.held_out[u][k].end(), v))
                            list.push_back({v, k, score -= 1.0});
                }
                if (list.size() > n) list.resize(n);
                return list;
            }
            RankedList recommend_st(std::uint32_t, std::uint32_t, std::size_t) const override {
                return {};
            }
        } oracle(inst.split);

        EvalOptions opt;
        opt.cutoffs = {50};
        const MetricsReport rep = evaluate_mt(oracle, inst.split, inst.split.test_users, opt);
        CHECK(rep.recall.at(50) == 1.0);
        CHECK(rep.ndcg.at(50) == 1.0);
    }
}

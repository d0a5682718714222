#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "drip/dataset.hpp"
#include "drip/split.hpp"

using namespace drip;
namespace fs = std::filesystem;

namespace {

fs::path write_tsv(const std::string& name, const std::string& content) {
    const fs::path path = fs::temp_directory_path() / name;
    std::ofstream os(path);
    os << content;
    return path;
}

InteractionDataset from_triples(
    const std::vector<std::tuple<std::string, std::string, std::string>>& triples) {
    InteractionDataset ds;
    for (const auto& [u, i, d] : triples) {
        const auto uu = ds.intern_user(u);
        const auto dd = ds.intern_domain(d);
        const auto vv = ds.intern_item(dd, i);
        ds.interactions.push_back({uu, dd, vv});
    }
    ds.finalize();
    return ds;
}

}  // namespace

TEST_CASE("load_interactions") {
    SECTION("basic file: G and N follow from the triples") {
        const auto path = write_tsv("drip_basic.tsv",
                                    "u1\ti1\tdA\n"
                                    "u1\ti2\tdB\n"
                                    "u2\ti1\tdA\n");
        const auto ds = load_interactions(path.string());
        CHECK(ds.num_domains() == 2);
        CHECK(ds.num_users() == 2);
        CHECK(ds.G[0] == std::vector<std::uint8_t>{1, 1});
        CHECK(ds.G[1] == std::vector<std::uint8_t>{1, 0});
        CHECK(ds.user_counts == std::vector<std::size_t>{2, 1});
        fs::remove(path);
    }
    SECTION("item appearing in two domains is rejected") {
        const auto path = write_tsv("drip_dupdom.tsv",
                                    "u1\ti1\tdA\n"
                                    "u2\ti1\tdB\n");
        CHECK_THROWS_AS(load_interactions(path.string()), DataError);
        fs::remove(path);
    }
    SECTION("empty file is an error") {
        const auto path = write_tsv("drip_empty.tsv", "");
        CHECK_THROWS_AS(load_interactions(path.string()), DataError);
        fs::remove(path);
    }
    SECTION("malformed line reports the line number") {
        const auto path = write_tsv("drip_malformed.tsv",
                                    "u1\ti1\tdA\n"
                                    "not-a-valid-line\n");
        try {
            load_interactions(path.string());
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("2") != std::string::npos);
        }
        fs::remove(path);
    }
    SECTION("optional timestamp column is ignored") {
        const auto path = write_tsv("drip_ts.tsv",
                                    "u1\ti1\tdA\t1234\n"
                                    "u1\ti2\tdB\t1235\n");
        const auto ds = load_interactions(path.string());
        CHECK(ds.interactions.size() == 2);
        fs::remove(path);
    }
    SECTION("duplicate triples are rejected") {
        const auto path = write_tsv("drip_dup.tsv",
                                    "u1\ti1\tdA\n"
                                    "u1\ti1\tdA\n");
        CHECK_THROWS_AS(load_interactions(path.string()), DataError);
        fs::remove(path);
    }
    SECTION("dense indices follow first appearance") {
        const auto path = write_tsv("drip_order.tsv",
                                    "zz\ti9\tdB\n"
                                    "aa\ti1\tdA\n");
        const auto ds = load_interactions(path.string());
        CHECK(ds.user_ids[0] == "zz");
        CHECK(ds.domain_ids[0] == "dB");
        fs::remove(path);
    }
}

TEST_CASE("filter_dataset") {
    SECTION("overlapping user keeps only domains above threshold") {
        std::vector<std::tuple<std::string, std::string, std::string>> triples;
        for (int i = 0; i < 12; ++i)
            triples.emplace_back("u1", "a" + std::to_string(i), "dA");
        for (int i = 0; i < 3; ++i)
            triples.emplace_back("u1", "b" + std::to_string(i), "dB");
        // Keep items alive: a single other heavy user per item would be
        // unrealistic, so use per-item co-users.
        for (int i = 0; i < 12; ++i)
            for (int j = 0; j < 20; ++j)
                triples.emplace_back("filler" + std::to_string(j), "a" + std::to_string(i), "dA");
        auto ds = from_triples(triples);
        const auto filtered = filter_dataset(ds, 10, 12);
        const auto u1 = filtered.user_index.at("u1");
        CHECK(filtered.G[u1][filtered.domain_index.at("dA")] == 1);
        CHECK(filtered.domain_index.count("dB") == 0);  // all dB data removed
    }
    SECTION("thresholds (1,1) keep everything") {
        auto ds = from_triples({{"u1", "i1", "dA"},
                                {"u1", "i2", "dB"},
                                {"u2", "i1", "dA"}});
        const auto filtered = filter_dataset(ds, 1, 1);
        CHECK(filtered.interactions.size() == ds.interactions.size());
        CHECK(filtered.num_users() == ds.num_users());
        CHECK(filtered.total_items() == ds.total_items());
    }
    SECTION("item below the single threshold is dropped") {
        std::vector<std::tuple<std::string, std::string, std::string>> triples;
        for (int j = 0; j < 25; ++j) {
            triples.emplace_back("u" + std::to_string(j), "common", "dA");
            triples.emplace_back("u" + std::to_string(j), "anchor", "dB");
        }
        for (int j = 0; j < 5; ++j)
            triples.emplace_back("u" + std::to_string(j), "rare", "dA");
        auto ds = from_triples(triples);
        const auto filtered = filter_dataset(ds, 1, 20);
        CHECK(filtered.item_index[filtered.domain_index.at("dA")].count("rare") == 0);
        CHECK(filtered.item_index[filtered.domain_index.at("dA")].count("common") == 1);
    }
    SECTION("iterates to a fixed point") {
        // Dropping the thin users starves item x, whose removal in turn
        // starves user A: the cascade must run until nothing changes.
        auto ds = from_triples({{"A", "x", "dA"},
                                {"A", "y", "dA"},
                                {"B", "x", "dA"},
                                {"C", "y", "dA"},
                                {"D", "y", "dA"},
                                {"D", "z", "dA"},
                                {"E", "y", "dA"},
                                {"E", "z", "dA"}});
        const auto filtered = filter_dataset(ds, 2, 2);
        const auto dA = filtered.domain_index.at("dA");
        CHECK(filtered.item_index[dA].count("x") == 0);
        CHECK(filtered.user_index.count("A") == 0);
        CHECK(filtered.user_index.count("D") == 1);
        CHECK(filtered.user_index.count("E") == 1);
        CHECK(filtered.item_index[dA].count("y") == 1);
        CHECK(filtered.item_index[dA].count("z") == 1);
        // Verify the fixed point: re-filtering changes nothing.
        const auto again = filter_dataset(filtered, 2, 2);
        CHECK(again.interactions.size() == filtered.interactions.size());
    }
    SECTION("filtering everything raises") {
        auto ds = from_triples({{"u1", "i1", "dA"}});
        CHECK_THROWS_AS(filter_dataset(ds, 10, 20), DataError);
    }
    SECTION("re-densified indices are a bijection") {
        std::vector<std::tuple<std::string, std::string, std::string>> triples;
        for (int j = 0; j < 25; ++j) {
            triples.emplace_back("u" + std::to_string(j), "keepA", "dA");
            triples.emplace_back("u" + std::to_string(j), "keepB", "dB");
        }
        triples.emplace_back("lonely", "solo", "dA");
        auto ds = from_triples(triples);
        const auto filtered = filter_dataset(ds, 1, 20);
        CHECK(filtered.user_index.size() == filtered.user_ids.size());
        for (std::uint32_t u = 0; u < filtered.num_users(); ++u)
            CHECK(filtered.user_index.at(filtered.user_ids[u]) == u);
        for (std::size_t k = 0; k < filtered.num_domains(); ++k)
            for (std::uint32_t v = 0; v < filtered.num_items(k); ++v)
                CHECK(filtered.item_index[k].at(filtered.item_ids[k][v]) == v);
    }
}

TEST_CASE("make_mdrau_split") {
    // 30 overlapping users across 3 domains plus single-domain users.
    auto make_ds = []() {
        std::vector<std::tuple<std::string, std::string, std::string>> triples;
        for (int j = 0; j < 30; ++j) {
            const std::string u = "u" + std::to_string(j);
            triples.emplace_back(u, "a" + std::to_string(j % 7), "dA");
            triples.emplace_back(u, "b" + std::to_string(j % 5), "dB");
            if (j % 2 == 0) triples.emplace_back(u, "c" + std::to_string(j % 3), "dC");
        }
        triples.emplace_back("solo", "a100", "dA");
        return from_triples(triples);
    };

    SECTION("train and held-out partition the interactions") {
        const auto ds = make_ds();
        const auto split = make_mdrau_split(ds, 0.3, 0.5, 7);
        std::size_t held = 0;
        for (const auto& per_user : split.held_out)
            for (const auto& items : per_user) held += items.size();
        CHECK(split.train.interactions.size() + held == ds.interactions.size());
        for (const auto& t : split.train.interactions)
            CHECK_FALSE(split.hidden[t.user][t.domain]);
    }
    SECTION("every val/test user keeps >=1 seen and >=1 hidden domain") {
        const auto ds = make_ds();
        const auto split = make_mdrau_split(ds, 0.4, 0.5, 3);
        std::vector<std::uint32_t> all = split.val_users;
        all.insert(all.end(), split.test_users.begin(), split.test_users.end());
        CHECK_FALSE(all.empty());
        for (auto u : all) {
            CHECK(split.train.seen_count(u) >= 1);
            CHECK(split.hidden_count(u) >= 1);
            for (std::uint32_t k = 0; k < ds.num_domains(); ++k)
                if (split.hidden[u][k]) CHECK(split.train.G[u][k] == 0);
        }
    }
    SECTION("only overlapping users are hidden") {
        const auto ds = make_ds();
        const auto split = make_mdrau_split(ds, 0.3, 0.5, 7);
        const auto solo = ds.user_index.at("solo");
        CHECK(split.hidden_count(solo) == 0);
    }
    SECTION("fixed seed reproduces the split exactly") {
        const auto ds = make_ds();
        const auto a = make_mdrau_split(ds, 0.3, 0.5, 99);
        const auto b = make_mdrau_split(ds, 0.3, 0.5, 99);
        CHECK(a.hidden == b.hidden);
        CHECK(a.val_users == b.val_users);
        CHECK(a.test_users == b.test_users);
        CHECK(a.train.interactions.size() == b.train.interactions.size());
    }
    SECTION("invalid hide_prob rejected") {
        const auto ds = make_ds();
        CHECK_THROWS_AS(make_mdrau_split(ds, 0.0, 0.5, 1), ConfigError);
        CHECK_THROWS_AS(make_mdrau_split(ds, 1.0, 0.5, 1), ConfigError);
    }
    SECTION("no overlapping users is a split error") {
        auto ds = from_triples({{"u1", "i1", "dA"}, {"u2", "i2", "dB"}});
        CHECK_THROWS_AS(make_mdrau_split(ds, 0.3, 0.5, 1), DataError);
    }
    SECTION("manifest round trip") {
        const auto ds = make_ds();
        const auto split = make_mdrau_split(ds, 0.3, 0.5, 17);
        const fs::path path = fs::temp_directory_path() / "drip_manifest.txt";
        save_split_manifest(path.string(), split, ds, 0xabc);
        const auto loaded = load_split_manifest(path.string(), ds);
        CHECK(loaded.hidden == split.hidden);
        CHECK(loaded.val_users == split.val_users);
        CHECK(loaded.test_users == split.test_users);
        CHECK(loaded.seed == split.seed);
        CHECK(loaded.train.interactions == split.train.interactions);

        // Same config, second save: byte-identical manifests.
        const fs::path path2 = fs::temp_directory_path() / "drip_manifest2.txt";
        save_split_manifest(path2.string(), make_mdrau_split(ds, 0.3, 0.5, 17), ds, 0xabc);
        std::ifstream f1(path), f2(path2);
        std::string s1((std::istreambuf_iterator<char>(f1)), {});
        std::string s2((std::istreambuf_iterator<char>(f2)), {});
        CHECK(s1 == s2);
        fs::remove(path);
        fs::remove(path2);
    }
}

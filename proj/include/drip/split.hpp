#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "drip/dataset.hpp"
#include "drip/errors.hpp"
#include "drip/rng.hpp"

namespace drip {

// Train data plus the hidden (user, domain) ground truth for MDRAU evaluation.
// The train dataset keeps the index spaces of the original dataset so encoder
// vocabularies stay aligned.
struct EvaluationSplit {
    InteractionDataset train;
    std::vector<std::vector<std::uint8_t>> hidden;                 // user x K
    std::vector<std::vector<std::vector<std::uint32_t>>> held_out; // [u][k] items
    std::vector<std::uint32_t> val_users;
    std::vector<std::uint32_t> test_users;
    std::uint64_t seed = 0;
    double hide_prob = 0.3;
    double val_fraction = 0.5;

    bool is_hidden(std::uint32_t u, std::uint32_t k) const { return hidden[u][k]; }
    std::size_t hidden_count(std::uint32_t u) const {
        std::size_t n = 0;
        for (auto h : hidden[u]) n += h;
        return n;
    }
};

namespace detail {

inline EvaluationSplit build_split(const InteractionDataset& ds,
                                   const std::vector<std::vector<std::uint8_t>>& hidden,
                                   const std::vector<std::uint32_t>& val_users,
                                   const std::vector<std::uint32_t>& test_users,
                                   std::uint64_t seed, double hide_prob,
                                   double val_fraction) {
    EvaluationSplit split;
    split.hidden = hidden;
    split.val_users = val_users;
    split.test_users = test_users;
    split.seed = seed;
    split.hide_prob = hide_prob;
    split.val_fraction = val_fraction;
    split.held_out.assign(ds.num_users(),
                          std::vector<std::vector<std::uint32_t>>(ds.num_domains()));

    // Keep the original index spaces: copy vocabularies, drop hidden triples.
    InteractionDataset& train = split.train;
    train.user_ids = ds.user_ids;
    train.user_index = ds.user_index;
    train.domain_ids = ds.domain_ids;
    train.domain_index = ds.domain_index;
    train.item_ids = ds.item_ids;
    train.item_index = ds.item_index;
    for (const auto& t : ds.interactions) {
        if (hidden[t.user][t.domain])
            split.held_out[t.user][t.domain].push_back(t.item);
        else
            train.interactions.push_back(t);
    }
    if (train.interactions.empty()) throw DataError("split removed all training data");
    train.finalize();
    for (auto& per_user : split.held_out)
        for (auto& items : per_user) std::sort(items.begin(), items.end());
    return split;
}

}  // namespace detail

// For each overlapping user, each seen domain is independently hidden with
// hide_prob; a draw hiding every seen domain is redrawn. Users with at least
// one hidden domain are partitioned into validation/test halves by the seed.
inline EvaluationSplit make_mdrau_split(const InteractionDataset& ds, double hide_prob,
                                        double val_fraction, std::uint64_t seed) {
    if (!(hide_prob > 0.0 && hide_prob < 1.0))
        throw ConfigError("hide_prob must be in (0,1)");
    if (!(val_fraction >= 0.0 && val_fraction <= 1.0))
        throw ConfigError("val_fraction must be in [0,1]");

    const std::size_t K = ds.num_domains();
    bool any_overlap = false;
    Rng rng(seed);
    std::vector<std::vector<std::uint8_t>> hidden(ds.num_users(),
                                                  std::vector<std::uint8_t>(K, 0));
    std::vector<std::uint32_t> eligible;
    for (std::uint32_t u = 0; u < ds.num_users(); ++u) {
        if (!ds.is_overlapping(u)) continue;
        any_overlap = true;
        std::vector<std::uint32_t> seen;
        for (std::uint32_t k = 0; k < K; ++k)
            if (ds.G[u][k]) seen.push_back(k);
        std::vector<std::uint8_t> draw(seen.size());
        while (true) {
            std::size_t n_hidden = 0;
            for (auto& d : draw) {
                d = rng.bernoulli(hide_prob) ? 1 : 0;
                n_hidden += d;
            }
            if (n_hidden < seen.size()) break;  // must retain a seen domain
        }
        std::size_t n_hidden = 0;
        for (std::size_t i = 0; i < seen.size(); ++i) {
            hidden[u][seen[i]] = draw[i];
            n_hidden += draw[i];
        }
        if (n_hidden > 0) eligible.push_back(u);
    }
    if (!any_overlap) throw DataError("split error: dataset has no overlapping users");
    if (eligible.empty()) throw DataError("split error: no user has hidden domains");

    rng.shuffle(eligible);
    const std::size_t n_val =
        static_cast<std::size_t>(val_fraction * static_cast<double>(eligible.size()));
    std::vector<std::uint32_t> val_users(eligible.begin(), eligible.begin() + n_val);
    std::vector<std::uint32_t> test_users(eligible.begin() + n_val, eligible.end());
    std::sort(val_users.begin(), val_users.end());
    std::sort(test_users.begin(), test_users.end());
    return detail::build_split(ds, hidden, val_users, test_users, seed, hide_prob,
                               val_fraction);
}

// ---------------------------------------------------------------------------
// Split manifest: auditable text record of the hidden pairs and partition.

inline void save_split_manifest(const std::string& path, const EvaluationSplit& split,
                                const InteractionDataset& ds,
                                std::uint64_t config_hash) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for write: " + path);
    os << "# drip split manifest v1\n";
    os << "seed=" << split.seed << "\n";
    os << "hide_prob=" << split.hide_prob << "\n";
    os << "val_fraction=" << split.val_fraction << "\n";
    os << "config_hash=" << config_hash << "\n";
    for (std::uint32_t u = 0; u < ds.num_users(); ++u)
        for (std::uint32_t k = 0; k < ds.num_domains(); ++k)
            if (split.hidden[u][k])
                os << "hidden\t" << ds.user_ids[u] << '\t' << ds.domain_ids[k] << '\n';
    for (auto u : split.val_users) os << "val\t" << ds.user_ids[u] << '\n';
    for (auto u : split.test_users) os << "test\t" << ds.user_ids[u] << '\n';
    if (!os) throw IoError("write failed: " + path);
}

inline EvaluationSplit load_split_manifest(const std::string& path,
                                           const InteractionDataset& ds) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open split manifest: " + path);
    std::vector<std::vector<std::uint8_t>> hidden(
        ds.num_users(), std::vector<std::uint8_t>(ds.num_domains(), 0));
    std::vector<std::uint32_t> val_users, test_users;
    std::uint64_t seed = 0;
    double hide_prob = 0.0, val_fraction = 0.0;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (auto eq = line.find('='); eq != std::string::npos && line.find('\t') == std::string::npos) {
            const std::string key = line.substr(0, eq);
            const std::string val = line.substr(eq + 1);
            if (key == "seed") seed = std::stoull(val);
            else if (key == "hide_prob") hide_prob = std::stod(val);
            else if (key == "val_fraction") val_fraction = std::stod(val);
            continue;
        }
        std::istringstream ls(line);
        std::string tag, user_id, domain_id;
        std::getline(ls, tag, '\t');
        std::getline(ls, user_id, '\t');
        auto user_it = ds.user_index.find(user_id);
        if (user_it == ds.user_index.end())
            throw ParseError("manifest line " + std::to_string(lineno) +
                             ": unknown user " + user_id);
        if (tag == "hidden") {
            std::getline(ls, domain_id, '\t');
            auto dom_it = ds.domain_index.find(domain_id);
            if (dom_it == ds.domain_index.end())
                throw ParseError("manifest line " + std::to_string(lineno) +
                                 ": unknown domain " + domain_id);
            hidden[user_it->second][dom_it->second] = 1;
        } else if (tag == "val") {
            val_users.push_back(user_it->second);
        } else if (tag == "test") {
            test_users.push_back(user_it->second);
        } else {
            throw ParseError("manifest line " + std::to_string(lineno) +
                             ": unknown tag " + tag);
        }
    }
    if (val_users.empty() && test_users.empty())
        throw ParseError("manifest lists no evaluation users: " + path);
    return detail::build_split(ds, hidden, val_users, test_users, seed, hide_prob,
                               val_fraction);
}

}  // namespace drip

#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "drip/errors.hpp"

namespace drip {

struct Interaction {
    std::uint32_t user;
    std::uint32_t domain;
    std::uint32_t item;  // dense index within the item's domain

    bool operator==(const Interaction&) const = default;
    bool operator<(const Interaction& o) const {
        return std::tie(user, domain, item) < std::tie(o.user, o.domain, o.item);
    }
};

// Users, per-domain item vocabularies, and the sparse interaction matrix R,
// plus the derived user-domain matrix G and per-user totals N_u.
// Items of different domains are disjoint; dense indices are assigned in
// first-appearance order.
struct InteractionDataset {
    std::vector<std::string> user_ids;
    std::map<std::string, std::uint32_t> user_index;
    std::vector<std::string> domain_ids;
    std::map<std::string, std::uint32_t> domain_index;
    std::vector<std::vector<std::string>> item_ids;  // [domain][dense item]
    std::vector<std::map<std::string, std::uint32_t>> item_index;

    std::vector<Interaction> interactions;

    // Derived by finalize().
    std::vector<std::vector<std::uint8_t>> G;                       // user x K
    std::vector<std::size_t> user_counts;                           // N_u
    std::vector<std::vector<std::vector<std::uint32_t>>> by_user;   // [u][k] items

    std::size_t num_domains() const { return domain_ids.size(); }
    std::size_t num_users() const { return user_ids.size(); }
    std::size_t num_items(std::size_t k) const { return item_ids[k].size(); }
    std::size_t total_items() const {
        std::size_t n = 0;
        for (auto& v : item_ids) n += v.size();
        return n;
    }

    std::uint32_t intern_user(const std::string& id) {
        auto it = user_index.find(id);
        if (it != user_index.end()) return it->second;
        const auto idx = static_cast<std::uint32_t>(user_ids.size());
        user_ids.push_back(id);
        user_index.emplace(id, idx);
        return idx;
    }
    std::uint32_t intern_domain(const std::string& id) {
        auto it = domain_index.find(id);
        if (it != domain_index.end()) return it->second;
        const auto idx = static_cast<std::uint32_t>(domain_ids.size());
        domain_ids.push_back(id);
        domain_index.emplace(id, idx);
        item_ids.emplace_back();
        item_index.emplace_back();
        return idx;
    }
    std::uint32_t intern_item(std::uint32_t domain, const std::string& id) {
        auto& idx_map = item_index[domain];
        auto it = idx_map.find(id);
        if (it != idx_map.end()) return it->second;
        const auto idx = static_cast<std::uint32_t>(item_ids[domain].size());
        item_ids[domain].push_back(id);
        idx_map.emplace(id, idx);
        return idx;
    }

    std::size_t seen_count(std::uint32_t u) const {
        std::size_t n = 0;
        for (auto g : G[u]) n += g;
        return n;
    }
    bool is_overlapping(std::uint32_t u) const { return seen_count(u) >= 2; }

    // Rebuilds G, N_u and the per-user adjacency from the triple list.
    void finalize() {
        const std::size_t K = num_domains();
        G.assign(num_users(), std::vector<std::uint8_t>(K, 0));
        user_counts.assign(num_users(), 0);
        by_user.assign(num_users(), std::vector<std::vector<std::uint32_t>>(K));
        std::set<Interaction> seen;
        for (const auto& t : interactions) {
            if (!seen.insert(t).second)
                throw DataError("duplicate interaction triple for user " +
                                user_ids[t.user]);
            G[t.user][t.domain] = 1;
            ++user_counts[t.user];
            by_user[t.user][t.domain].push_back(t.item);
        }
        for (auto& per_user : by_user)
            for (auto& items : per_user) std::sort(items.begin(), items.end());
    }
};

// Each line: user_id<TAB>item_id<TAB>domain_id, with an optional (ignored)
// timestamp column. Item ids must not repeat across domains.
inline InteractionDataset load_interactions(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open interactions file: " + path);
    InteractionDataset ds;
    std::map<std::string, std::uint32_t> item_domain;  // disjointness check
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string user_id, item_id, domain_id;
        if (!std::getline(ls, user_id, '\t') || !std::getline(ls, item_id, '\t') ||
            !std::getline(ls, domain_id, '\t') || user_id.empty() || item_id.empty() ||
            domain_id.empty()) {
            throw ParseError("malformed line " + std::to_string(lineno) + " in " + path);
        }
        const std::uint32_t u = ds.intern_user(user_id);
        const std::uint32_t k = ds.intern_domain(domain_id);
        auto [it, inserted] = item_domain.emplace(item_id, k);
        if (!inserted && it->second != k)
            throw DataError("item '" + item_id + "' appears in two domains (line " +
                            std::to_string(lineno) + ")");
        const std::uint32_t v = ds.intern_item(k, item_id);
        ds.interactions.push_back({u, k, v});
    }
    if (ds.interactions.empty()) throw DataError("empty dataset: " + path);
    ds.finalize();
    return ds;
}

inline void save_interactions(const std::string& path, const InteractionDataset& ds) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for write: " + path);
    for (const auto& t : ds.interactions) {
        os << ds.user_ids[t.user] << '\t' << ds.item_ids[t.domain][t.item] << '\t'
           << ds.domain_ids[t.domain] << '\n';
    }
    if (!os) throw IoError("write failed: " + path);
}

// Rebuilds a dataset keeping only the given triples; index spaces are
// re-densified in the order triples appear.
inline InteractionDataset rebuild(const InteractionDataset& src,
                                  const std::vector<Interaction>& keep) {
    InteractionDataset out;
    for (const auto& t : keep) {
        const std::uint32_t u = out.intern_user(src.user_ids[t.user]);
        const std::uint32_t k = out.intern_domain(src.domain_ids[t.domain]);
        const std::uint32_t v = out.intern_item(k, src.item_ids[t.domain][t.item]);
        out.interactions.push_back({u, k, v});
    }
    if (out.interactions.empty()) throw DataError("all data filtered away");
    out.finalize();
    return out;
}

// Threshold filtering per the evaluation protocol, iterated to a fixed point:
//  - users seen in >= 2 domains keep only domains with >= min_inter_overlap
//    interactions;
//  - single-domain users with < min_inter_single interactions are dropped;
//  - items with < min_inter_single interactions are dropped.
inline InteractionDataset filter_dataset(const InteractionDataset& input,
                                         std::size_t min_inter_overlap,
                                         std::size_t min_inter_single) {
    if (min_inter_overlap < 1 || min_inter_single < 1)
        throw ConfigError("filter thresholds must be >= 1");
    std::vector<Interaction> triples = input.interactions;
    const std::size_t K = input.num_domains();
    bool changed = true;
    while (changed) {
        changed = false;
        // (user, domain) counts and per-item counts over surviving triples.
        std::map<std::pair<std::uint32_t, std::uint32_t>, std::size_t> ud_count;
        std::map<std::pair<std::uint32_t, std::uint32_t>, std::size_t> item_count;
        std::vector<std::set<std::uint32_t>> user_domains(input.num_users());
        for (const auto& t : triples) {
            ++ud_count[{t.user, t.domain}];
            ++item_count[{t.domain, t.item}];
            user_domains[t.user].insert(t.domain);
        }
        std::vector<Interaction> kept;
        kept.reserve(triples.size());
        for (const auto& t : triples) {
            const std::size_t n_ud = ud_count[{t.user, t.domain}];
            const std::size_t n_domains = user_domains[t.user].size();
            bool keep = true;
            if (n_domains >= 2) {
                if (n_ud < min_inter_overlap) keep = false;
            } else {
                if (n_ud < min_inter_single) keep = false;
            }
            if (item_count[{t.domain, t.item}] < min_inter_single) keep = false;
            if (keep) kept.push_back(t);
        }
        if (kept.size() != triples.size()) changed = true;
        triples.swap(kept);
        if (triples.empty()) throw DataError("all data filtered away");
        (void)K;
    }
    return rebuild(input, triples);
}

}  // namespace drip

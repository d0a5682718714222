#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "drip/errors.hpp"
#include "drip/metrics.hpp"

namespace drip {

// Machine-readable key=value metric records. Doubles are printed with full
// precision so identical runs produce byte-identical files.
struct MetricRecord {
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    std::map<std::string, double> metrics;

    bool operator==(const MetricRecord&) const = default;
};

inline std::string format_full(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline MetricRecord record_from_report(const MetricsReport& rep, std::uint64_t config_hash,
                                       std::uint64_t seed) {
    MetricRecord rec;
    rec.config_hash = config_hash;
    rec.seed = seed;
    const std::string prefix =
        rep.target_domain >= 0 ? "st.d" + std::to_string(rep.target_domain) + "." : "mt.";
    for (auto c : rep.cutoffs) {
        rec.metrics[prefix + "recall@" + std::to_string(c)] = rep.recall.at(c);
        rec.metrics[prefix + "ndcg@" + std::to_string(c)] = rep.ndcg.at(c);
        if (rep.kld.count(c)) rec.metrics[prefix + "kld@" + std::to_string(c)] = rep.kld.at(c);
    }
    rec.metrics[prefix + "users"] = static_cast<double>(rep.user_count);
    return rec;
}

inline void save_record(const std::string& path, const MetricRecord& rec) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for write: " + path);
    os << "config_hash=" << rec.config_hash << "\n";
    os << "seed=" << rec.seed << "\n";
    for (const auto& [k, v] : rec.metrics) os << k << "=" << format_full(v) << "\n";
    if (!os) throw IoError("write failed: " + path);
}

inline MetricRecord load_record(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open record: " + path);
    MetricRecord rec;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("bad record line: " + line);
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        if (key == "config_hash") rec.config_hash = std::stoull(val);
        else if (key == "seed") rec.seed = std::stoull(val);
        else rec.metrics[key] = std::stod(val);
    }
    return rec;
}

// Human-readable table for one report.
inline std::string render_table(const MetricsReport& rep, const std::string& title) {
    std::ostringstream os;
    os << "== " << title << " (" << rep.user_count << " users) ==\n";
    os << "cutoff\trecall\tndcg";
    if (!rep.kld.empty()) os << "\tkld";
    os << "\n";
    for (auto c : rep.cutoffs) {
        os << c << '\t' << format_full(rep.recall.at(c)) << '\t'
           << format_full(rep.ndcg.at(c));
        if (rep.kld.count(c)) os << '\t' << format_full(rep.kld.at(c));
        os << "\n";
    }
    return os.str();
}

// Plot-ready two-column sweep table, rows sorted by the axis value.
inline void save_sweep_table(const std::string& path, const std::string& axis_name,
                             const std::string& metric_name,
                             std::vector<std::pair<double, double>> points) {
    std::sort(points.begin(), points.end());
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for write: " + path);
    os << "# " << axis_name << "\t" << metric_name << "\n";
    for (const auto& [axis, value] : points)
        os << format_full(axis) << '\t' << format_full(value) << '\n';
    if (!os) throw IoError("write failed: " + path);
}

}  // namespace drip

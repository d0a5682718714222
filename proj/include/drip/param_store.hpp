#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "drip/errors.hpp"
#include "drip/matrix.hpp"

namespace drip {

struct Param {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<double> value;
    std::vector<double> grad;

    std::size_t size() const { return value.size(); }

    // Row-major 2-D view helpers.
    std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }
    double* row(std::size_t i) { return value.data() + i * cols(); }
    const double* row(std::size_t i) const { return value.data() + i * cols(); }
    double* grad_row(std::size_t i) { return grad.data() + i * cols(); }
};

// Named parameter tensors with paired gradients, in registration order.
class ParamStore {
public:
    Param& add(const std::string& name, std::vector<std::size_t> shape) {
        if (by_name_.count(name)) throw DripError("duplicate parameter: " + name);
        std::size_t n = 1;
        for (auto s : shape) n *= s;
        auto p = std::make_unique<Param>();
        p->name = name;
        p->shape = std::move(shape);
        p->value.assign(n, 0.0);
        p->grad.assign(n, 0.0);
        Param& ref = *p;
        by_name_[name] = p.get();
        params_.push_back(std::move(p));
        return ref;
    }

    Param& get(const std::string& name) {
        auto it = by_name_.find(name);
        if (it == by_name_.end()) throw DripError("unknown parameter: " + name);
        return *it->second;
    }
    const Param& get(const std::string& name) const {
        auto it = by_name_.find(name);
        if (it == by_name_.end()) throw DripError("unknown parameter: " + name);
        return *it->second;
    }
    bool has(const std::string& name) const { return by_name_.count(name) != 0; }

    std::vector<Param*> params() {
        std::vector<Param*> out;
        out.reserve(params_.size());
        for (auto& p : params_) out.push_back(p.get());
        return out;
    }
    std::size_t count() const { return params_.size(); }

    void zero_grads() {
        for (auto& p : params_) std::fill(p->grad.begin(), p->grad.end(), 0.0);
    }

    std::vector<std::vector<double>> snapshot_values() const {
        std::vector<std::vector<double>> out;
        out.reserve(params_.size());
        for (auto& p : params_) out.push_back(p->value);
        return out;
    }
    void restore_values(const std::vector<std::vector<double>>& snap) {
        if (snap.size() != params_.size()) throw DripError("snapshot size mismatch");
        for (std::size_t i = 0; i < snap.size(); ++i) params_[i]->value = snap[i];
    }

private:
    std::vector<std::unique_ptr<Param>> params_;
    std::map<std::string, Param*> by_name_;
};

// ---------------------------------------------------------------------------
// Checkpoint format: magic, version, config hash, seed, domain index
// (0xFFFFFFFF when not a per-domain file), then (name, shape, values) records.

constexpr char kCheckpointMagic[8] = {'D', 'R', 'I', 'P', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr std::uint32_t kNoDomain = 0xFFFFFFFFu;

struct CheckpointHeader {
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    std::uint32_t domain = kNoDomain;
};

namespace detail {
template <class T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
void read_pod(std::istream& is, T& v) {
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw IoError("checkpoint: truncated file");
}
}  // namespace detail

inline void save_checkpoint(const std::string& path, const ParamStore& store,
                            const CheckpointHeader& hdr) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path);
    os.write(kCheckpointMagic, 8);
    detail::write_pod(os, kCheckpointVersion);
    detail::write_pod(os, hdr.config_hash);
    detail::write_pod(os, hdr.seed);
    detail::write_pod(os, hdr.domain);
    auto& mut = const_cast<ParamStore&>(store);
    const std::uint32_t count = static_cast<std::uint32_t>(mut.count());
    detail::write_pod(os, count);
    for (Param* p : mut.params()) {
        const std::uint32_t nlen = static_cast<std::uint32_t>(p->name.size());
        detail::write_pod(os, nlen);
        os.write(p->name.data(), nlen);
        const std::uint32_t ndim = static_cast<std::uint32_t>(p->shape.size());
        detail::write_pod(os, ndim);
        for (auto s : p->shape) detail::write_pod(os, static_cast<std::uint64_t>(s));
        os.write(reinterpret_cast<const char*>(p->value.data()),
                 static_cast<std::streamsize>(p->value.size() * sizeof(double)));
    }
    if (!os) throw IoError("write failed: " + path);
}

// Loads into an existing store when shapes match, or populates an empty one.
inline CheckpointHeader load_checkpoint(const std::string& path, ParamStore& store) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw IoError("bad checkpoint magic: " + path);
    std::uint32_t version;
    detail::read_pod(is, version);
    if (version != kCheckpointVersion) throw IoError("unsupported checkpoint version");
    CheckpointHeader hdr;
    detail::read_pod(is, hdr.config_hash);
    detail::read_pod(is, hdr.seed);
    detail::read_pod(is, hdr.domain);
    std::uint32_t count;
    detail::read_pod(is, count);
    const bool empty = store.count() == 0;
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint32_t nlen;
        detail::read_pod(is, nlen);
        std::string name(nlen, '\0');
        is.read(name.data(), nlen);
        std::uint32_t ndim;
        detail::read_pod(is, ndim);
        std::vector<std::size_t> shape(ndim);
        for (auto& s : shape) {
            std::uint64_t v;
            detail::read_pod(is, v);
            s = static_cast<std::size_t>(v);
        }
        Param& p = empty ? store.add(name, shape) : store.get(name);
        if (p.shape != shape) throw IoError("checkpoint shape mismatch for " + name);
        is.read(reinterpret_cast<char*>(p.value.data()),
                static_cast<std::streamsize>(p.value.size() * sizeof(double)));
        if (!is) throw IoError("checkpoint: truncated values for " + name);
    }
    return hdr;
}

}  // namespace drip

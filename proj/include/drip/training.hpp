#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "drip/adam.hpp"
#include "drip/dataset.hpp"
#include "drip/domain_encoder.hpp"
#include "drip/drip_model.hpp"
#include "drip/errors.hpp"
#include "drip/masking.hpp"
#include "drip/metrics.hpp"
#include "drip/split.hpp"

namespace drip {

struct TrainConfig {
    double rho = 0.3;
    double lr = 0.001;
    double weight_decay = 0.0;
    std::size_t batch_size = 64;
    std::size_t epochs = 50;
    std::size_t layers = 1;
    std::size_t heads = 1;
    std::size_t width = 64;
    double dropout = 0.1;
    std::uint64_t seed = 1;
    MaskSchedule schedule;
    std::size_t val_every = 1;
    std::size_t val_cutoff = 20;
};

struct BatchUser {
    std::uint32_t user;
    MaskPlan plan;
};

// Negative log-likelihood of the interactions in masked seen domains,
// averaged over contributing (u, k, v) triples: each triple contributes
// -[log p(v|u,d_k) + log p(d_k|u)]. Gradients are accumulated into the model
// store; the frozen encoder tables receive none. Returns nullopt when the
// batch contributes no masked interaction.
inline std::optional<double> compute_loss(
    DripModel& model, const InteractionDataset& train,
    const std::vector<const DomainEncoderParams*>& encoders,
    const std::vector<BatchUser>& batch, bool train_mode = false,
    Rng* dropout_rng = nullptr) {
    const std::size_t K = model.cfg.num_domains;
    const std::size_t d = model.cfg.embed_dim;

    std::size_t total_triples = 0;
    for (const auto& bu : batch)
        for (std::size_t k = 0; k < K; ++k)
            if (bu.plan.masked[k]) total_triples += train.by_user[bu.user][k].size();
    if (total_triples == 0) return std::nullopt;
    const double inv_total = 1.0 / static_cast<double>(total_triples);

    double loss = 0.0;
    for (const auto& bu : batch) {
        const std::uint32_t u = bu.user;
        const InputSources src =
            model.sources_for(train.G[u], encoders, u, &bu.plan.masked);
        const Matrix h0 = model.build_input(src);
        const EncoderCache cache = model.forward(h0, train_mode, dropout_rng);
        const Matrix& hL = cache.final_output();

        const Vector dom_logits = model.domain_logits(hL.row(0));
        const double dom_lse = log_sum_exp(dom_logits.data(), K);
        const Vector p_dom = softmax(dom_logits);

        Matrix dhL(model.cfg.seq_len(), model.cfg.width);
        Vector dz_dom(K, 0.0);
        bool any = false;
        for (std::uint32_t k = 0; k < K; ++k) {
            if (!bu.plan.masked[k]) continue;
            const auto& items = train.by_user[u][k];
            if (items.empty()) continue;
            any = true;
            const double n_k = static_cast<double>(items.size());

            const Vector z = model.item_projection(k, hL.row(k + 1));
            const Param& table = encoders[k]->item_table();
            const std::size_t n_items = table.rows();
            Vector logits(n_items);
            for (std::size_t v = 0; v < n_items; ++v)
                logits[v] = dot(z.data(), table.row(v), d);
            const double lse = log_sum_exp(logits.data(), n_items);

            for (auto v : items) loss -= (logits[v] - lse) + (dom_logits[k] - dom_lse);

            // d loss / d item logits = (n_k * softmax - counts) / total.
            Vector dlogits(n_items);
            double mx = logits[0];
            for (std::size_t v = 1; v < n_items; ++v) mx = std::max(mx, logits[v]);
            double esum = 0.0;
            for (std::size_t v = 0; v < n_items; ++v) {
                dlogits[v] = std::exp(logits[v] - mx);
                esum += dlogits[v];
            }
            for (std::size_t v = 0; v < n_items; ++v)
                dlogits[v] = n_k * dlogits[v] / esum * inv_total;
            for (auto v : items) dlogits[v] -= inv_total;

            Vector dz(d, 0.0);
            for (std::size_t v = 0; v < n_items; ++v) {
                const double g = dlogits[v];
                if (g == 0.0) continue;
                const double* row = table.row(v);
                for (std::size_t i = 0; i < d; ++i) dz[i] += g * row[i];
            }
            model.item_projection_backward(k, hL.row(k + 1), dz, dhL.row(k + 1));

            for (std::uint32_t j = 0; j < K; ++j)
                dz_dom[j] += n_k * (p_dom[j] - (j == k ? 1.0 : 0.0)) * inv_total;
        }
        if (!any) continue;
        model.domain_head_backward(hL.row(0), dz_dom, dhL.row(0));

        Matrix dh0;
        model.backward(cache, dhL, dh0);
        model.backward_input(src, dh0);
    }
    return loss * inv_total;
}

struct EpochLog {
    std::size_t epoch;
    double epsilon;
    double train_loss;
    double val_recall;  // NaN on epochs without validation
};

struct TrainResult {
    std::vector<EpochLog> log;
    double best_val_recall = -1.0;
    std::size_t best_epoch = 0;
    bool diverged = false;
};

// Masked-domain training loop: per epoch, compute the schedule value, draw
// per-user masks (adaptive draws use a detached inference-style forward for
// the current domain preferences), optimize the masked likelihood with Adam,
// and keep the checkpoint with the best validation MT recall.
inline TrainResult train_drip(DripModel& model, const InteractionDataset& train,
                              const EvaluationSplit& split,
                              const std::vector<const DomainEncoderParams*>& encoders,
                              const TrainConfig& cfg) {
    Rng rng(cfg.seed);
    AdamState adam(model.store, cfg.lr, cfg.weight_decay);
    TrainResult result;

    std::vector<std::uint32_t> eligible;
    for (std::uint32_t u = 0; u < train.num_users(); ++u)
        if (train.is_overlapping(u)) eligible.push_back(u);
    if (eligible.empty()) throw DataError("train_drip: no user has >= 2 seen domains");

    auto validation_recall = [&]() -> double {
        if (split.val_users.empty()) return 0.0;
        DripRecommender rec(model, encoders, train);
        EvalOptions opt;
        opt.cutoffs = {cfg.val_cutoff};
        const MetricsReport rep = evaluate_mt(rec, split, split.val_users, opt);
        return rep.recall.at(cfg.val_cutoff);
    };

    std::vector<std::vector<double>> best_snapshot = model.store.snapshot_values();
    std::vector<std::vector<double>> last_good = best_snapshot;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double eps = cfg.schedule.epsilon(epoch);
        rng.shuffle(eligible);
        double loss_sum = 0.0;
        std::size_t loss_batches = 0;

        for (std::size_t start = 0; start < eligible.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(start + cfg.batch_size, eligible.size());
            std::vector<BatchUser> batch;
            batch.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) {
                const std::uint32_t u = eligible[i];
                Vector prefs(model.cfg.num_domains,
                             1.0 / static_cast<double>(model.cfg.num_domains));
                if (eps < 1.0) {
                    // Detached forward; mask sampling takes no gradient.
                    const InputSources src = model.sources_for(train.G[u], encoders, u);
                    const EncoderCache cache = model.forward(model.build_input(src));
                    prefs = model.domain_preference(cache.final_output().row(0));
                }
                auto plan = sample_mask(train.G[u], prefs, cfg.rho, eps, rng);
                if (plan) batch.push_back({u, std::move(*plan)});
            }
            if (batch.empty()) continue;
            model.store.zero_grads();
            const auto loss =
                compute_loss(model, train, encoders, batch, /*train_mode=*/true, &rng);
            if (!loss) continue;  // batch contributed no masked interaction
            if (!std::isfinite(*loss)) {
                model.store.restore_values(last_good);
                result.diverged = true;
                return result;
            }
            adam.step(model.store);
            loss_sum += *loss;
            ++loss_batches;
        }
        last_good = model.store.snapshot_values();

        double val = std::nan("");
        if (cfg.val_every > 0 &&
            (epoch % cfg.val_every == 0 || epoch + 1 == cfg.epochs)) {
            val = validation_recall();
            if (val > result.best_val_recall) {
                result.best_val_recall = val;
                result.best_epoch = epoch;
                best_snapshot = model.store.snapshot_values();
            }
        }
        result.log.push_back(
            {epoch, eps, loss_batches ? loss_sum / loss_batches : std::nan(""), val});
    }
    model.store.restore_values(best_snapshot);
    return result;
}

inline void save_training_log(const std::string& path, const TrainResult& result) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for write: " + path);
    os << "# epoch\tepsilon\ttrain_loss\tval_recall\n";
    char buf[128];
    for (const auto& e : result.log) {
        std::snprintf(buf, sizeof(buf), "%zu\t%.17g\t%.17g\t%.17g\n", e.epoch, e.epsilon,
                      e.train_loss, e.val_recall);
        os << buf;
    }
    if (!os) throw IoError("write failed: " + path);
}

}  // namespace drip

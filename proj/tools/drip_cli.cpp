// drip command-line driver: synthetic data generation, splitting, encoder and
// model training, evaluation, ablations and hyperparameter sweeps.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "drip/drip.hpp"

namespace fs = std::filesystem;
using namespace drip;

namespace {

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> overrides;  // key=value
    std::string out_flag;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("-c,--config", opts.config_path, "flat key=value config file");
    cmd->add_option("--set", opts.overrides, "override a config key (key=value)")
        ->expected(-1);
    cmd->add_option("-o,--out", opts.out_flag, "output directory");
}

Config build_config(const CommonOpts& opts) {
    Config cfg;
    if (!opts.config_path.empty()) cfg = Config::from_file(opts.config_path);
    for (const auto& kv : opts.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--set expects key=value, got: " + kv);
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!opts.out_flag.empty()) cfg.set("out", opts.out_flag);
    return cfg;
}

// Output directory: DRIP_OUT env var wins, then the config/flag, then cwd.
fs::path out_dir(const Config& cfg) {
    fs::path dir;
    if (const char* env = std::getenv("DRIP_OUT"))
        dir = env;
    else
        dir = cfg.get_string("out", ".");
    fs::create_directories(dir);
    return dir;
}

std::uint64_t require_seed(const Config& cfg) {
    if (!cfg.has("seed")) throw ConfigError("missing config key: seed");
    return cfg.get_u64("seed", 0);
}

std::vector<std::size_t> cutoffs_from(const Config& cfg) {
    std::vector<std::size_t> out;
    if (cfg.has("cutoffs")) {
        for (double v : cfg.get_doubles("cutoffs"))
            out.push_back(static_cast<std::size_t>(v));
    } else {
        out = {20, 50};
    }
    return out;
}

InteractionDataset load_dataset(const Config& cfg, const fs::path& dir) {
    const std::string path =
        cfg.get_string("interactions", (dir / "interactions.tsv").string());
    InteractionDataset ds = load_interactions(path);
    const auto min_overlap = static_cast<std::size_t>(cfg.get_int("min_inter_overlap", 1));
    const auto min_single = static_cast<std::size_t>(cfg.get_int("min_inter_single", 1));
    if (min_overlap > 1 || min_single > 1)
        ds = filter_dataset(ds, min_overlap, min_single);
    return ds;
}

EvaluationSplit load_split(const Config& cfg, const fs::path& dir,
                           const InteractionDataset& ds) {
    const std::string path = cfg.get_string("split", (dir / "split.txt").string());
    return load_split_manifest(path, ds);
}

std::vector<DomainEncoderParams> load_encoders(const fs::path& dir,
                                               const InteractionDataset& train) {
    std::vector<DomainEncoderParams> encs;
    for (std::uint32_t k = 0; k < train.num_domains(); ++k) {
        const fs::path path = dir / ("encoder_" + std::to_string(k) + ".bin");
        encs.push_back(load_encoder(path.string(), train));
    }
    return encs;
}

std::vector<const DomainEncoderParams*> encoder_ptrs(
    const std::vector<DomainEncoderParams>& encs) {
    std::vector<const DomainEncoderParams*> out;
    for (const auto& e : encs) out.push_back(&e);
    return out;
}

DripConfig model_config(const Config& cfg, std::size_t num_domains, std::size_t dim) {
    DripConfig mc;
    mc.num_domains = num_domains;
    mc.embed_dim = dim;
    mc.width = static_cast<std::size_t>(cfg.get_int("width", 64));
    mc.layers = static_cast<std::size_t>(cfg.get_int("layers", 1));
    mc.heads = static_cast<std::size_t>(cfg.get_int("heads", 1));
    mc.dropout = cfg.get_double("dropout", 0.1);
    return mc;
}

TrainConfig train_config(const Config& cfg) {
    TrainConfig tc;
    tc.rho = cfg.get_double("rho", 0.3);
    tc.lr = cfg.get_double("lr", 0.001);
    tc.weight_decay = cfg.get_double("weight_decay", 0.0);
    tc.batch_size = static_cast<std::size_t>(cfg.get_int("batch_size", 64));
    tc.epochs = static_cast<std::size_t>(cfg.get_int("epochs", 50));
    tc.layers = static_cast<std::size_t>(cfg.get_int("layers", 1));
    tc.heads = static_cast<std::size_t>(cfg.get_int("heads", 1));
    tc.width = static_cast<std::size_t>(cfg.get_int("width", 64));
    tc.dropout = cfg.get_double("dropout", 0.1);
    tc.seed = require_seed(cfg);
    tc.schedule.floor = cfg.get_double("schedule_floor", 0.5);
    tc.schedule.slope = cfg.get_double("schedule_slope", 0.002);
    tc.val_every = static_cast<std::size_t>(cfg.get_int("val_every", 1));
    tc.val_cutoff = static_cast<std::size_t>(cfg.get_int("val_cutoff", 20));
    return tc;
}

BprConfig bpr_config(const Config& cfg) {
    BprConfig bc;
    bc.dim = static_cast<std::size_t>(cfg.get_int("encoder_dim", 64));
    bc.epochs = static_cast<std::size_t>(cfg.get_int("encoder_epochs", 100));
    bc.lr = cfg.get_double("encoder_lr", 0.01);
    bc.l2 = cfg.get_double("encoder_l2", 1e-5);
    bc.negatives_per_positive =
        static_cast<std::size_t>(cfg.get_int("encoder_negatives", 1));
    bc.batch_size = static_cast<std::size_t>(cfg.get_int("encoder_batch", 128));
    bc.seed = require_seed(cfg);
    return bc;
}

// ---------------------------------------------------------------------------
// Subcommand bodies. Each throws on failure; main maps exceptions to codes.

void cmd_gen_synthetic(const Config& cfg) {
    const fs::path dir = out_dir(cfg);
    SyntheticConfig sc;
    sc.num_domains = static_cast<std::size_t>(cfg.get_int("domains", 4));
    sc.num_archetypes = static_cast<std::size_t>(cfg.get_int("archetypes", 4));
    sc.users_per_archetype =
        static_cast<std::size_t>(cfg.get_int("users_per_archetype", 500));
    sc.items_per_domain = static_cast<std::size_t>(cfg.get_int("items_per_domain", 400));
    sc.clusters_per_domain =
        static_cast<std::size_t>(cfg.get_int("clusters_per_domain", 4));
    sc.cluster_correlation = cfg.get_double("cluster_correlation", 0.8);
    sc.interactions_per_user =
        static_cast<std::size_t>(cfg.get_int("interactions_per_user", 30));
    sc.seed = require_seed(cfg);
    sc.archetype_prefs = SyntheticConfig::default_prefs(
        sc.num_archetypes, sc.num_domains, cfg.get_double("pref_peak", 0.55));
    const SyntheticOutput out = generate_synthetic(sc);
    save_interactions((dir / "interactions.tsv").string(), out.dataset);
    save_domain_prefs((dir / "domain_prefs.tsv").string(), out);
    std::printf("generated %zu interactions (%zu users, %zu domains) -> %s\n",
                out.dataset.interactions.size(), out.dataset.num_users(),
                out.dataset.num_domains(), (dir / "interactions.tsv").c_str());
}

void cmd_split(const Config& cfg) {
    const fs::path dir = out_dir(cfg);
    const InteractionDataset ds = load_dataset(cfg, dir);
    const double hide_prob = cfg.get_double("hide_prob", 0.3);
    const double val_fraction = cfg.get_double("val_fraction", 0.5);
    const EvaluationSplit split =
        make_mdrau_split(ds, hide_prob, val_fraction, require_seed(cfg));
    save_split_manifest((dir / "split.txt").string(), split, ds, cfg.hash());
    std::printf("split: %zu val users, %zu test users -> %s\n", split.val_users.size(),
                split.test_users.size(), (dir / "split.txt").c_str());
}

void cmd_train_encoders(const Config& cfg) {
    const fs::path dir = out_dir(cfg);
    const InteractionDataset ds = load_dataset(cfg, dir);
    const EvaluationSplit split = load_split(cfg, dir, ds);
    const BprConfig bc = bpr_config(cfg);
    for (std::uint32_t k = 0; k < ds.num_domains(); ++k) {
        BprConfig per = bc;
        per.seed = bc.seed + k;  // independent streams per domain
        const DomainEncoderParams enc = train_bpr(split.train, k, per);
        const fs::path path = dir / ("encoder_" + std::to_string(k) + ".bin");
        save_encoder(path.string(), enc, cfg.hash(), per.seed);
        std::printf("encoder %u (%s): %zu users, %zu items -> %s\n", k,
                    ds.domain_ids[k].c_str(), enc.users.size(),
                    enc.item_table().rows(), path.c_str());
    }
}

void cmd_train_drip(const Config& cfg, const std::string& variant_name) {
    const VariantKind variant = parse_variant(variant_name);
    if (variant != VariantKind::Drip && variant != VariantKind::NoAdaptiveMask)
        throw ConfigError("train-drip supports --variant drip|no_adaptive_mask");
    const fs::path dir = out_dir(cfg);
    const InteractionDataset ds = load_dataset(cfg, dir);
    const EvaluationSplit split = load_split(cfg, dir, ds);
    const auto encs = load_encoders(dir, split.train);
    const auto encoders = encoder_ptrs(encs);

    TrainConfig tc = train_config(cfg);
    if (variant == VariantKind::NoAdaptiveMask) tc.schedule.adaptive = false;
    DripModel model(model_config(cfg, ds.num_domains(), encs[0].dim), tc.seed);
    const TrainResult result = train_drip(model, split.train, split, encoders, tc);

    CheckpointHeader hdr;
    hdr.config_hash = cfg.hash();
    hdr.seed = tc.seed;
    save_checkpoint((dir / "drip.bin").string(), model.store, hdr);
    save_training_log((dir / "train_log.tsv").string(), result);
    if (result.diverged) throw NumericalFault("training diverged; checkpoint rolled back");
    std::printf("trained %zu epochs, best val recall %.6f (epoch %zu) -> %s\n",
                result.log.size(), result.best_val_recall, result.best_epoch,
                (dir / "drip.bin").c_str());
}

void emit_metrics(const fs::path& dir, const std::string& tag, const MetricsReport& rep,
                  std::uint64_t config_hash, std::uint64_t seed) {
    const MetricRecord rec = record_from_report(rep, config_hash, seed);
    save_record((dir / ("metrics_" + tag + ".txt")).string(), rec);
    std::fputs(render_table(rep, tag).c_str(), stdout);
}

void cmd_evaluate(const Config& cfg, const std::string& variant_name, bool with_st) {
    const VariantKind variant = parse_variant(variant_name);
    const fs::path dir = out_dir(cfg);
    const InteractionDataset ds = load_dataset(cfg, dir);
    const EvaluationSplit split = load_split(cfg, dir, ds);
    const auto encs = load_encoders(dir, split.train);
    const auto encoders = encoder_ptrs(encs);

    DripModel model(model_config(cfg, ds.num_domains(), encs[0].dim));
    const CheckpointHeader hdr = load_checkpoint((dir / "drip.bin").string(), model.store);

    DomainFactor factor = DomainFactor::Learned;
    if (variant == VariantKind::FixedUniform) factor = DomainFactor::Uniform;
    else if (variant == VariantKind::FixedActiveness) factor = DomainFactor::Activeness;
    else if (variant != VariantKind::Drip && variant != VariantKind::NoAdaptiveMask)
        throw ConfigError("evaluate supports the checkpoint-backed variants only; "
                          "use `ablate` for " + variant_name);

    DripRecommender rec(model, encoders, split.train, factor);
    EvalOptions opt;
    opt.cutoffs = cutoffs_from(cfg);
    opt.kld_over_all_domains = cfg.get_bool("kld_over_all_domains", false);
    const MetricsReport mt = evaluate_mt(rec, split, split.test_users, opt);
    emit_metrics(dir, variant_name, mt, hdr.config_hash, hdr.seed);
    if (with_st) {
        for (std::uint32_t k = 0; k < ds.num_domains(); ++k) {
            try {
                const MetricsReport st =
                    evaluate_st(rec, split, k, split.test_users, opt);
                emit_metrics(dir, variant_name + "_st_d" + std::to_string(k), st,
                             hdr.config_hash, hdr.seed);
            } catch (const DataError&) {
                // no test user hides this domain; nothing to report
            }
        }
    }
}

void cmd_ablate(const Config& cfg, std::vector<std::string> variants) {
    if (variants.empty())
        variants = {"drip",          "single_domain",   "many_to_one_a",
                    "many_to_one_b", "fixed_uniform",   "fixed_activeness",
                    "no_adaptive_mask"};
    const fs::path dir = out_dir(cfg);
    const InteractionDataset ds = load_dataset(cfg, dir);
    const EvaluationSplit split = load_split(cfg, dir, ds);
    const auto encs = load_encoders(dir, split.train);
    const auto encoders = encoder_ptrs(encs);
    const TrainConfig tc = train_config(cfg);
    EvalOptions opt;
    opt.cutoffs = cutoffs_from(cfg);

    auto wants = [&](std::initializer_list<const char*> names) {
        for (const auto& v : variants)
            for (const char* n : names)
                if (v == n) return true;
        return false;
    };
    for (const auto& v : variants) parse_variant(v);  // reject typos up front

    std::unique_ptr<DripModel> drip_model;
    if (wants({"drip", "fixed_uniform", "fixed_activeness"})) {
        drip_model = std::make_unique<DripModel>(
            model_config(cfg, ds.num_domains(), encs[0].dim), tc.seed);
        train_drip(*drip_model, split.train, split, encoders, tc);
    }
    for (const auto& name : variants) {
        switch (parse_variant(name)) {
            case VariantKind::Drip: {
                DripRecommender rec(*drip_model, encoders, split.train);
                emit_metrics(dir, name, evaluate_mt(rec, split, split.test_users, opt),
                             cfg.hash(), tc.seed);
                break;
            }
            case VariantKind::FixedUniform:
            case VariantKind::FixedActiveness: {
                const DomainFactor factor = parse_variant(name) == VariantKind::FixedUniform
                                                ? DomainFactor::Uniform
                                                : DomainFactor::Activeness;
                DripRecommender rec(*drip_model, encoders, split.train, factor);
                emit_metrics(dir, name, evaluate_mt(rec, split, split.test_users, opt),
                             cfg.hash(), tc.seed);
                break;
            }
            case VariantKind::NoAdaptiveMask: {
                TrainConfig nt = tc;
                nt.schedule.adaptive = false;
                DripModel model(model_config(cfg, ds.num_domains(), encs[0].dim), nt.seed);
                train_drip(model, split.train, split, encoders, nt);
                DripRecommender rec(model, encoders, split.train);
                emit_metrics(dir, name, evaluate_mt(rec, split, split.test_users, opt),
                             cfg.hash(), nt.seed);
                break;
            }
            case VariantKind::SingleDomain: {
                SingleDomainConfig sc;
                sc.dim = static_cast<std::size_t>(cfg.get_int("encoder_dim", 64));
                sc.epochs = tc.epochs;
                sc.lr = cfg.get_double("single_domain_lr", 0.01);
                sc.batch_users = tc.batch_size;
                sc.seed = tc.seed;
                const SingleDomainModel model(split.train, sc);
                SingleDomainRecommender rec(model, split.train);
                emit_metrics(dir, name, evaluate_mt(rec, split, split.test_users, opt),
                             cfg.hash(), tc.seed);
                break;
            }
            case VariantKind::ManyToOneA:
            case VariantKind::ManyToOneB: {
                auto models = train_many_to_one(split.train, split, encoders, tc);
                ManyToOneRecommender rec(std::move(models), encoders, split.train,
                                         parse_variant(name) == VariantKind::ManyToOneB);
                emit_metrics(dir, name, evaluate_mt(rec, split, split.test_users, opt),
                             cfg.hash(), tc.seed);
                break;
            }
        }
    }
}

void cmd_sweep(const Config& base, const std::string& param,
               const std::vector<std::string>& grid, const std::string& metric_key) {
    if (grid.empty()) throw ConfigError("sweep: empty --grid");
    const fs::path dir = out_dir(base);
    const InteractionDataset ds = load_dataset(base, dir);
    const EvaluationSplit split = load_split(base, dir, ds);
    const bool encoder_param = param.rfind("encoder_", 0) == 0;

    std::vector<DomainEncoderParams> shared_encs;
    if (!encoder_param) shared_encs = load_encoders(dir, split.train);

    std::vector<std::pair<double, double>> points;
    for (const auto& value : grid) {
        Config cfg = base;
        cfg.set(param, value);
        std::vector<DomainEncoderParams> encs;
        if (encoder_param) {
            const BprConfig bc = bpr_config(cfg);
            for (std::uint32_t k = 0; k < ds.num_domains(); ++k) {
                BprConfig per = bc;
                per.seed = bc.seed + k;
                encs.push_back(train_bpr(split.train, k, per));
            }
        }
        const auto& active = encoder_param ? encs : shared_encs;
        const auto encoders = encoder_ptrs(active);

        const TrainConfig tc = train_config(cfg);
        DripModel model(model_config(cfg, ds.num_domains(), active[0].dim), tc.seed);
        train_drip(model, split.train, split, encoders, tc);
        DripRecommender rec(model, encoders, split.train);
        EvalOptions opt;
        opt.cutoffs = cutoffs_from(cfg);
        const MetricsReport rep = evaluate_mt(rec, split, split.test_users, opt);
        const MetricRecord record = record_from_report(rep, cfg.hash(), tc.seed);
        save_record((dir / ("sweep_" + param + "_" + value + ".txt")).string(), record);
        if (!record.metrics.count(metric_key))
            throw ConfigError("sweep: unknown metric " + metric_key);
        points.emplace_back(std::stod(value), record.metrics.at(metric_key));
        std::printf("%s=%s  %s=%.6f\n", param.c_str(), value.c_str(),
                    metric_key.c_str(), points.back().second);
    }
    save_sweep_table((dir / ("sweep_" + param + ".tsv")).string(), param, metric_key,
                     points);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"masked multi-domain recommendation toolkit"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string variant = "drip";
    bool with_st = false;
    std::vector<std::string> variants;
    std::string sweep_param, sweep_metric = "mt.recall@20";
    std::vector<std::string> sweep_grid;

    auto* gen = app.add_subcommand("gen-synthetic", "generate a synthetic dataset");
    add_common(gen, opts);
    auto* split = app.add_subcommand("split", "create the evaluation split");
    add_common(split, opts);
    auto* enc = app.add_subcommand("train-encoders", "pretrain per-domain encoders");
    add_common(enc, opts);
    auto* train = app.add_subcommand("train-drip", "train the masked-domain model");
    add_common(train, opts);
    train->add_option("--variant", variant, "drip | no_adaptive_mask");
    auto* eval = app.add_subcommand("evaluate", "evaluate a trained checkpoint");
    add_common(eval, opts);
    eval->add_option("--variant", variant, "drip | fixed_uniform | fixed_activeness");
    eval->add_flag("--st", with_st, "also run single-target evaluation per domain");
    auto* ablate = app.add_subcommand("ablate", "train and evaluate design variants");
    add_common(ablate, opts);
    ablate->add_option("--variants", variants, "subset of variants to run")->expected(-1);
    auto* sweep = app.add_subcommand("sweep", "grid sweep over one hyperparameter");
    add_common(sweep, opts);
    sweep->add_option("--param", sweep_param, "config key to sweep")->required();
    sweep->add_option("--grid", sweep_grid, "grid values")->required()->expected(-1);
    sweep->add_option("--metric", sweep_metric, "metric column for the sweep table");

    try {
        app.parse(argc, argv);
        const Config cfg = build_config(opts);
        if (gen->parsed()) cmd_gen_synthetic(cfg);
        else if (split->parsed()) cmd_split(cfg);
        else if (enc->parsed()) cmd_train_encoders(cfg);
        else if (train->parsed()) cmd_train_drip(cfg, variant);
        else if (eval->parsed()) cmd_evaluate(cfg, variant, with_st);
        else if (ablate->parsed()) cmd_ablate(cfg, variants);
        else if (sweep->parsed()) cmd_sweep(cfg, sweep_param, sweep_grid, sweep_metric);
        return 0;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

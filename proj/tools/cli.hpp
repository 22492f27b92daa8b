#pragma once

// Command-line front end. `covr::cli::run` is the whole program minus main(),
// so tests can drive commands in-process.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "covr/covr.hpp"

namespace covr::cli {

namespace fs = std::filesystem;

/// Run record: one per command invocation.
class Manifest {
   public:
    explicit Manifest(std::string command) : command_(std::move(command)), start_(std::chrono::steady_clock::now()) {}

    void config(const std::string& key, const std::string& value) { config_.emplace_back(key, value); }
    void input(const std::string& name, const std::string& path) {
        inputs_.emplace_back(name, path, hex64(fnv1a64_file(path)));
    }
    void artifact(const std::string& name, const std::string& path) { artifacts_.emplace_back(name, path); }
    void seed(std::uint64_t s) { seed_ = s; }

    void write(const std::string& path) const {
        std::ostringstream out;
        out << "command=" << command_ << '\n';
        out << "seed=" << seed_ << '\n';
        for (const auto& [k, v] : config_) out << "config." << k << '=' << v << '\n';
        for (const auto& [name, p, digest] : inputs_) {
            out << "input." << name << '=' << p << '\n';
            out << "digest." << name << "=fnv1a64:" << digest << '\n';
        }
        for (const auto& [k, v] : artifacts_) out << "artifact." << k << '=' << v << '\n';
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        out << "duration_s=" << format_fixed(secs, 3) << '\n';
        binary::write_file(path, out.str());
    }

   private:
    std::string command_;
    std::chrono::steady_clock::time_point start_;
    std::uint64_t seed_ = 0;
    std::vector<std::pair<std::string, std::string>> config_;
    std::vector<std::tuple<std::string, std::string, std::string>> inputs_;
    std::vector<std::pair<std::string, std::string>> artifacts_;
};

inline unsigned thread_count() {
    const char* env = std::getenv("COVR_THREADS");
    if (!env || !*env) return 1;
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (*end != '\0' || n < 1 || n > 1024) throw config_error("COVR_THREADS must be an integer in [1, 1024]");
    return static_cast<unsigned>(n);
}

inline std::vector<std::size_t> parse_ks(const std::string& text) {
    std::vector<std::size_t> ks;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        long long v = 0;
        try {
            v = std::stoll(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != item.size() || v < 1) throw config_error("bad --ks entry '" + item + "'");
        ks.push_back(static_cast<std::size_t>(v));
    }
    if (ks.empty()) throw config_error("--ks is empty");
    return ks;
}

inline std::string join_ks(const std::vector<std::size_t>& ks) {
    std::string s;
    for (std::size_t i = 0; i < ks.size(); ++i) s += (i ? "," : "") + std::to_string(ks[i]);
    return s;
}

inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_text(const std::string& path, const std::string& text) { binary::write_file(path, text); }

// ---------------------------------------------------------------------------

struct DataFlags {
    std::string triplets, query_store, desc_store, target_store;

    void add(CLI::App* app, bool need_desc = true) {
        app->add_option("--triplets", triplets, "triplet JSONL file")->required();
        app->add_option("--query-store", query_store, "query video embeddings (CVRE)")->required();
        auto* d = app->add_option("--desc-store", desc_store, "description embeddings keyed by query id (CVRE)");
        if (need_desc) d->required();
        app->add_option("--target-store", target_store, "target video embeddings (CVRE)")->required();
    }

    void record(Manifest& m) const {
        m.input("triplets", triplets);
        m.input("query_store", query_store);
        m.input("desc_store", desc_store);
        m.input("target_store", target_store);
    }
};

struct LoadedData {
    std::vector<Triplet> triplets;
    EmbeddingStore queries, descriptions, targets;
};

inline LoadedData load_data(const DataFlags& f) {
    return LoadedData{read_triplets(f.triplets), load_embedding_store(f.query_store),
                      load_embedding_store(f.desc_store), load_embedding_store(f.target_store)};
}

struct FuseFlags {
    std::string fusion = "unified";
    std::string combine = "weighted-mean";
    std::optional<double> alpha;

    void add(CLI::App* app) {
        app->add_option("--fusion", fusion, "unified or pairwise")->capture_default_str();
        app->add_option("--combine", combine, "weighted-mean, addition or cross-attention")->capture_default_str();
        app->add_option("--alpha", alpha, "override the learned alpha, in [0, 1]");
    }

    FusionMode mode() const { return parse_fusion_mode(fusion); }

    FuseOptions options() const {
        if (alpha && !(*alpha >= 0.0 && *alpha <= 1.0)) throw config_error("--alpha must be in [0, 1]");
        return FuseOptions{parse_combine_strategy(combine), alpha};
    }

    void record(Manifest& m) const {
        m.config("fusion", fusion);
        m.config("combine", combine);
        if (alpha) m.config("alpha_override", format_g17(*alpha));
    }
};

// ---------------------------------------------------------------------------
// train

struct TrainFlags {
    DataFlags data;
    FuseFlags fuse;
    std::string out_dir;
    std::string resume;
    std::size_t epochs = 200, batch_size = 8, layers = 2, heads = 4, vocab = kDefaultVocab, max_len = kDefaultMaxLen;
    double lr = 3e-4, tau = 0.07, lambda = 1.0, beta = 0.5;
    std::uint32_t seed = 42;
    std::string optimizer = "adam";
    std::optional<double> grad_clip;
    bool no_shuffle = false;
    std::string preset;
};

inline void add_train(CLI::App& app, TrainFlags& f) {
    auto* c = app.add_subcommand("train", "train fusion parameters on triplets");
    f.data.add(c);
    f.fuse.add(c);
    c->add_option("--out-dir", f.out_dir, "directory for checkpoint, optimizer state, loss trace, manifest")
        ->required();
    c->add_option("--resume", f.resume, "continue from a previous --out-dir");
    c->add_option("--preset", f.preset, "'large': 5 epochs, batch 1024, lr 1e-5 (explicit flags still win)");
    c->add_option("--epochs", f.epochs)->capture_default_str();
    c->add_option("--batch-size", f.batch_size)->capture_default_str();
    c->add_option("--lr", f.lr)->capture_default_str();
    c->add_option("--seed", f.seed)->capture_default_str();
    c->add_option("--layers", f.layers)->capture_default_str();
    c->add_option("--heads", f.heads)->capture_default_str();
    c->add_option("--vocab", f.vocab)->capture_default_str();
    c->add_option("--max-len", f.max_len)->capture_default_str();
    c->add_option("--tau", f.tau)->capture_default_str();
    c->add_option("--lambda", f.lambda)->capture_default_str();
    c->add_option("--beta", f.beta)->capture_default_str();
    c->add_option("--optimizer", f.optimizer, "adam or sgd")->capture_default_str();
    c->add_option("--grad-clip", f.grad_clip, "clip the global gradient norm");
    c->add_flag("--no-shuffle", f.no_shuffle);
}

inline std::vector<double> read_loss_trace(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot read " + path);
    std::string line;
    std::getline(in, line);
    std::vector<double> trace;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw data_error("malformed loss trace row in " + path);
        trace.push_back(std::stod(line.substr(comma + 1)));
    }
    return trace;
}

inline int cmd_train(const CLI::App& sub, const TrainFlags& f, std::ostream& out) {
    Manifest manifest("train");
    TrainConfig cfg;
    if (!f.preset.empty()) {
        if (f.preset != "large") throw config_error("unknown preset '" + f.preset + "'");
        cfg = TrainConfig::large_scale_preset();
    }
    auto given = [&](const char* name) { return sub.get_option(name)->count() > 0; };
    if (f.preset.empty() || given("--epochs")) cfg.epochs = f.epochs;
    if (f.preset.empty() || given("--batch-size")) cfg.batch_size = f.batch_size;
    if (f.preset.empty() || given("--lr")) cfg.learning_rate = f.lr;
    cfg.seed = f.seed;
    cfg.layers = f.layers;
    cfg.heads = f.heads;
    cfg.vocab = f.vocab;
    cfg.max_len = f.max_len;
    cfg.loss = ContrastiveConfig{f.tau, f.lambda, f.beta};
    cfg.shuffle = !f.no_shuffle;
    cfg.grad_clip = f.grad_clip;
    cfg.optimizer = parse_optimizer_kind(f.optimizer);
    cfg.fusion = f.fuse.mode();
    cfg.fuse = f.fuse.options();
    cfg.validate();

    f.data.record(manifest);
    const LoadedData data = load_data(f.data);
    const Index targets = build_index(data.targets);
    const auto descriptions = DescriptionSource::from_store(data.descriptions);

    TrainState state = [&] {
        if (f.resume.empty()) {
            cfg.fusion_config(data.queries.dim()).validate();
            return initial_state(cfg, data.queries.dim());
        }
        const std::string ckpt = (fs::path(f.resume) / "checkpoint.cvrp").string();
        const std::string opt = (fs::path(f.resume) / "optimizer.cvrp").string();
        const std::string trace = (fs::path(f.resume) / "loss_trace.csv").string();
        manifest.input("resume_checkpoint", ckpt);
        manifest.input("resume_optimizer", opt);
        manifest.input("resume_loss_trace", trace);
        FusionParams params = load_checkpoint(ckpt);
        Optimizer o = load_optimizer(opt, params);
        if (o.kind() != cfg.optimizer) throw config_error("--optimizer differs from the resumed optimizer state");
        auto losses = read_loss_trace(trace);
        const std::size_t done = losses.size();
        return TrainState{std::move(params), std::move(o), done, std::move(losses)};
    }();
    // architecture and seed always come from the parameters being trained
    const FusionConfig& fc = state.params.config;
    cfg.seed = fc.seed;
    cfg.layers = fc.layers;
    cfg.heads = fc.heads;
    cfg.vocab = fc.vocab;
    cfg.max_len = fc.max_len;

    const auto samples = resolve_samples(data.triplets, data.queries, descriptions, targets, fc);
    train(state, samples, targets, cfg);

    fs::create_directories(f.out_dir);
    const std::string ckpt = (fs::path(f.out_dir) / "checkpoint.cvrp").string();
    const std::string opt = (fs::path(f.out_dir) / "optimizer.cvrp").string();
    const std::string trace = (fs::path(f.out_dir) / "loss_trace.csv").string();
    save_checkpoint(state.params, ckpt);
    save_optimizer(state.optimizer, opt);
    std::string csv = "epoch,loss\n";
    for (std::size_t e = 0; e < state.loss_trace.size(); ++e)
        csv += std::to_string(e) + ',' + format_g17(state.loss_trace[e]) + '\n';
    write_text(trace, csv);

    manifest.seed(cfg.seed);
    manifest.config("d", std::to_string(fc.dim));
    manifest.config("layers", std::to_string(fc.layers));
    manifest.config("heads", std::to_string(fc.heads));
    manifest.config("vocab", std::to_string(fc.vocab));
    manifest.config("max_len", std::to_string(fc.max_len));
    manifest.config("epochs", std::to_string(cfg.epochs));
    manifest.config("epochs_total", std::to_string(state.epochs_done));
    manifest.config("batch_size", std::to_string(cfg.batch_size));
    manifest.config("lr", format_g17(cfg.learning_rate));
    manifest.config("optimizer", to_string(cfg.optimizer));
    manifest.config("tau", format_g17(cfg.loss.tau));
    manifest.config("lambda", format_g17(cfg.loss.lambda));
    manifest.config("beta", format_g17(cfg.loss.beta));
    manifest.config("shuffle", cfg.shuffle ? "true" : "false");
    manifest.config("grad_clip", cfg.grad_clip ? format_g17(*cfg.grad_clip) : "off");
    manifest.config("preset", f.preset.empty() ? "none" : f.preset);
    f.fuse.record(manifest);
    manifest.config("alpha", format_fixed(state.params.alpha()));
    manifest.config("checkpoint_hash", checkpoint_digest(state.params));
    manifest.artifact("checkpoint", ckpt);
    manifest.artifact("optimizer", opt);
    manifest.artifact("loss_trace", trace);
    const std::string mpath = (fs::path(f.out_dir) / "manifest.txt").string();
    manifest.write(mpath);

    out << "epochs=" << state.epochs_done << " final_loss=" << format_fixed(state.loss_trace.back())
        << " alpha=" << format_fixed(state.params.alpha()) << '\n';
    out << "checkpoint=" << ckpt << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalFlags {
    DataFlags data;
    FuseFlags fuse;
    std::string checkpoint, report, manifest, ks = "1,5,10,50";
    bool exclude_self = false;
};

inline void add_eval(CLI::App& app, EvalFlags& f) {
    auto* c = app.add_subcommand("eval", "recall@K of a checkpoint on a triplet set");
    f.data.add(c);
    f.fuse.add(c);
    c->add_option("--checkpoint", f.checkpoint)->required();
    c->add_option("--report", f.report, "report path (default: standard output)");
    c->add_option("--manifest", f.manifest, "manifest path (default: <report>.manifest.txt or eval.manifest.txt)");
    c->add_option("--ks", f.ks, "comma-separated cutoffs")->capture_default_str();
    c->add_flag("--exclude-self", f.exclude_self, "drop the query's own id from its ranking");
}

inline std::string default_manifest(const std::string& explicit_path, const std::string& output,
                                    const std::string& fallback) {
    if (!explicit_path.empty()) return explicit_path;
    if (!output.empty()) return output + ".manifest.txt";
    return fallback;
}

inline int cmd_eval(const EvalFlags& f, std::ostream& out) {
    Manifest manifest("eval");
    EvalOptions opts;
    opts.fusion = f.fuse.mode();
    opts.fuse = f.fuse.options();
    opts.ks = parse_ks(f.ks);
    opts.exclude_self = f.exclude_self;
    opts.threads = thread_count();

    f.data.record(manifest);
    manifest.input("checkpoint", f.checkpoint);
    const FusionParams params = load_checkpoint(f.checkpoint);
    const LoadedData data = load_data(f.data);
    const EvalReport report = evaluate_dataset(data.triplets, data.queries,
                                               DescriptionSource::from_store(data.descriptions), data.targets, params,
                                               opts);
    const std::string text = report.serialize();
    if (f.report.empty()) {
        out << text;
    } else {
        write_text(f.report, text);
        manifest.artifact("report", f.report);
    }
    manifest.seed(params.config.seed);
    for (const auto& [k, v] : report.config) manifest.config(k, v);
    manifest.config("ks", join_ks(opts.ks));
    manifest.config("threads", std::to_string(opts.threads));
    manifest.write(default_manifest(f.manifest, f.report, "eval.manifest.txt"));
    return 0;
}

// ---------------------------------------------------------------------------
// retrieve

struct RetrieveFlags {
    FuseFlags fuse;
    std::string checkpoint, query_store, target_store, desc_store, query_id, desc_id, description, modification,
        manifest;
    std::size_t topk = 10;
    std::uint64_t seed = 42;
    bool exclude_self = false;
};

inline void add_retrieve(CLI::App& app, RetrieveFlags& f) {
    auto* c = app.add_subcommand("retrieve", "top-K targets for one composed query");
    f.fuse.add(c);
    c->add_option("--checkpoint", f.checkpoint)->required();
    c->add_option("--query-store", f.query_store)->required();
    c->add_option("--target-store", f.target_store)->required();
    c->add_option("--query-id", f.query_id)->required();
    c->add_option("--modification", f.modification)->required();
    auto* ds = c->add_option("--desc-store", f.desc_store, "description store, used with --desc-id");
    auto* di = c->add_option("--desc-id", f.desc_id, "key into --desc-store");
    auto* dt = c->add_option("--description", f.description, "free text, embedded with the toy text embedder");
    di->needs(ds);
    di->excludes(dt);
    c->add_option("--seed", f.seed, "seed of the toy text embedder for --description")->capture_default_str();
    c->add_option("--topk", f.topk)->capture_default_str();
    c->add_option("--manifest", f.manifest, "manifest path (default: retrieve.manifest.txt)");
    c->add_flag("--exclude-self", f.exclude_self);
}

inline int cmd_retrieve(const RetrieveFlags& f, std::ostream& out) {
    Manifest manifest("retrieve");
    if (f.desc_id.empty() && f.description.empty()) throw config_error("one of --desc-id or --description is required");
    if (f.topk < 1) throw config_error("--topk must be at least 1");
    const FuseOptions fopts = f.fuse.options();
    const FusionMode mode = f.fuse.mode();

    manifest.input("checkpoint", f.checkpoint);
    manifest.input("query_store", f.query_store);
    manifest.input("target_store", f.target_store);
    const FusionParams params = load_checkpoint(f.checkpoint);
    const EmbeddingStore queries = load_embedding_store(f.query_store);
    const EmbeddingStore target_store = load_embedding_store(f.target_store);
    const Index targets = build_index(target_store);
    const std::size_t d = params.config.dim;
    if (queries.dim() != d || targets.dim() != d) {
        throw shape_error("store dim does not match checkpoint dim " + std::to_string(d));
    }

    Embedding description;
    if (!f.desc_id.empty()) {
        manifest.input("desc_store", f.desc_store);
        const EmbeddingStore descs = load_embedding_store(f.desc_store);
        if (descs.dim() != d) throw shape_error("description store dim does not match checkpoint dim");
        description = descs.get(f.desc_id);
    } else {
        description = toy_embed_text(tokenize(f.description, DescriptionSource::kToyMaxLen), d, f.seed);
    }
    Embedding query;
    try {
        query = normalized(queries.get(f.query_id));
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::numeric) throw;
        throw data_error("query embedding '" + f.query_id + "' is zero");
    }
    const auto mod = tokenize(f.modification, params.config.max_len, params.config.vocab);
    const Embedding fused = fuse(params, mode, query, description, mod, fopts);

    const std::size_t want = f.exclude_self ? f.topk + 1 : f.topk;
    RetrievalResult r = search_topk(targets, fused, std::min(want, targets.size()));
    if (f.exclude_self) std::erase_if(r.entries, [&](const ScoredId& s) { return s.id == f.query_id; });
    if (r.entries.size() > f.topk) r.entries.resize(f.topk);

    std::ostringstream csv;
    csv << "rank,id,score\n";
    for (std::size_t i = 0; i < r.entries.size(); ++i)
        csv << i + 1 << ',' << r.entries[i].id << ',' << format_fixed(r.entries[i].score) << '\n';
    out << csv.str();

    manifest.seed(f.seed);
    f.fuse.record(manifest);
    manifest.config("query_id", f.query_id);
    manifest.config("desc_id", f.desc_id.empty() ? "-" : f.desc_id);
    manifest.config("description", f.description.empty() ? "-" : f.description);
    manifest.config("modification", f.modification);
    manifest.config("topk", std::to_string(f.topk));
    manifest.config("exclude_self", f.exclude_self ? "true" : "false");
    manifest.config("checkpoint_hash", checkpoint_digest(params));
    manifest.write(f.manifest.empty() ? "retrieve.manifest.txt" : f.manifest);
    return 0;
}

// ---------------------------------------------------------------------------
// stats

struct StatsFlags {
    std::string triplets, out_prefix, manifest;
};

inline void add_stats(CLI::App& app, StatsFlags& f) {
    auto* c = app.add_subcommand("stats", "word-count statistics of a triplet file");
    c->add_option("--triplets", f.triplets)->required();
    c->add_option("--out-prefix", f.out_prefix, "prefix for histogram CSVs (default: <triplets>.)");
    c->add_option("--manifest", f.manifest, "manifest path (default: <prefix>manifest.txt)");
}

inline std::string histogram_csv(const WordHistogram& h) {
    std::string s = "value,count\n";
    for (const auto& [v, c] : h.counts) s += std::to_string(v) + ',' + std::to_string(c) + '\n';
    return s;
}

inline int cmd_stats(const StatsFlags& f, std::ostream& out) {
    Manifest manifest("stats");
    manifest.input("triplets", f.triplets);
    const CorpusStats s = dataset_stats(read_triplets(f.triplets));
    const std::string prefix = f.out_prefix.empty() ? f.triplets + "." : f.out_prefix;
    const std::string desc_csv = prefix + "description_words.csv";
    const std::string mod_csv = prefix + "modification_words.csv";
    write_text(desc_csv, histogram_csv(s.description));
    write_text(mod_csv, histogram_csv(s.modification));

    std::ostringstream text;
    text << "triplets=" << s.count << '\n'
         << "description_mean_words=" << s.description.mean.format2() << '\n'
         << "modification_mean_words=" << s.modification.mean.format2() << '\n'
         << "triplets_per_query=" << s.triplets_per_query.format2() << '\n';
    out << text.str();

    manifest.config("out_prefix", prefix);
    manifest.artifact("description_histogram", desc_csv);
    manifest.artifact("modification_histogram", mod_csv);
    manifest.write(f.manifest.empty() ? prefix + "manifest.txt" : f.manifest);
    return 0;
}

// ---------------------------------------------------------------------------
// compare-fusion

struct CompareFlags {
    DataFlags data;
    std::string checkpoint, checkpoint_b, fusion_a = "unified", fusion_b = "pairwise", out, manifest;
};

inline void add_compare(CLI::App& app, CompareFlags& f) {
    auto* c = app.add_subcommand("compare-fusion", "query-target similarity distributions of two fusion setups");
    f.data.add(c);
    c->add_option("--checkpoint", f.checkpoint, "checkpoint for slot a")->required();
    c->add_option("--checkpoint-b", f.checkpoint_b, "checkpoint for slot b (default: --checkpoint)");
    c->add_option("--fusion-a", f.fusion_a)->capture_default_str();
    c->add_option("--fusion-b", f.fusion_b)->capture_default_str();
    c->add_option("--out", f.out, "CSV path (default: standard output)");
    c->add_option("--manifest", f.manifest, "manifest path (default: <out>.manifest.txt or compare.manifest.txt)");
}

inline int cmd_compare(const CompareFlags& f, std::ostream& out) {
    Manifest manifest("compare-fusion");
    const FusionMode ma = parse_fusion_mode(f.fusion_a);
    const FusionMode mb = parse_fusion_mode(f.fusion_b);
    const std::string path_b = f.checkpoint_b.empty() ? f.checkpoint : f.checkpoint_b;
    manifest.input("checkpoint_a", f.checkpoint);
    manifest.input("checkpoint_b", path_b);
    const FusionParams a = load_checkpoint(f.checkpoint);
    const FusionParams b = load_checkpoint(path_b);
    if (a.config.dim != b.config.dim) {
        throw shape_error("checkpoint dims differ: " + std::to_string(a.config.dim) + " vs " +
                          std::to_string(b.config.dim));
    }
    f.data.record(manifest);
    const LoadedData data = load_data(f.data);
    const Index targets = build_index(data.targets);
    const auto samples = resolve_samples(data.triplets, data.queries, DescriptionSource::from_store(data.descriptions),
                                         targets, a.config);
    const ComparisonReport report =
        compare_fusion(samples, targets, FusionSlot{&a, ma, {}}, FusionSlot{&b, mb, {}}, thread_count());
    const std::string csv = report.to_csv();
    if (f.out.empty()) {
        out << csv;
    } else {
        write_text(f.out, csv);
        manifest.artifact("report", f.out);
    }
    manifest.seed(a.config.seed);
    manifest.config("fusion_a", f.fusion_a);
    manifest.config("fusion_b", f.fusion_b);
    manifest.config("checkpoint_hash_a", checkpoint_digest(a));
    manifest.config("checkpoint_hash_b", checkpoint_digest(b));
    manifest.write(default_manifest(f.manifest, f.out, "compare.manifest.txt"));
    return 0;
}

// ---------------------------------------------------------------------------
// synth

struct SynthFlags {
    std::string out_dir, kind = "joint";
    std::size_t dim = 32, targets = 100, queries = 100;
    std::uint64_t seed = 42;
};

inline void add_synth(CLI::App& app, SynthFlags& f) {
    auto* c = app.add_subcommand("synth", "write a synthetic dataset (triplets plus three stores)");
    c->add_option("--out-dir", f.out_dir)->required();
    c->add_option("--kind", f.kind, "joint (32 triplets) or random")->capture_default_str();
    c->add_option("--dim", f.dim)->capture_default_str();
    c->add_option("--seed", f.seed)->capture_default_str();
    c->add_option("--targets", f.targets, "random kind: number of targets")->capture_default_str();
    c->add_option("--queries", f.queries, "random kind: number of triplets")->capture_default_str();
}

inline int cmd_synth(const SynthFlags& f, std::ostream& out) {
    Manifest manifest("synth");
    if (f.dim < 2) throw config_error("--dim must be at least 2");
    SyntheticTask task = [&] {
        if (f.kind == "joint") return make_joint_task(f.dim, f.seed);
        if (f.kind == "random") {
            if (f.targets < 1 || f.queries < 1) throw config_error("--targets and --queries must be positive");
            return make_random_task(f.targets, f.queries, f.dim, f.seed);
        }
        throw config_error("unknown --kind '" + f.kind + "'");
    }();
    fs::create_directories(f.out_dir);
    const fs::path dir(f.out_dir);
    const std::pair<std::string, std::string> files[] = {{"triplets", (dir / "triplets.jsonl").string()},
                                                         {"query_store", (dir / "queries.cvre").string()},
                                                         {"desc_store", (dir / "descriptions.cvre").string()},
                                                         {"target_store", (dir / "targets.cvre").string()}};
    write_triplets(task.triplets, files[0].second);
    write_embedding_store(task.queries, files[1].second);
    write_embedding_store(task.descriptions, files[2].second);
    write_embedding_store(task.targets, files[3].second);
    manifest.seed(f.seed);
    manifest.config("kind", f.kind);
    manifest.config("dim", std::to_string(f.dim));
    if (f.kind == "random") {
        manifest.config("targets", std::to_string(f.targets));
        manifest.config("queries", std::to_string(f.queries));
    }
    for (const auto& [name, path] : files) {
        manifest.artifact(name, path);
        out << name << '=' << path << '\n';
    }
    manifest.write((dir / "manifest.txt").string());
    return 0;
}

// ---------------------------------------------------------------------------

/// Runs one command. `args` excludes the program name. Returns the exit code.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Composed video retrieval: train, evaluate and query fusion models", "covr"};
    app.require_subcommand(1);
    TrainFlags train_f;
    EvalFlags eval_f;
    RetrieveFlags retrieve_f;
    StatsFlags stats_f;
    CompareFlags compare_f;
    SynthFlags synth_f;
    add_train(app, train_f);
    add_eval(app, eval_f);
    add_retrieve(app, retrieve_f);
    add_stats(app, stats_f);
    add_compare(app, compare_f);
    add_synth(app, synth_f);

    std::vector<const char*> argv{"covr"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n";
        const auto subs = app.get_subcommands();
        err << (subs.empty() ? app.help() : subs.front()->help());
        return 2;
    }

    const CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    try {
        if (name == "train") return cmd_train(*sub, train_f, out);
        if (name == "eval") return cmd_eval(eval_f, out);
        if (name == "retrieve") return cmd_retrieve(retrieve_f, out);
        if (name == "stats") return cmd_stats(stats_f, out);
        if (name == "compare-fusion") return cmd_compare(compare_f, out);
        if (name == "synth") return cmd_synth(synth_f, out);
    } catch (const Error& e) {
        err << "covr " << name << ": " << e.what() << '\n';
        if (e.kind() == ErrorKind::config) err << '\n' << sub->help();
        return exit_code(e.kind());
    } catch (const std::filesystem::filesystem_error& e) {
        err << "covr " << name << ": io: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        err << "covr " << name << ": " << e.what() << '\n';
        return 1;
    }
    return 2;
}

}  // namespace covr::cli

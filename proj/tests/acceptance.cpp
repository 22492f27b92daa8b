// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "covr/covr.hpp"
#include "naive_loss.hpp"

namespace {

using namespace covr;
namespace fs = std::filesystem;

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok && pass) {
            pass = false;
            detail = what;
        }
    }
};

Embedding unit(std::size_t dim, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> v(dim);
    for (double& x : v) x = n(rng);
    return normalized(Embedding{v, false});
}

Embedding raw(std::size_t dim, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> v(dim);
    for (double& x : v) x = n(rng);
    return Embedding{v, false};
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

std::string fmt(const char* f, double v) {
    char buf[96];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

// ---------------------------------------------------------------------------

Outcome ac1() {
    Outcome o;
    std::mt19937_64 rng(101);
    const FusionParams p = init_params(FusionConfig{16, 2, 4, 256, 16, 7});
    static const char* mods[] = {"add a dog", "make it night", "zoom out slowly", "remove the red car"};
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const auto mod = tokenize(mods[t % 4], 16, 256);
        const Embedding q = unit(16, rng), q2 = unit(16, rng), d = raw(16, rng), d2 = raw(16, rng);
        const FuseOptions zero{CombineStrategy::weighted_mean, 0.0}, one{CombineStrategy::weighted_mean, 1.0};
        const double a = max_abs_diff(unified_fuse(p, q, d, mod, zero).values, unified_fuse(p, q, d2, mod, zero).values);
        const double b = max_abs_diff(unified_fuse(p, q, d, mod, one).values, unified_fuse(p, q2, d, mod, one).values);
        worst = std::max({worst, a, b});
    }
    o.require(worst <= 1e-9, "output moved by " + fmt("%.3g", worst));
    o.detail = o.pass ? "max deviation " + fmt("%.3g", worst) + " over 100 pairs" : o.detail;
    return o;
}

Outcome ac2() {
    Outcome o;
    std::mt19937_64 rng(202);
    double worst = 0.0;
    int count = 0;
    for (std::size_t b : {1u, 2u, 4u, 8u, 16u}) {
        for (int t = 0; t < 100; ++t, ++count) {
            std::vector<Embedding> f, g;
            for (std::size_t i = 0; i < b; ++i) {
                f.push_back(unit(8, rng));
                g.push_back(unit(8, rng));
            }
            const SimilarityMatrix s = similarity_matrix(f, g);
            test::Matrix m(b, std::vector<double>(b));
            for (std::size_t i = 0; i < b; ++i)
                for (std::size_t j = 0; j < b; ++j) m[i][j] = s.S.at(i, j);
            const double got = hn_nce_loss(s);
            const double want = test::naive_loss(m, 0.07, 1.0, 0.5);
            worst = std::max(worst, std::abs(got - want));
            if (b == 1) o.require(got == 0.0, "B=1 loss is " + fmt("%.17g", got));
        }
    }
    o.require(count == 500, "wrong instance count");
    o.require(worst <= 1e-9, "oracle deviation " + fmt("%.3g", worst));
    if (o.pass) o.detail = "500 instances, max deviation " + fmt("%.3g", worst);
    return o;
}

// Loss with hard-negative weights fixed at S0: backward treats the weights as
// constants, so finite differences must hold them fixed too.
Var frozen_weight_loss(Var S, const Tensor& S0) {
    const ContrastiveConfig cfg;
    return hn_nce_loss(S, cfg, hard_negative_weights(S0, cfg, WeightDirection::row),
                       hard_negative_weights(S0, cfg, WeightDirection::column));
}

Outcome ac3() {
    Outcome o;
    std::mt19937_64 rng(303);
    // (a) loss w.r.t. S
    double worst_s = 0.0;
    for (std::size_t b : {1u, 2u, 4u, 8u}) {
        Tensor S({b, b});
        std::uniform_real_distribution<double> u(-1, 1);
        for (double& v : S.values()) v = u(rng);
        std::vector<Tensor> params{S};
        ScalarFn fn = [&S](Tape&, std::span<const Var> p) { return frozen_weight_loss(p[0], S); };
        worst_s = std::max(worst_s, grad_check(fn, params, 1e-5, 1e-4).worst());
    }
    o.require(worst_s < 1e-4, "loss gradient error " + fmt("%.3g", worst_s));

    // (b) unified fusion, similarity and loss w.r.t. every parameter tensor
    const FusionConfig cfg{16, 1, 2, 16, 6, 11};
    FusionParams p = init_params(cfg);
    p.set_alpha(0.4);
    for (auto& blk : p.weights.layers)
        for (auto* n : {&blk.norm1, &blk.norm2, &blk.norm3}) {
            for (double& v : n->scale.values()) v = 1.0 + 0.1 * std::normal_distribution<double>(0, 1)(rng);
            for (double& v : n->shift.values()) v = 0.1 * std::normal_distribution<double>(0, 1)(rng);
        }
    static const char* mods[] = {"add a kite", "zoom out", "make it snow now", "remove people"};
    std::vector<Embedding> qs, ds;
    std::vector<TokenSequence> ms;
    Tensor targets({4, 16});
    for (std::size_t i = 0; i < 4; ++i) {
        qs.push_back(unit(16, rng));
        ds.push_back(raw(16, rng));
        ms.push_back(tokenize(mods[i], cfg.max_len, cfg.vocab));
        const Embedding t = unit(16, rng);
        std::copy(t.values.begin(), t.values.end(), targets.row_span(i).begin());
    }
    auto similarities = [&](Tape& tape, std::span<const Var> vars) {
        FusionNet net = assemble(cfg, vars);
        std::vector<Var> fused;
        for (std::size_t i = 0; i < 4; ++i)
            fused.push_back(
                unified_fuse(net, embedding_row(tape, qs[i], 16), embedding_row(tape, ds[i], 16), ms[i]));
        return similarity_matrix(concat_rows(fused), tape.constant(targets));
    };
    std::vector<Tensor> tensors;
    for (const Tensor* t : p.tensors()) tensors.push_back(*t);
    Tensor S0;
    {
        Tape tape;
        std::vector<Var> vars;
        for (const Tensor& t : tensors) vars.push_back(tape.borrow(t, false));
        S0 = similarities(tape, vars).value();
    }
    ScalarFn pipeline = [&](Tape& tape, std::span<const Var> vars) {
        return frozen_weight_loss(similarities(tape, vars), S0);
    };
    const auto report = grad_check(pipeline, tensors, 1e-5, 1e-4, p.names());
    std::size_t worst_i = 0;
    for (std::size_t i = 0; i < report.names.size(); ++i)
        if (report.max_rel_error[i] > report.max_rel_error[worst_i]) worst_i = i;
    o.require(report.passed(), "tensor " + report.names[worst_i] + " error " + fmt("%.3g", report.worst()));
    if (o.pass)
        o.detail = "S error " + fmt("%.3g", worst_s) + ", pipeline error " + fmt("%.3g", report.worst()) + " over " +
                   std::to_string(report.names.size()) + " tensors";
    return o;
}

Outcome ac4() {
    Outcome o;
    std::mt19937_64 rng(404);
    std::normal_distribution<float> nf(0.0f, 1.0f);
    auto check = [&](const EmbeddingStore& store, const std::string& label) {
        const Index idx = build_index(store);
        for (int q = 0; q < 3; ++q) {
            const Embedding query = unit(store.dim(), rng);
            const RetrievalResult full = brute_force_rank(store, query);
            for (std::size_t k : {1u, 5u, 10u, 50u}) {
                const RetrievalResult top = search_topk(idx, query, k);
                const std::size_t n = std::min(k, store.size());
                if (top.size() != n) {
                    o.require(false, label + ": wrong result length");
                    return;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    if (top.entries[i].id != full.entries[i].id ||
                        std::abs(top.entries[i].score - full.entries[i].score) > 1e-9) {
                        o.require(false, label + ": mismatch at rank " + std::to_string(i + 1) + " k=" +
                                             std::to_string(k));
                        return;
                    }
                }
            }
        }
    };
    for (int s = 0; s < 200; ++s) {
        const std::size_t n = 1 + rng() % 1000;
        const std::size_t d = 1 + rng() % 64;
        EmbeddingStore store(d);
        std::vector<float> prev;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<float> v(d);
            for (float& x : v) x = nf(rng);
            // repeat some vectors so ties occur inside ordinary stores too
            if (!prev.empty() && rng() % 8 == 0) v = prev;
            if (std::all_of(v.begin(), v.end(), [](float x) { return x == 0.0f; })) v[0] = 1.0f;
            char id[32];
            std::snprintf(id, sizeof id, "id%06zu_%llu", i, static_cast<unsigned long long>(rng() % 1000));
            store.insert(id, v);
            prev = v;
        }
        check(store, "store " + std::to_string(s));
    }
    EmbeddingStore dup(16);
    const Embedding one = unit(16, rng);
    for (int i = 0; i < 300; ++i) dup.insert("dup" + std::to_string(rng()), std::vector<float>(one.values.begin(), one.values.end()));
    check(dup, "all-duplicates store");
    const RetrievalResult r = search_topk(build_index(dup), one, 50);
    for (std::size_t i = 1; i < r.size(); ++i) o.require(r.entries[i - 1].id < r.entries[i].id, "tie rule violated");
    if (o.pass) o.detail = "200 random stores plus an all-duplicates store";
    return o;
}

std::vector<std::string> universe(std::size_t n) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "v%04zu", i);
        ids.push_back(buf);
    }
    return ids;
}

RetrievalResult ranking(const std::vector<std::string>& ids) {
    RetrievalResult r;
    for (std::size_t i = 0; i < ids.size(); ++i)
        r.entries.push_back(ScoredId{ids[i], 1.0 - static_cast<double>(i) / static_cast<double>(ids.size())});
    return r;
}

Outcome ac5() {
    Outcome o;
    const auto ids = universe(100);
    std::vector<RetrievalResult> results;
    std::vector<std::string> targets;
    for (std::size_t rank : {1u, 3u, 7u, 60u}) {
        results.push_back(ranking(ids));
        targets.push_back(ids[rank - 1]);
    }
    const std::vector<double> expected{0.25, 0.50, 0.75, 0.75};
    const std::vector<std::size_t> ks{1, 5, 10, 50};
    for (std::size_t i = 0; i < ks.size(); ++i) {
        const double got = recall_at_k(results, targets, ks[i]);
        o.require(got == expected[i], "R@" + std::to_string(ks[i]) + " = " + fmt("%.17g", got));
    }
    std::mt19937_64 rng(505);
    for (int t = 0; t < 1000; ++t) {
        const std::size_t n = 1 + rng() % 80, q = 1 + rng() % 10;
        const auto u = universe(n);
        std::vector<RetrievalResult> rs;
        std::vector<std::string> ts;
        std::vector<std::vector<std::string>> subsets;
        for (std::size_t i = 0; i < q; ++i) {
            auto shuffled = u;
            std::shuffle(shuffled.begin(), shuffled.end(), rng);
            rs.push_back(ranking(shuffled));
            ts.push_back(u[rng() % n]);
            subsets.push_back(u);
        }
        double prev = 0.0;
        for (std::size_t k = 1; k <= n + 2; ++k) {
            const double r = recall_at_k(rs, ts, k);
            o.require(r >= prev, "recall decreased at k=" + std::to_string(k));
            o.require(subset_recall(rs, ts, subsets, k) == r, "subset recall differs from recall");
            prev = r;
        }
        o.require(prev == 1.0, "recall at k=N below 1");
    }
    if (o.pass) o.detail = "fixture exact, 1000 random rankings monotone";
    return o;
}

Outcome ac6() {
    Outcome o;
    const SyntheticTask task = make_joint_task(32, 42);
    TrainConfig cfg;
    cfg.layers = 1;
    cfg.heads = 2;
    cfg.batch_size = 8;
    cfg.learning_rate = 3e-4;
    cfg.seed = 42;
    cfg.epochs = 1;
    const Index targets = build_index(task.targets);
    TrainState state = initial_state(cfg, 32);
    const auto samples = resolve_samples(task.triplets, task.queries, DescriptionSource::from_store(task.descriptions),
                                         targets, state.params.config);
    EvalOptions eo;
    eo.ks = {1};
    double r1 = 0.0;
    bool alpha_ok = true;
    while (state.epochs_done < 200 && r1 < 1.0) {
        train(state, samples, targets, cfg);
        const double a = state.params.alpha();
        alpha_ok = alpha_ok && a > 0.0 && a < 1.0;
        r1 = evaluate_samples(samples, state.params, targets, eo).recall[0];
    }
    bool finite = true;
    for (double l : state.loss_trace) finite = finite && std::isfinite(l);
    o.require(finite, "non-finite loss");
    o.require(alpha_ok, "alpha left (0, 1)");
    o.require(r1 == 1.0, "R@1 " + fmt("%.4f", r1) + " after 200 epochs");
    if (o.pass)
        o.detail = "R@1 = 1.0 at epoch " + std::to_string(state.epochs_done) + ", loss " +
                   fmt("%.4f", state.loss_trace.front()) + " -> " + fmt("%.4f", state.loss_trace.back()) +
                   ", alpha " + fmt("%.4f", state.params.alpha());
    return o;
}

Outcome ac7() {
    Outcome o;
    const std::size_t n = 100;
    std::size_t hits = 0, trials = 0;
    for (std::uint32_t seed = 1; seed <= 20; ++seed) {
        const SyntheticTask task = make_random_task(n, 100, 32, 1000 + seed);
        const Index targets = build_index(task.targets);
        const FusionParams p = init_params(FusionConfig{32, 2, 4, kDefaultVocab, kDefaultMaxLen, seed});
        const auto samples =
            resolve_samples(task.triplets, task.queries, DescriptionSource::from_store(task.descriptions), targets, p.config);
        EvalOptions eo;
        eo.ks = {1};
        const double r1 = evaluate_samples(samples, p, targets, eo).recall[0];
        hits += static_cast<std::size_t>(std::lround(r1 * static_cast<double>(samples.size())));
        trials += samples.size();
    }
    const double p0 = 1.0 / static_cast<double>(n);
    const double rate = static_cast<double>(hits) / static_cast<double>(trials);
    const double sigma = std::sqrt(p0 * (1.0 - p0) / static_cast<double>(trials));
    const double z = (rate - p0) / sigma;
    o.require(std::abs(z) <= 3.0, "pooled R@1 " + fmt("%.4f", rate) + " is " + fmt("%.2f", z) + " sigma from 0.01");
    if (o.pass)
        o.detail = "pooled R@1 " + fmt("%.4f", rate) + " over " + std::to_string(trials) + " queries, z = " +
                   fmt("%.2f", z);
    return o;
}

Outcome ac8() {
    Outcome o;
    const SyntheticTask task = make_joint_task(32, 42);
    const Index targets = build_index(task.targets);
    TrainConfig cfg;
    cfg.layers = 1;
    cfg.heads = 2;
    cfg.vocab = 256;
    cfg.max_len = 16;
    cfg.epochs = 60;
    cfg.learning_rate = 1e-3;
    TrainState trained[2] = {initial_state(cfg, 32), initial_state(cfg, 32)};
    const auto samples = resolve_samples(task.triplets, task.queries, DescriptionSource::from_store(task.descriptions),
                                         targets, trained[0].params.config);
    const FusionParams untrained = trained[0].params;

    const ComparisonReport same = compare_fusion(samples, targets, FusionSlot{&untrained, FusionMode::unified, {}},
                                                 FusionSlot{&untrained, FusionMode::unified, {}});
    o.require(same.methods.size() == 2, "report lacks two methods");
    o.require(same.methods[0].similarities == same.methods[1].similarities &&
                  same.methods[0].histogram == same.methods[1].histogram && same.methods[0].mean == same.methods[1].mean &&
                  same.methods[0].median == same.methods[1].median,
              "identical slots gave different distributions");

    for (int i = 0; i < 2; ++i) {
        cfg.fusion = i == 0 ? FusionMode::unified : FusionMode::pairwise;
        train(trained[i], samples, targets, cfg);
    }
    const ComparisonReport cmp = compare_fusion(samples, targets, FusionSlot{&trained[0].params, FusionMode::unified, {}},
                                                FusionSlot{&trained[1].params, FusionMode::pairwise, {}});
    const std::string csv = cmp.to_csv();
    const auto lines = std::count(csv.begin(), csv.end(), '\n');
    o.require(csv.rfind("method,bin_lo,bin_hi,count\n", 0) == 0, "bad CSV header");
    o.require(lines == 1 + 2 * 40 + 1 + 1 + 2, "unexpected CSV line count " + std::to_string(lines));
    for (const auto& m : cmp.methods) {
        o.require(m.mean >= -1.0 && m.mean <= 1.0, "mean outside [-1, 1]");
        o.require(std::accumulate(m.histogram.begin(), m.histogram.end(), std::size_t{0}) == samples.size(),
                  "histogram does not cover every sample");
    }
    if (o.pass) {
        const double mu = cmp.methods[0].mean, mp = cmp.methods[1].mean;
        o.detail = "unified mean " + fmt("%.4f", mu) + ", pairwise mean " + fmt("%.4f", mp) + " (" +
                   (mu > mp ? "unified higher" : mu < mp ? "pairwise higher" : "equal") + ")";
    }
    return o;
}

Outcome ac9() {
    Outcome o;
    std::mt19937_64 rng(909);
    const fs::path dir = fs::temp_directory_path() / "covr_acceptance_formats";
    fs::remove_all(dir);
    fs::create_directories(dir);

    const SyntheticTask task = make_random_task(500, 200, 48, 9);
    const std::string store_path = (dir / "targets.cvre").string();
    write_embedding_store(task.targets, store_path);
    const EmbeddingStore back = load_embedding_store(store_path);
    o.require(bitwise_equal(task.targets, back), "CVRE round trip not bitwise");
    o.require(encode_embedding_store(back) == binary::read_file(store_path), "CVRE re-encode differs");

    TrainConfig cfg;
    cfg.layers = 2;
    cfg.heads = 4;
    cfg.vocab = 512;
    const FusionParams p = init_params(cfg.fusion_config(48));
    const std::string ckpt = encode_checkpoint(p);
    o.require(decode_checkpoint(ckpt) == p && encode_checkpoint(decode_checkpoint(ckpt)) == ckpt,
              "CVRP checkpoint round trip not bitwise");
    Optimizer opt = make_optimizer(OptimizerKind::adam, 1e-3, p);
    FusionParams pp = p, g = FusionParams::zeros(p.config);
    for (Tensor* t : g.tensors())
        for (double& v : t->values()) v = std::normal_distribution<double>(0, 1)(rng);
    opt.step(pp, g);
    opt.round_state_to_storage();
    save_optimizer(opt, (dir / "optimizer.cvrp").string());
    o.require(load_optimizer((dir / "optimizer.cvrp").string(), p) == opt, "optimizer state round trip differs");

    const std::string trip_path = (dir / "triplets.jsonl").string();
    write_triplets(task.triplets, trip_path);
    const std::string first = binary::read_file(trip_path);
    o.require(read_triplets(trip_path) == task.triplets, "JSONL read of written triplets differs");
    write_triplets(read_triplets(trip_path), trip_path);
    o.require(binary::read_file(trip_path) == first, "JSONL write of read triplets differs");

    auto expect_kind = [&](const std::string& label, const std::function<void()>& f, ErrorKind kind) {
        try {
            f();
            o.require(false, label + ": no error");
        } catch (const Error& e) {
            o.require(e.kind() == kind, label + ": wrong error class");
        }
    };
    const std::string store_bytes = binary::read_file(store_path);
    expect_kind("CVRE bad magic", [&] { decode_embedding_store("XVRE" + store_bytes.substr(4)); }, ErrorKind::format);
    expect_kind("CVRE truncated", [&] { decode_embedding_store(store_bytes.substr(0, store_bytes.size() - 3)); },
                ErrorKind::format);
    expect_kind("CVRP truncated", [&] { decode_checkpoint(ckpt.substr(0, ckpt.size() / 2)); }, ErrorKind::format);
    expect_kind("JSONL malformed", [&] {
        std::istringstream in("{\"query_id\": \"a\",\n");
        read_triplets(in);
    }, ErrorKind::data);
    expect_kind("missing file", [&] { load_embedding_store((dir / "absent.cvre").string()); }, ErrorKind::io);

    // exit codes through the command-line entry point
    binary::write_file((dir / "checkpoint.cvrp").string(), ckpt);
    binary::write_file((dir / "queries.cvre").string(), encode_embedding_store(task.queries));
    binary::write_file((dir / "descriptions.cvre").string(), encode_embedding_store(task.descriptions));
    auto eval_with = [&](const std::string& targets_file, const std::string& checkpoint) {
        std::ostringstream out, err;
        return cli::run({"eval", "--checkpoint", checkpoint, "--triplets", trip_path, "--query-store",
                         (dir / "queries.cvre").string(), "--desc-store", (dir / "descriptions.cvre").string(),
                         "--target-store", targets_file, "--manifest", (dir / "m.txt").string(), "--report",
                         (dir / "r.txt").string()},
                        out, err);
    };
    o.require(eval_with(store_path, (dir / "checkpoint.cvrp").string()) == 0, "clean eval did not exit 0");
    binary::write_file((dir / "bad.cvre").string(), store_bytes.substr(0, 30));
    o.require(eval_with((dir / "bad.cvre").string(), (dir / "checkpoint.cvrp").string()) == 3,
              "corrupt store exit code");
    binary::write_file((dir / "bad.cvrp").string(), "CVRP");
    o.require(eval_with(store_path, (dir / "bad.cvrp").string()) == 3, "corrupt checkpoint exit code");
    o.require(exit_code(ErrorKind::format) == 3 && exit_code(ErrorKind::data) == 3 && exit_code(ErrorKind::io) == 3 &&
                  exit_code(ErrorKind::config) == 2 && exit_code(ErrorKind::shape) == 2 &&
                  exit_code(ErrorKind::numeric) == 4,
              "exit code table");
    fs::remove_all(dir);
    if (o.pass) o.detail = "CVRE, CVRP, JSONL identities; corrupt fixtures rejected";
    return o;
}

Outcome ac10() {
    Outcome o;
    o.require(hallucination_gate(0.39, 0.4) == GateDecision::reject, "0.39 accepted");
    o.require(hallucination_gate(0.40, 0.4) == GateDecision::accept, "0.40 rejected");
    o.require(hallucination_gate(0.95, 0.4) == GateDecision::accept, "0.95 rejected");
    bool seen_accept = false;
    for (int i = 0; i <= 1000; ++i) {
        const bool a = hallucination_gate(i / 1000.0, 0.4) == GateDecision::accept;
        o.require(!(seen_accept && !a), "not monotone at " + fmt("%.3f", i / 1000.0));
        seen_accept = seen_accept || a;
    }
    if (o.pass) o.detail = "fixtures and 0.0-1.0 sweep";
    return o;
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        Outcome (*fn)();
        double limit_s;
    };
    const Criterion criteria[] = {{"AC1", ac1, 1},  {"AC2", ac2, 5},   {"AC3", ac3, 60}, {"AC4", ac4, 30},
                                  {"AC5", ac5, 5},  {"AC6", ac6, 120}, {"AC7", ac7, 60}, {"AC8", ac8, 60},
                                  {"AC9", ac9, 10}, {"AC10", ac10, 1}};
    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.fn();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (o.pass && secs >= c.limit_s) {
            o.pass = false;
            o.detail = "runtime limit " + fmt("%.0f", c.limit_s) + " s exceeded";
        }
        std::printf("%s %s (%.3f s) %s\n", c.name, o.pass ? "PASS" : "FAIL", secs, o.detail.c_str());
        std::fflush(stdout);
        failures += o.pass ? 0 : 1;
    }
    return failures == 0 ? 0 : 1;
}

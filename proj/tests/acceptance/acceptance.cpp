// Acceptance suite: one PASS/FAIL line per primary criterion. Exit status is
// the number of failing criteria (0 when everything passes).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "simquery/baseline.hpp"
#include "simquery/binary_io.hpp"
#include "simquery/classify.hpp"
#include "simquery/cli.hpp"
#include "simquery/experiment.hpp"
#include "simquery/index.hpp"
#include "simquery/log.hpp"
#include "simquery/metrics.hpp"
#include "simquery/sweep.hpp"
#include "support/synthetic.hpp"

using namespace simquery;
namespace st = simquery::testing;
using json = nlohmann::json;

namespace {

// Outcome of one criterion: pass flag plus a short measured detail.
struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::vector<std::string> ids_of(const NeighborSet& ns) {
    std::vector<std::string> out;
    for (const auto& n : ns.items) out.push_back(n.id);
    return out;
}

Verdict exact_search_oracle() {
    const std::size_t dims[] = {8, 64};
    const std::size_t sizes[] = {10, 200, 1000};
    const std::size_t ks[] = {1, 5, 31};
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < 100; ++i) {
        const std::size_t dim = dims[i % 2], size = sizes[(i / 2) % 3], k = ks[(i / 6) % 3];
        const auto ix = QueryIndex::from_entries(st::entries_from(st::random_unit_vectors(size, dim, 1000 + i)), {});
        const auto q = st::random_unit_vectors(1, dim, 5000 + i)[0];
        if (ids_of(search_topk(ix, q, k)) != st::full_sort_topk(ix, q, k)) ++mismatches;
    }
    return {mismatches == 0, std::to_string(100 - mismatches) + "/100 instances match the full-sort oracle"};
}

Verdict hnsw_recall() {
    const auto vs = st::random_unit_vectors(1000, 64, 77);
    BuildOptions h;
    h.mode = IndexMode::hnsw;
    h.hnsw.seed = 77;
    const auto ann = QueryIndex::from_entries(st::entries_from(vs), h);
    const auto exact = QueryIndex::from_entries(st::entries_from(vs), {});
    const auto queries = st::random_unit_vectors(500, 64, 78);
    const double recall = measure_recall(ann, exact, queries, 31);
    const double full = measure_recall(ann, exact, queries, 31, {ann.size()});
    return {recall >= 0.95 && full == 1.0,
            "recall@31 " + fmt("%.4f", recall) + " (default ef), " + fmt("%.4f", full) + " (ef = index size)"};
}

Verdict end_to_end_clusters() {
    // Unit centers are sqrt(2) apart; sigma 0.05 gives separation ~28 sigma.
    const auto train = st::gaussian_clusters(3, 40, 16, 0.05, 101, "tr");
    const auto test = st::gaussian_clusters(3, 30, 16, 0.05, 102, "te");
    SamplingPlan plan;
    plan.shots_per_class = 31;
    plan.seed = 5;
    const Dataset index_set = sample_balanced(Dataset(train.records), plan);
    const auto ix = build_index(index_set, train.store, {});
    const Dataset gold(test.records);
    std::vector<LabeledPrediction> preds;
    for (const auto& r : gold.records()) preds.push_back({r.id, classify_query(ix, test.store.at(r.id), 31).predicted_label});
    const double acc = accuracy(preds, gold);
    return {index_set.size() == 93 && acc == 1.0,
            "index " + std::to_string(index_set.size()) + " entries, accuracy " + fmt("%.4f", acc)};
}

NeighborSet random_set(SplitMix64& rng) {
    static const char* alphabet[] = {"A", "B", "C", "D"};
    const std::size_t n = 1 + rng.below(15);
    const std::size_t labels = 1 + rng.below(4);
    NeighborSet ns;
    for (std::size_t i = 0; i < n; ++i) {
        ns.items.push_back({static_cast<double>(rng.below(9)) / 8.0, "n" + std::to_string(i), alphabet[rng.below(labels)], "en"});
    }
    std::stable_sort(ns.items.begin(), ns.items.end(),
                     [](const Neighbor& a, const Neighbor& b) { return a.similarity > b.similarity; });
    ns.k_requested = n;
    return ns;
}

Verdict vote_properties() {
    SplitMix64 rng(2718);
    std::size_t majority_bad = 0, total_bad = 0, perm_bad = 0;
    constexpr std::size_t trials = 1000;
    for (std::size_t t = 0; t < trials; ++t) {
        // Strict majority: > n/2 slots carry "Z" with the lowest similarity.
        auto ns = random_set(rng);
        std::vector<std::size_t> slots(ns.items.size());
        for (std::size_t i = 0; i < slots.size(); ++i) slots[i] = i;
        shuffle(slots, rng);
        for (std::size_t i = 0; i < ns.items.size() / 2 + 1; ++i) {
            ns.items[slots[i]].label = "Z";
            ns.items[slots[i]].similarity = 0.0;
        }
        const auto pm = resolve_label(ns);
        majority_bad += !(pm.predicted_label == "Z" && !pm.tie_broken);

        // Totality: always a label, always one of the top-count labels,
        // never an unresolved state.
        const auto ts = random_set(rng);
        const auto pt = resolve_label(ts);
        std::size_t top = 0;
        for (const auto& [_, c] : pt.vote_counts) top = std::max(top, c);
        std::size_t tied = 0;
        for (const auto& [_, c] : pt.vote_counts) tied += c == top;
        total_bad += pt.predicted_label.empty() || pt.vote_counts.at(pt.predicted_label) != top ||
                     pt.tie_broken != (tied > 1) || !(resolve_label(ts) == pt);

        // Permutation invariance.
        auto permuted = ts;
        shuffle(permuted.items, rng);
        const auto pp = resolve_label(permuted);
        perm_bad += pp.predicted_label != pt.predicted_label || pp.tie_broken != pt.tie_broken;
    }
    return {majority_bad + total_bad + perm_bad == 0,
            std::to_string(trials) + " sets each; violations majority=" + std::to_string(majority_bad) +
                " totality=" + std::to_string(total_bad) + " permutation=" + std::to_string(perm_bad)};
}

Dataset gold_of(const std::vector<std::string>& labels) {
    std::vector<QueryRecord> rs;
    for (std::size_t i = 0; i < labels.size(); ++i) rs.push_back({"g" + std::to_string(i), "t", labels[i], "en", "g" + std::to_string(i)});
    return Dataset(std::move(rs));
}

std::vector<LabeledPrediction> preds_of(const std::vector<std::string>& labels) {
    std::vector<LabeledPrediction> ps;
    for (std::size_t i = 0; i < labels.size(); ++i) ps.push_back({"g" + std::to_string(i), labels[i]});
    return ps;
}

Verdict metrics_fixtures() {
    const auto gold = gold_of({"A", "A", "B", "B"});
    const auto preds = preds_of({"A", "B", "B", "B"});
    const double acc = accuracy(preds, gold);
    const double f1 = macro_f1(preds, gold);
    bool ok = acc == 0.75 && std::abs(f1 - 0.7333) <= 1e-4;
    SplitMix64 rng(31);
    std::size_t disagreements = 0;
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 1 + rng.below(80), classes = 1 + rng.below(6);
        std::vector<std::string> g, p;
        for (std::size_t i = 0; i < n; ++i) {
            g.push_back("L" + std::to_string(rng.below(classes)));
            p.push_back("L" + std::to_string(rng.below(classes + 1)));
        }
        const auto gd = gold_of(g);
        const auto pd = preds_of(p);
        const auto cm = confusion_matrix(pd, gd);
        disagreements += std::abs(cm.accuracy() - accuracy(pd, gd)) > 1e-12 ||
                         std::abs(cm.macro_f1() - macro_f1(pd, gd)) > 1e-12;
    }
    ok = ok && disagreements == 0;
    return {ok, "accuracy " + fmt("%.4f", acc) + ", macro-F1 " + fmt("%.4f", f1) + "; two-path agreement " +
                    std::to_string(100 - disagreements) + "/100"};
}

double gradient_error(std::size_t dim, std::size_t classes, std::uint64_t seed) {
    SplitMix64 rng(seed);
    TrainConfig cfg;
    cfg.l2_lambda = 0.01 * rng.uniform();
    std::vector<std::string> names;
    for (std::size_t c = 0; c < classes; ++c) names.push_back("k" + std::to_string(c));
    auto model = LogRegModel::zeros(dim, names, cfg);
    for (auto& w : model.weights) w = static_cast<float>(0.5 * rng.normal());
    for (auto& b : model.bias) b = static_cast<float>(0.5 * rng.normal());
    std::vector<std::vector<float>> xs;
    std::vector<Example> batch;
    const std::size_t n = 4 + rng.below(6);
    for (std::size_t i = 0; i < n; ++i) xs.push_back(st::random_unit(dim, rng));
    for (std::size_t i = 0; i < n; ++i) batch.push_back({xs[i], rng.below(classes)});
    const auto g = logreg_loss_grad(model, batch);
    double worst = 0.0;
    auto check = [&](float& param, double analytic) {
        const float saved = param;
        param = static_cast<float>(saved + 1e-3);
        const double hi = param, f_hi = logreg_loss_grad(model, batch).loss;
        param = static_cast<float>(saved - 1e-3);
        const double lo = param, f_lo = logreg_loss_grad(model, batch).loss;
        param = saved;
        const double numeric = (f_hi - f_lo) / (hi - lo);
        worst = std::max(worst, std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6}));
    };
    for (std::size_t i = 0; i < model.weights.size(); ++i) check(model.weights[i], g.grad_weights[i]);
    for (std::size_t c = 0; c < classes; ++c) check(model.bias[c], g.grad_bias[c]);
    return worst;
}

Verdict logreg_checks() {
    double worst = 0.0;
    for (std::uint64_t i = 0; i < 20; ++i) worst = std::max(worst, gradient_error(i % 2 ? 5 : 3, (i / 2) % 2 ? 3 : 2, 900 + i));
    const auto blobs = st::gaussian_clusters(2, 50, 8, 0.1, 17);
    std::vector<std::pair<EmbeddingVector, std::string>> ex;
    for (const auto& r : blobs.records) ex.emplace_back(blobs.store.at(r.id), r.label);
    TrainConfig cfg;
    cfg.l2_lambda = 0.0;
    cfg.epochs = 200;
    const auto model = train_logreg(ex, cfg).model;
    std::size_t ok = 0;
    for (const auto& [v, label] : ex) ok += predict_logreg(model, v).label == label;
    const double acc = static_cast<double>(ok) / static_cast<double>(ex.size());
    return {worst <= 1e-3 && acc == 1.0,
            "max relative gradient error " + fmt("%.2e", worst) + " over 20 instances; blob training accuracy " +
                fmt("%.4f", acc)};
}

Verdict sweep_and_scenarios() {
    // Part 1: prefix sweep vs independent per-k classification.
    const auto ix = QueryIndex::from_entries(st::entries_from(st::random_unit_vectors(200, 16, 60), 4), {});
    EmbeddingStore store(16, "random");
    std::vector<QueryRecord> rs;
    SplitMix64 rng(61);
    const auto qs = st::random_unit_vectors(50, 16, 62);
    for (std::size_t i = 0; i < qs.size(); ++i) {
        rs.push_back({"t" + std::to_string(i), "t", "c" + std::to_string(rng.below(4)), "en", "t" + std::to_string(i)});
        store.add(rs.back().id, qs[i]);
    }
    const Dataset test(rs);
    const auto table = sweep_k(ix, test, store);
    SweepTable oracle{store.provider_name(), {}};
    for (std::size_t k = 1; k <= 75; k += 2) {
        ConfusionMatrix cm;
        std::size_t ties = 0;
        for (const auto& r : test.records()) {
            const auto p = classify_query(ix, store.at(r.id), k);
            cm.add(r.label, p.predicted_label);
            ties += p.tie_broken;
        }
        oracle.rows.push_back({k, cm.accuracy(), cm.macro_f1(), double(ties) / double(test.size())});
    }
    const bool sweep_ok = table == oracle && table.rows.size() == 38;

    // Part 2: index language sets recorded in the manifests.
    st::TempDir dir("acceptance_scenarios");
    const std::vector<std::string> langs{"en-EN", "zh-CN", "es-ES", "fr-FR", "jp-JP", "id-ID", "sw-KE", "ur-PK"};
    const auto files = st::write_corpus(dir.path(), langs, 3, 5, 1, 16, 0.1, 63);
    const std::string base = "train = " + files.train.string() + "\ntest = " + files.test.string() +
                             "\nembeddings = " + files.embeddings.string() + "\nshots = 3\nk = 5\nseed = 1\n" +
                             "target_language = sw-KE\n";
    const auto all = run_experiment(parse_config(base + "index_filter = all_without_target\n"));
    const auto five = run_experiment(
        parse_config(base + "index_filter = explicit_list\nindex_languages = en-EN, zh-CN, es-ES, fr-FR, jp-JP\n"));
    auto langs_of = [](const ExperimentOutcome& o) {
        return json::parse(o.manifest_json).at("index_languages").get<std::vector<std::string>>();
    };
    const std::vector<std::string> want_all{"en-EN", "es-ES", "fr-FR", "id-ID", "jp-JP", "ur-PK", "zh-CN"};
    const std::vector<std::string> want_five{"en-EN", "es-ES", "fr-FR", "jp-JP", "zh-CN"};
    const bool scen_ok = langs_of(all) == want_all && langs_of(five) == want_five;
    return {sweep_ok && scen_ok, std::string("prefix sweep ") + (sweep_ok ? "equals" : "DIFFERS FROM") +
                                     " per-k oracle (38 rows); manifest language sets " +
                                     (scen_ok ? "match" : "DO NOT MATCH") + " both scenarios"};
}

Verdict determinism() {
    st::TempDir dir("acceptance_determinism");
    const auto files = st::write_corpus(dir.path(), {"en-US", "fr-FR", "sw-KE"}, 4, 8, 3, 16, 0.4, 64);
    st::write_text(dir / "cfg.txt", "name = det\ntrain = train.jsonl\ntest = test.jsonl\nembeddings = emb.qemb\n"
                                    "shots = 5\nk = 7\nindex_mode = hnsw\nseed = 3\n");
    std::ostringstream out, err;
    auto run_cli = [&](std::vector<std::string> args) { return cli::dispatch(args, out, err); };
    int rc = run_cli({"--threads", "1", "run", "--config", (dir / "cfg.txt").string(), "--out-dir", (dir / "t1").string()});
    rc |= run_cli({"--threads", "4", "run", "--config", (dir / "cfg.txt").string(), "--out-dir", (dir / "t4").string()});
    rc |= run_cli({"run", "--manifest", (dir / "t1" / "manifest.json").string(), "--out-dir", (dir / "re").string()});
    bool same = rc == 0;
    for (const char* f : {"report.json", "report.txt", "predictions.jsonl", "manifest.json"}) {
        const auto a = read_file_bytes(dir / "t1" / f);
        same = same && a == read_file_bytes(dir / "t4" / f) && a == read_file_bytes(dir / "re" / f);
    }
    return {same, std::string("manifest re-run and --threads 1/4 outputs ") + (same ? "byte-identical" : "DIFFER")};
}

}  // namespace

int main() {
    log::set_min_level(log::Level::error);
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"exact-search oracle equivalence", exact_search_oracle},
        {"HNSW recall", hnsw_recall},
        {"end-to-end kNN classification on separated clusters", end_to_end_clusters},
        {"majority-vote properties", vote_properties},
        {"metrics fixtures and two-path equality", metrics_fixtures},
        {"logistic-regression gradient check and separable training", logreg_checks},
        {"k-sweep consistency and index language scenarios", sweep_and_scenarios},
        {"determinism (manifest re-run, thread count)", determinism},
    };
    int failures = 0;
    int n = 0;
    for (const auto& [name, check] : criteria) {
        ++n;
        const auto start = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = check();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("%s [%d] %s: %s (%.2fs)\n", v.pass ? "PASS" : "FAIL", n, name.c_str(), v.detail.c_str(), secs);
        failures += v.pass ? 0 : 1;
    }
    std::printf("%d/%d criteria passed\n", n - failures, n);
    return failures;
}

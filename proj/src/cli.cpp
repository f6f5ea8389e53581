#include "simquery/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "simquery/baseline.hpp"
#include "simquery/binary_io.hpp"
#include "simquery/classify.hpp"
#include "simquery/dataset.hpp"
#include "simquery/embedding.hpp"
#include "simquery/error.hpp"
#include "simquery/experiment.hpp"
#include "simquery/index.hpp"
#include "simquery/log.hpp"
#include "simquery/sweep.hpp"

namespace simquery::cli {
namespace {

using json = nlohmann::ordered_json;

std::size_t edit_distance(const std::string& a, const std::string& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

struct Globals {
    std::size_t threads = 0;
    std::uint64_t seed = 0;
    bool seed_given = false;
    bool quiet = false;
};

std::size_t threads_from_env() {
    if (const char* env = std::getenv("SIMQUERY_THREADS")) {
        try {
            return static_cast<std::size_t>(std::stoul(env));
        } catch (const std::exception&) {
            throw UsageError(std::string("SIMQUERY_THREADS must be an integer, got '") + env + "'");
        }
    }
    return 0;
}

EmbeddingStore load_stores(const std::vector<std::string>& paths) {
    EmbeddingStore merged;
    for (const auto& p : paths) merged.merge(load_embedding_store(p));
    return merged;
}

struct DatasetFlags {
    std::string path;
    std::string format = "jsonl";
    std::vector<std::string> include_langs;
    std::vector<std::string> exclude_langs;
    std::size_t shots = 0;
    std::vector<std::string> sample_langs;
    bool clamp = false;
    std::string key_delimiter = "_";

    void add_to(CLI::App& app, bool with_sampling) {
        app.add_option("--dataset", path, "Dataset file")->required();
        app.add_option("--format", format, "jsonl or tsv")->check(CLI::IsMember({"jsonl", "tsv"}));
        app.add_option("--semantic-key-delimiter", key_delimiter, "Delimiter deriving semantic keys from ids");
        if (!with_sampling) return;
        app.add_option("--include-langs", include_langs, "Keep only these language tags")->delimiter(',');
        app.add_option("--exclude-langs", exclude_langs, "Drop these language tags")->delimiter(',');
        app.add_option("--shots", shots, "Sample N records per class (0 = no sampling)");
        app.add_option("--sample-langs", sample_langs, "Stratify sampling per (class, language)")->delimiter(',');
        app.add_flag("--clamp-shots", clamp, "Shrink N for classes with fewer records");
    }

    Dataset load(std::uint64_t seed) const {
        Dataset d = load_dataset(path, parse_dataset_format(format), {key_delimiter});
        if (!include_langs.empty()) d = filter_by_language(d, FilterMode::include, include_langs);
        if (!exclude_langs.empty()) d = filter_by_language(d, FilterMode::exclude, exclude_langs);
        if (shots > 0) {
            SamplingPlan plan;
            plan.shots_per_class = shots;
            plan.languages = sample_langs;
            plan.seed = seed;
            plan.clamp_to_available = clamp;
            d = sample_balanced(d, plan);
        }
        return d;
    }
};

std::string prediction_line(const std::string& id, const Prediction& p) {
    json votes = json::object();
    for (const auto& [label, n] : p.vote_counts) votes[label] = n;
    json top = json::array();
    for (const auto& n : p.support.items) top.push_back({{"id", n.id}, {"label", n.label}, {"similarity", n.similarity}});
    return json{{"id", id}, {"predicted_label", p.predicted_label}, {"votes", votes}, {"tie_broken", p.tie_broken},
                {"top", top}}.dump();
}

void inspect_file(const std::string& path, std::ostream& out) {
    const auto bytes = read_file_bytes(path);
    if (bytes.size() < 4) throw DataError(path + ": too short to identify");
    const std::string magic(bytes.begin(), bytes.begin() + 4);
    if (magic == "QEMB") {
        const auto store = decode_qemb(bytes, path);
        const bool canonical = encode_qemb(store) == bytes;
        out << "format: QEMB\nversion: " << kQembVersion << "\ndim: " << store.dim() << "\ncount: " << store.size()
            << "\nprovider: " << store.provider_name() << "\nsorted_by_id: " << (canonical ? "yes" : "no") << "\n";
    } else if (magic == "QIDX") {
        const auto ix = QueryIndex::decode(bytes, path);
        out << "format: QIDX\nversion: " << kQidxVersion << "\nmode: " << to_string(ix.mode()) << "\ndim: " << ix.dim()
            << "\ncount: " << ix.size() << "\nclasses: " << ix.labels().size() << "\nlanguages: ";
        const auto langs = ix.languages();
        for (std::size_t i = 0; i < langs.size(); ++i) out << (i ? "," : "") << langs[i];
        out << "\n";
        if (const auto& g = ix.graph()) {
            std::size_t top = 0;
            for (std::uint32_t n = 0; n < g->links.size(); ++n) top = std::max(top, g->top_level(n));
            out << "hnsw_m: " << g->params.max_neighbors << "\nhnsw_ef_construction: " << g->params.ef_construction
                << "\nhnsw_entry_point: " << g->entry_point << "\nhnsw_max_level: " << top << "\n";
        }
    } else if (magic == "QLRM") {
        const auto m = decode_qlrm(bytes, path);
        out << "format: QLRM\nversion: " << kQlrmVersion << "\ndim: " << m.dim << "\nclasses: " << m.num_classes()
            << "\nepochs: " << m.config.epochs << "\n";
    } else {
        throw DataError(path + ": unrecognized magic (expected QEMB, QIDX or QLRM)");
    }
}

}  // namespace

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names{"build-index",    "classify", "sweep-k", "train-baseline",
                                                 "eval-baseline", "run",      "compare", "embed-test",
                                                 "inspect"};
    return names;
}

std::string suggest(const std::string& unknown) {
    std::string best;
    std::size_t best_d = 3;
    for (const auto& name : subcommands()) {
        const auto d = edit_distance(unknown, name);
        if (d < best_d || (unknown.size() >= 3 && name.rfind(unknown, 0) == 0 && best.empty())) {
            best_d = std::min(d, best_d);
            best = name;
        }
    }
    return best;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"simquery: intent classification as query similarity search", "simquery"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--threads", g.threads, "Worker threads (0 = available parallelism; env SIMQUERY_THREADS)");
    auto* seed_opt = app.add_option("--seed", g.seed, "Seed for every stochastic step");
    app.add_flag("--quiet", g.quiet, "Only log warnings and errors");

    // build-index
    auto* build = app.add_subcommand("build-index", "Build a query index from a dataset and embeddings");
    DatasetFlags build_ds;
    build_ds.add_to(*build, true);
    std::vector<std::string> build_emb;
    std::string build_mode = "exact", build_out;
    std::uint32_t build_m = 16, build_efc = 100;
    bool build_unbalanced = false;
    build->add_option("--embeddings", build_emb, "QEMB file(s)")->required()->delimiter(',');
    build->add_option("--mode", build_mode, "exact or hnsw")->check(CLI::IsMember({"exact", "hnsw"}));
    build->add_option("--m", build_m, "HNSW max neighbors per node");
    build->add_option("--ef-construction", build_efc, "HNSW construction beam width");
    build->add_flag("--allow-unbalanced", build_unbalanced, "Permit unequal class counts");
    build->add_option("--out", build_out, "Output .qidx")->required();

    // classify
    auto* classify = app.add_subcommand("classify", "Classify query vectors against an index");
    std::string cls_index, cls_out, cls_dataset, cls_vote = "majority";
    std::vector<std::string> cls_emb;
    std::size_t cls_k = 31, cls_ef = 0;
    std::optional<double> cls_min_sim;
    classify->add_option("--index", cls_index, "Index file")->required();
    classify->add_option("--embeddings", cls_emb, "QEMB file(s) of the queries")->required()->delimiter(',');
    classify->add_option("--k", cls_k, "Neighbors per vote");
    classify->add_option("--dataset", cls_dataset, "Restrict to ids of this JSON-lines dataset");
    classify->add_option("--ef-search", cls_ef, "HNSW search beam (0 = max(64, 2k))");
    classify->add_option("--vote", cls_vote, "majority or similarity")->check(CLI::IsMember({"majority", "similarity"}));
    classify->add_option("--min-similarity", cls_min_sim, "Ignore neighbors below this similarity");
    classify->add_option("--out", cls_out, "Output predictions JSON-lines")->required();

    // sweep-k
    auto* sweep = app.add_subcommand("sweep-k", "Grid-search k and report accuracy/macro-F1 per k");
    std::string sw_index, sw_test, sw_format = "jsonl", sw_out, sw_plot;
    std::vector<std::string> sw_emb;
    SweepOptions sw_opts;
    sweep->add_option("--index", sw_index, "Index file")->required();
    sweep->add_option("--test", sw_test, "Test dataset")->required();
    sweep->add_option("--format", sw_format, "jsonl or tsv")->check(CLI::IsMember({"jsonl", "tsv"}));
    sweep->add_option("--embeddings", sw_emb, "QEMB file(s) with the test vectors")->required()->delimiter(',');
    sweep->add_option("--k-min", sw_opts.k_min, "Smallest k");
    sweep->add_option("--k-max", sw_opts.k_max, "Largest k");
    sweep->add_option("--step", sw_opts.step, "Grid step");
    sweep->add_option("--out", sw_out, "Output CSV")->required();
    sweep->add_option("--plot", sw_plot, "Also write an SVG line chart");

    // train-baseline
    auto* train = app.add_subcommand("train-baseline", "Train the logistic-regression classification head");
    DatasetFlags train_ds;
    train_ds.add_to(*train, true);
    std::vector<std::string> train_emb;
    std::string train_out;
    TrainConfig train_cfg;
    train->add_option("--embeddings", train_emb, "QEMB file(s)")->required()->delimiter(',');
    train->add_option("--lr", train_cfg.learning_rate, "Learning rate");
    train->add_option("--l2", train_cfg.l2_lambda, "L2 penalty lambda");
    train->add_option("--epochs", train_cfg.epochs, "Epochs");
    train->add_option("--batch-size", train_cfg.batch_size, "Mini-batch size");
    train->add_option("--out", train_out, "Output .qlrm")->required();

    // eval-baseline
    auto* evalb = app.add_subcommand("eval-baseline", "Evaluate a trained classification head");
    std::string eb_model, eb_test, eb_format = "jsonl", eb_translated, eb_out;
    std::vector<std::string> eb_emb, eb_temb;
    evalb->add_option("--model", eb_model, "Model file")->required();
    evalb->add_option("--test", eb_test, "Test dataset (gold labels)")->required();
    evalb->add_option("--format", eb_format, "jsonl or tsv")->check(CLI::IsMember({"jsonl", "tsv"}));
    evalb->add_option("--embeddings", eb_emb, "QEMB file(s) with test vectors")->required()->delimiter(',');
    evalb->add_option("--translated-test", eb_translated, "Pre-translated test set with the original ids");
    evalb->add_option("--translated-embeddings", eb_temb, "QEMB of the translated text")->delimiter(',');
    evalb->add_option("--out", eb_out, "Write the report JSON here");

    // run
    auto* run = app.add_subcommand("run", "Run an experiment config, or re-run a manifest");
    std::string run_cfg, run_manifest, run_out;
    auto* cfg_opt = run->add_option("--config", run_cfg, "Experiment config file");
    auto* man_opt = run->add_option("--manifest", run_manifest, "Re-run from a manifest.json");
    cfg_opt->excludes(man_opt);
    run->add_option("--out-dir", run_out, "Directory for report/manifest")->required();

    // compare
    auto* compare = app.add_subcommand("compare", "Tabulate several report.json files");
    std::vector<std::string> cmp_reports;
    std::string cmp_csv;
    compare->add_option("reports", cmp_reports, "report.json files")->required();
    compare->add_option("--out-csv", cmp_csv, "Also write CSV");

    // embed-test
    auto* embed = app.add_subcommand("embed-test", "Embed a dataset with the deterministic test embedder");
    DatasetFlags embed_ds;
    embed_ds.add_to(*embed, false);
    std::size_t embed_dim = 64;
    std::string embed_out;
    embed->add_option("--dim", embed_dim, "Vector dimension (>= 8)");
    embed->add_option("--out", embed_out, "Output .qemb")->required();

    // inspect
    auto* inspect = app.add_subcommand("inspect", "Print the header of a .qemb/.qidx/.qlrm file");
    std::string inspect_path;
    inspect->add_option("file", inspect_path, "File to inspect")->required();

    if (!args.empty() && args.front().rfind("-", 0) != 0) {
        const auto& names = subcommands();
        if (std::find(names.begin(), names.end(), args.front()) == names.end()) {
            err << "error: unknown subcommand '" << args.front() << "'";
            const auto s = suggest(args.front());
            if (!s.empty()) err << " (did you mean '" << s << "'?)";
            err << "\n" << app.help();
            return 1;
        }
    }

    std::vector<std::string> argv_store{"simquery"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_store) argv.push_back(a.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        const auto subs = app.get_subcommands();
        err << (subs.empty() ? app.help() : subs.front()->help());
        return 1;
    }
    g.seed_given = seed_opt->count() > 0;

    log::Sink previous = log::set_sink([&err](log::Level, const std::string& line) { err << line << "\n"; });
    struct Restore {
        log::Sink sink;
        ~Restore() {
            log::set_sink(std::move(sink));
            log::set_min_level(log::Level::info);
        }
    } restore{std::move(previous)};
    if (g.quiet) log::set_min_level(log::Level::warn);

    try {
        if (g.threads == 0) g.threads = threads_from_env();
        if (*build) {
            const auto d = build_ds.load(g.seed);
            const auto store = load_stores(build_emb);
            BuildOptions opts;
            opts.mode = parse_index_mode(build_mode);
            opts.hnsw = {build_m, build_efc, g.seed};
            opts.allow_unbalanced = build_unbalanced || build_ds.clamp;
            const auto ix = build_index(d, store, opts);
            save_index(ix, build_out);
            log::info("build_index.done", {{"entries", std::to_string(ix.size())},
                                           {"mode", to_string(ix.mode())},
                                           {"out", build_out}});
        } else if (*classify) {
            const auto ix = load_index(cls_index);
            const auto store = load_stores(cls_emb);
            std::vector<std::pair<std::string, EmbeddingVector>> queries;
            if (!cls_dataset.empty()) {
                const auto subset = load_dataset(cls_dataset, DatasetFormat::jsonl);
                for (const auto& r : subset.records()) {
                    queries.emplace_back(r.id, store.at(r.id));
                }
            } else {
                for (const auto& [id, v] : store.entries()) queries.emplace_back(id, v);
            }
            VoteOptions vote;
            vote.weighting = parse_vote_weighting(cls_vote);
            vote.min_similarity = cls_min_sim;
            const auto items = classify_batch(ix, queries, cls_k, vote, {cls_ef}, g.threads);
            std::string text;
            std::size_t failures = 0;
            for (const auto& it : items) {
                if (!it.ok()) {
                    ++failures;
                    log::warn("classify.item_failed", {{"id", it.id}, {"error", it.error()}});
                    continue;
                }
                text += prediction_line(it.id, it.prediction()) + "\n";
            }
            write_file_text(cls_out, text);
            log::info("classify.done", {{"queries", std::to_string(items.size())}, {"failed", std::to_string(failures)}});
            if (failures > 0) return 2;
        } else if (*sweep) {
            const auto ix = load_index(sw_index);
            const auto test = load_dataset(sw_test, parse_dataset_format(sw_format));
            const auto store = load_stores(sw_emb);
            sw_opts.threads = g.threads;
            const auto table = sweep_k(ix, test, store, sw_opts);
            write_file_text(sw_out, sweep_to_csv(table));
            if (!sw_plot.empty()) write_file_text(sw_plot, sweep_to_svg(table));
            const auto agg = aggregate_sweeps({table});
            out << "best_k_accuracy=" << agg.best_k_accuracy << " best_k_macro_f1=" << agg.best_k_macro_f1 << "\n";
        } else if (*train) {
            const auto d = train_ds.load(g.seed);
            const auto store = load_stores(train_emb);
            train_cfg.seed = g.seed;
            const auto result = train_logreg(d, store, train_cfg);
            save_model(result.model, train_out);
            log::info("train.done", {{"initial_loss", std::to_string(result.loss_trace.front())},
                                     {"final_loss", std::to_string(result.loss_trace.back())},
                                     {"out", train_out}});
        } else if (*evalb) {
            const auto model = load_model(eb_model);
            const auto test = load_dataset(eb_test, parse_dataset_format(eb_format));
            MetricsReport rep;
            if (!eb_translated.empty()) {
                if (eb_temb.empty()) throw UsageError("--translated-test requires --translated-embeddings");
                const auto translated = load_dataset(eb_translated, parse_dataset_format(eb_format));
                rep = translation_pipeline_eval(translated, test, model, load_stores(eb_temb));
            } else {
                const auto store = load_stores(eb_emb);
                rep = evaluate(predict_dataset(model, test, store), test, model.class_order);
                rep.method = "classification";
            }
            rep.name = eb_model;
            rep.index_size = 0;
            out << rep.to_text();
            if (!eb_out.empty()) write_file_text(eb_out, rep.to_json());
        } else if (*run) {
            RunOptions ro{g.threads};
            ExperimentOutcome outcome;
            if (!run_manifest.empty()) {
                outcome = rerun_from_manifest(run_manifest, ro);
            } else {
                if (run_cfg.empty()) throw UsageError("run: pass --config or --manifest");
                auto cfg = load_config(run_cfg);
                if (g.seed_given) {
                    cfg.sampling.seed = g.seed;
                    cfg.hnsw.seed = g.seed;
                    cfg.train_config.seed = g.seed;
                }
                outcome = run_experiment(cfg, ro);
            }
            write_outcome(outcome, run_out);
            out << outcome.report.to_text();
        } else if (*compare) {
            std::vector<MetricsReport> reports;
            for (const auto& p : cmp_reports) {
                const auto bytes = read_file_bytes(p);
                reports.push_back(MetricsReport::from_json(std::string(bytes.begin(), bytes.end())));
            }
            const auto table = compare_reports(reports);
            out << table.to_text();
            if (!cmp_csv.empty()) write_file_text(cmp_csv, table.to_csv());
        } else if (*embed) {
            const auto d = embed_ds.load(g.seed);
            EmbeddingStore store(embed_dim, "test-hash:dim=" + std::to_string(embed_dim) + ":seed=" + std::to_string(g.seed));
            for (const auto& r : d.records()) store.add(r.id, test_embed(r.text, embed_dim, g.seed));
            save_embedding_store(store, embed_out);
            log::info("embed_test.done", {{"records", std::to_string(store.size())}, {"out", embed_out}});
        } else if (*inspect) {
            inspect_file(inspect_path, out);
        }
    } catch (const Error& e) {
        log::emit(log::Level::error, "failed", {{"message", e.what()}});
        return static_cast<int>(e.kind());
    } catch (const std::exception& e) {
        log::emit(log::Level::error, "failed", {{"message", e.what()}});
        return 3;
    }
    return 0;
}

}  // namespace simquery::cli

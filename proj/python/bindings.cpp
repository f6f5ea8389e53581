#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "simquery/baseline.hpp"
#include "simquery/classify.hpp"
#include "simquery/dataset.hpp"
#include "simquery/embedding.hpp"
#include "simquery/error.hpp"
#include "simquery/experiment.hpp"
#include "simquery/index.hpp"
#include "simquery/metrics.hpp"
#include "simquery/sweep.hpp"

namespace py = pybind11;
using namespace simquery;

namespace {

std::vector<LabeledPrediction> to_predictions(const std::vector<std::pair<std::string, std::string>>& pairs) {
    std::vector<LabeledPrediction> out;
    out.reserve(pairs.size());
    for (const auto& [id, label] : pairs) out.push_back({id, label});
    return out;
}

VoteOptions vote_options(const std::string& vote, std::optional<double> min_similarity) {
    return {parse_vote_weighting(vote), min_similarity};
}

py::dict outcome_dict(const ExperimentOutcome& o) {
    py::dict d;
    d["accuracy"] = o.report.accuracy;
    d["macro_f1"] = o.report.macro_f1;
    d["tie_rate"] = o.report.tie_rate;
    d["index_languages"] = o.report.index_languages;
    d["index_size"] = o.report.index_size;
    d["report_json"] = o.report_json;
    d["report_text"] = o.report.to_text();
    d["predictions_jsonl"] = o.predictions_jsonl;
    d["manifest_json"] = o.manifest_json;
    return d;
}

}  // namespace

PYBIND11_MODULE(simquery, m) {
    m.attr("__version__") = "0.1.0";
    m.doc() = "Few-shot intent classification by nearest-neighbor search over sentence embeddings";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<UsageError>(m, "UsageError", base.ptr());
    py::register_exception<DataError>(m, "DataError", base.ptr());
    py::register_exception<RuntimeFailure>(m, "RuntimeFailure", base.ptr());

    // --- embeddings -------------------------------------------------------
    py::class_<EmbeddingVector>(m, "EmbeddingVector")
        .def(py::init<std::vector<float>>(), py::arg("values"))
        .def_property_readonly("dim", &EmbeddingVector::dim)
        .def_property_readonly("values",
                               [](const EmbeddingVector& v) {
                                   return std::vector<float>(v.values().begin(), v.values().end());
                               })
        .def("norm", &EmbeddingVector::norm)
        .def("__len__", &EmbeddingVector::dim)
        .def(py::self == py::self);
    py::implicitly_convertible<std::vector<float>, EmbeddingVector>();

    m.def("test_embed", &test_embed, py::arg("text"), py::arg("dim"), py::arg("seed") = 0,
          "Deterministic hashed character-3-gram embedding, unit norm.");
    m.def("normalize", &normalize, py::arg("v"));
    m.def("cosine_similarity", &cosine_similarity, py::arg("a"), py::arg("b"));

    py::class_<EmbeddingStore>(m, "EmbeddingStore")
        .def(py::init<std::size_t, std::string>(), py::arg("dim"), py::arg("provider") = "")
        .def("add", &EmbeddingStore::add, py::arg("id"), py::arg("vector"))
        .def("at", &EmbeddingStore::at, py::arg("id"), py::return_value_policy::copy)
        .def("__contains__", &EmbeddingStore::contains)
        .def("__len__", &EmbeddingStore::size)
        .def_property_readonly("dim", &EmbeddingStore::dim)
        .def_property_readonly("provider", &EmbeddingStore::provider_name)
        .def("ids", [](const EmbeddingStore& s) {
            std::vector<std::string> ids;
            for (const auto& [id, _] : s.entries()) ids.push_back(id);
            return ids;
        });
    m.def("load_embedding_store", &load_embedding_store, py::arg("path"));
    m.def("save_embedding_store", &save_embedding_store, py::arg("store"), py::arg("path"));

    // --- datasets ---------------------------------------------------------
    py::class_<QueryRecord>(m, "QueryRecord")
        .def(py::init([](std::string id, std::string text, std::string label, std::string language,
                         std::string semantic_key) {
                 if (semantic_key.empty()) semantic_key = id;
                 return QueryRecord{std::move(id), std::move(text), std::move(label), std::move(language),
                                    std::move(semantic_key)};
             }),
             py::arg("id"), py::arg("text"), py::arg("label"), py::arg("language"), py::arg("semantic_key") = "")
        .def_readwrite("id", &QueryRecord::id)
        .def_readwrite("text", &QueryRecord::text)
        .def_readwrite("label", &QueryRecord::label)
        .def_readwrite("language", &QueryRecord::language)
        .def_readwrite("semantic_key", &QueryRecord::semantic_key)
        .def("__repr__", [](const QueryRecord& r) { return "QueryRecord(id='" + r.id + "', label='" + r.label + "')"; });

    py::class_<Dataset>(m, "Dataset")
        .def(py::init<std::vector<QueryRecord>>(), py::arg("records"))
        .def_property_readonly("records", &Dataset::records)
        .def_property_readonly("labels", [](const Dataset& d) {
            return std::vector<std::string>(d.label_set().begin(), d.label_set().end());
        })
        .def_property_readonly("languages", [](const Dataset& d) {
            return std::vector<std::string>(d.language_set().begin(), d.language_set().end());
        })
        .def("__len__", &Dataset::size)
        .def("to_jsonl", [](const Dataset& d) { return to_jsonl(d); });

    m.def(
        "load_dataset",
        [](const std::filesystem::path& path, const std::string& format, const std::string& delimiter) {
            return load_dataset(path, parse_dataset_format(format), {delimiter});
        },
        py::arg("path"), py::arg("format") = "jsonl", py::arg("semantic_key_delimiter") = "_");
    m.def(
        "filter_by_language",
        [](const Dataset& d, const std::string& mode, const std::vector<std::string>& tags) {
            if (mode != "include" && mode != "exclude") throw UsageError("mode must be 'include' or 'exclude'");
            return filter_by_language(d, mode == "include" ? FilterMode::include : FilterMode::exclude, tags);
        },
        py::arg("dataset"), py::arg("mode"), py::arg("tags"));
    m.def(
        "sample_balanced",
        [](const Dataset& d, std::size_t shots, std::uint64_t seed, std::vector<std::string> classes,
           std::vector<std::string> languages, bool clamp) {
            SamplingPlan plan{shots, std::move(classes), std::move(languages), seed, clamp};
            return sample_balanced(d, plan);
        },
        py::arg("dataset"), py::arg("shots") = 31, py::arg("seed") = 0, py::arg("classes") = std::vector<std::string>{},
        py::arg("languages") = std::vector<std::string>{}, py::arg("clamp") = false);
    m.def(
        "paired_semantic_sample",
        [](const Dataset& d, std::size_t shots, std::uint64_t seed, const std::vector<std::string>& set_a,
           const std::vector<std::string>& set_b) {
            SamplingPlan plan;
            plan.shots_per_class = shots;
            plan.seed = seed;
            return paired_semantic_sample(d, plan, set_a, set_b);
        },
        py::arg("dataset"), py::arg("shots"), py::arg("seed"), py::arg("set_a"), py::arg("set_b"));

    // --- index and classification ----------------------------------------
    py::class_<Neighbor>(m, "Neighbor")
        .def(py::init([](double similarity, std::string id, std::string label, std::string language) {
                 return Neighbor{similarity, std::move(id), std::move(label), std::move(language)};
             }),
             py::arg("similarity"), py::arg("id"), py::arg("label"), py::arg("language") = "")
        .def_readonly("similarity", &Neighbor::similarity)
        .def_readonly("id", &Neighbor::id)
        .def_readonly("label", &Neighbor::label)
        .def_readonly("language", &Neighbor::language)
        .def("__repr__", [](const Neighbor& n) {
            return "Neighbor(id='" + n.id + "', label='" + n.label + "', similarity=" + std::to_string(n.similarity) + ")";
        });

    py::class_<Prediction>(m, "Prediction")
        .def_readonly("predicted_label", &Prediction::predicted_label)
        .def_readonly("vote_counts", &Prediction::vote_counts)
        .def_readonly("tie_broken", &Prediction::tie_broken)
        .def_property_readonly("support", [](const Prediction& p) { return p.support.items; })
        .def("rejected", &Prediction::rejected);

    py::class_<QueryIndex>(m, "QueryIndex")
        .def_property_readonly("mode", [](const QueryIndex& ix) { return std::string(to_string(ix.mode())); })
        .def_property_readonly("dim", &QueryIndex::dim)
        .def_property_readonly("labels", &QueryIndex::labels)
        .def_property_readonly("languages", &QueryIndex::languages)
        .def("__len__", &QueryIndex::size)
        .def(
            "search",
            [](const QueryIndex& ix, const EmbeddingVector& q, std::size_t k, std::size_t ef_search) {
                return ix.search(q, k, {ef_search}).items;
            },
            py::arg("query"), py::arg("k"), py::arg("ef_search") = 0)
        .def(
            "search_exact",
            [](const QueryIndex& ix, const EmbeddingVector& q, std::size_t k) { return ix.search_exact(q, k).items; },
            py::arg("query"), py::arg("k"))
        .def("save", [](const QueryIndex& ix, const std::filesystem::path& p) { save_index(ix, p); }, py::arg("path"));

    m.def(
        "build_index",
        [](const Dataset& d, const EmbeddingStore& store, const std::string& mode, std::uint32_t m_max,
           std::uint32_t ef_construction, std::uint64_t seed, bool allow_unbalanced) {
            BuildOptions o;
            o.mode = parse_index_mode(mode);
            o.hnsw = {m_max, ef_construction, seed};
            o.allow_unbalanced = allow_unbalanced;
            return build_index(d, store, o);
        },
        py::arg("dataset"), py::arg("store"), py::arg("mode") = "exact", py::arg("max_neighbors") = 16,
        py::arg("ef_construction") = 100, py::arg("seed") = 0, py::arg("allow_unbalanced") = false);
    m.def("load_index", &load_index, py::arg("path"));
    m.def(
        "measure_recall",
        [](const QueryIndex& ann, const QueryIndex& exact, const std::vector<EmbeddingVector>& queries, std::size_t k,
           std::size_t ef_search, std::size_t threads) {
            return measure_recall(ann, exact, queries, k, {ef_search}, threads);
        },
        py::arg("ann"), py::arg("exact"), py::arg("queries"), py::arg("k"), py::arg("ef_search") = 0,
        py::arg("threads") = 1);

    m.def(
        "resolve_label",
        [](const std::vector<Neighbor>& neighbors, const std::string& vote, std::optional<double> min_similarity) {
            NeighborSet ns{neighbors, neighbors.size()};
            return resolve_label(ns, vote_options(vote, min_similarity));
        },
        py::arg("neighbors"), py::arg("vote") = "majority", py::arg("min_similarity") = py::none());
    m.def(
        "classify_query",
        [](const QueryIndex& ix, const EmbeddingVector& q, std::size_t k, const std::string& vote,
           std::optional<double> min_similarity, std::size_t ef_search) {
            return classify_query(ix, q, k, vote_options(vote, min_similarity), {ef_search});
        },
        py::arg("index"), py::arg("query"), py::arg("k") = 31, py::arg("vote") = "majority",
        py::arg("min_similarity") = py::none(), py::arg("ef_search") = 0);

    // --- evaluation -------------------------------------------------------
    m.def(
        "accuracy",
        [](const std::vector<std::pair<std::string, std::string>>& preds, const Dataset& gold) {
            return accuracy(to_predictions(preds), gold);
        },
        py::arg("predictions"), py::arg("gold"), "predictions: list of (id, label) pairs");
    m.def(
        "macro_f1",
        [](const std::vector<std::pair<std::string, std::string>>& preds, const Dataset& gold) {
            return macro_f1(to_predictions(preds), gold);
        },
        py::arg("predictions"), py::arg("gold"));
    m.def(
        "sweep_k",
        [](const QueryIndex& ix, const Dataset& test, const EmbeddingStore& store, std::size_t k_min,
           std::size_t k_max, std::size_t step, std::size_t threads) {
            SweepOptions o;
            o.k_min = k_min;
            o.k_max = k_max;
            o.step = step;
            o.threads = threads;
            py::list rows;
            for (const auto& r : sweep_k(ix, test, store, o).rows) {
                py::dict d;
                d["k"] = r.k;
                d["accuracy"] = r.accuracy;
                d["macro_f1"] = r.macro_f1;
                d["tie_rate"] = r.tie_rate;
                rows.append(d);
            }
            return rows;
        },
        py::arg("index"), py::arg("test"), py::arg("store"), py::arg("k_min") = 1, py::arg("k_max") = 75,
        py::arg("step") = 2, py::arg("threads") = 1);

    // --- classification-head baseline --------------------------------------
    py::class_<LogRegModel>(m, "LogRegModel")
        .def_readonly("dim", &LogRegModel::dim)
        .def_readonly("class_order", &LogRegModel::class_order)
        .def_readonly("weights", &LogRegModel::weights)
        .def_readonly("bias", &LogRegModel::bias)
        .def("save", [](const LogRegModel& model, const std::filesystem::path& p) { save_model(model, p); },
             py::arg("path"))
        .def(py::self == py::self);
    m.def(
        "train_logreg",
        [](const Dataset& d, const EmbeddingStore& store, double lr, double l2, std::size_t epochs,
           std::size_t batch_size, std::uint64_t seed) {
            const auto result = train_logreg(d, store, {lr, l2, epochs, batch_size, seed});
            return py::make_tuple(result.model, result.loss_trace);
        },
        py::arg("dataset"), py::arg("store"), py::arg("lr") = 0.1, py::arg("l2") = 1e-4, py::arg("epochs") = 200,
        py::arg("batch_size") = 32, py::arg("seed") = 0, "Returns (model, loss_trace).");
    m.def(
        "predict_logreg",
        [](const LogRegModel& model, const EmbeddingVector& q) {
            auto out = predict_logreg(model, q);
            return py::make_tuple(out.label, out.probabilities);
        },
        py::arg("model"), py::arg("query"), "Returns (label, probabilities in class_order).");
    m.def("load_model", &load_model, py::arg("path"));

    // --- experiments -------------------------------------------------------
    m.def(
        "run_experiment",
        [](const std::string& config_text, const std::filesystem::path& base_dir, std::size_t threads,
           std::optional<std::filesystem::path> out_dir) {
            const auto outcome = run_experiment(parse_config(config_text, base_dir), {threads});
            if (out_dir) write_outcome(outcome, *out_dir);
            return outcome_dict(outcome);
        },
        py::arg("config_text"), py::arg("base_dir") = std::filesystem::path{}, py::arg("threads") = 1,
        py::arg("out_dir") = py::none(),
        "Runs a key = value experiment config; optionally writes report/manifest files.");
    m.def(
        "rerun_from_manifest",
        [](const std::filesystem::path& manifest, std::size_t threads) {
            return outcome_dict(rerun_from_manifest(manifest, {threads}));
        },
        py::arg("manifest"), py::arg("threads") = 1);
}

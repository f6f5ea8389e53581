#include "simquery/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "simquery/binary_io.hpp"
#include "simquery/checksum.hpp"
#include "simquery/error.hpp"
#include "simquery/log.hpp"

namespace simquery {

using json = nlohmann::ordered_json;

const char* to_string(Method m) {
    switch (m) {
        case Method::sim_search: return "sim_search";
        case Method::classification: return "classification";
        case Method::translation: return "translation";
    }
    return "sim_search";
}

const char* to_string(LanguageFilter f) {
    switch (f) {
        case LanguageFilter::none: return "none";
        case LanguageFilter::all_without_target: return "all_without_target";
        case LanguageFilter::explicit_list: return "explicit_list";
    }
    return "none";
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ',';
        out += items[i];
    }
    return out;
}

std::string join_paths(const std::vector<std::filesystem::path>& paths) {
    std::vector<std::string> s;
    for (const auto& p : paths) s.push_back(p.string());
    return join(s);
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

std::size_t parse_size(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const auto n = std::stoull(v, &pos);
        if (pos != v.size() || v.front() == '-') throw std::invalid_argument(v);
        return static_cast<std::size_t>(n);
    } catch (const std::exception&) {
        throw UsageError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
    }
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw UsageError("config key '" + key + "': expected a number, got '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw UsageError("config key '" + key + "': expected true or false, got '" + v + "'");
}

template <typename F>
auto stage(const char* name, F&& body) -> decltype(body()) {
    try {
        return body();
    } catch (const Error& e) {
        throw Error(e.kind(), std::string("stage ") + name + ": " + e.what());
    } catch (const std::exception& e) {
        throw RuntimeFailure(std::string("stage ") + name + ": " + e.what());
    }
}

EmbeddingStore load_stores(const std::vector<std::filesystem::path>& paths) {
    EmbeddingStore merged;
    for (const auto& p : paths) merged.merge(load_embedding_store(p));
    return merged;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (train.empty()) throw UsageError("config: 'train' is required");
    if (test.empty()) throw UsageError("config: 'test' is required");
    if (embeddings.empty()) throw UsageError("config: 'embeddings' is required");
    if (k < 1) throw UsageError("config: 'k' must be >= 1");
    if (method == Method::translation) {
        if (translated_test.empty()) throw UsageError("config: method translation requires 'translated_test'");
        if (translated_embeddings.empty()) {
            throw UsageError("config: method translation requires 'translated_embeddings'");
        }
    }
    if (index_filter == LanguageFilter::all_without_target && target_language.empty()) {
        throw UsageError("config: index_filter all_without_target requires 'target_language'");
    }
    if (index_filter == LanguageFilter::explicit_list && index_languages.empty()) {
        throw UsageError("config: index_filter explicit_list requires 'index_languages'");
    }
    if (scheme == SamplingScheme::paired) {
        if (paired_languages.empty()) throw UsageError("config: sampling paired requires 'paired_languages'");
        if (sampling.shots_per_class == 0) throw UsageError("config: sampling paired requires 'shots' >= 1");
    }
}

std::map<std::string, std::string> ExperimentConfig::to_map() const {
    std::map<std::string, std::string> m;
    m["name"] = name;
    m["model"] = model;
    m["scenario"] = scenario;
    m["column"] = column;
    m["method"] = to_string(method);
    m["train"] = train.string();
    m["test"] = test.string();
    m["translated_test"] = translated_test.string();
    m["format"] = format == DatasetFormat::jsonl ? "jsonl" : "tsv";
    m["semantic_key_delimiter"] = semantic_key_delimiter;
    m["embeddings"] = join_paths(embeddings);
    m["translated_embeddings"] = join_paths(translated_embeddings);
    m["shots"] = std::to_string(sampling.shots_per_class);
    m["classes"] = join(sampling.classes);
    m["sample_languages"] = join(sampling.languages);
    m["clamp_shots"] = sampling.clamp_to_available ? "true" : "false";
    m["stratify_by_language"] = stratify_by_language ? "true" : "false";
    m["sampling"] = scheme == SamplingScheme::balanced ? "balanced" : "paired";
    m["paired_languages"] = join(paired_languages);
    m["index_filter"] = to_string(index_filter);
    m["index_languages"] = join(index_languages);
    m["target_language"] = target_language;
    m["k"] = std::to_string(k);
    m["index_mode"] = to_string(index_mode);
    m["hnsw_m"] = std::to_string(hnsw.max_neighbors);
    m["hnsw_ef_construction"] = std::to_string(hnsw.ef_construction);
    m["ef_search"] = std::to_string(ef_search);
    m["vote"] = vote.weighting == VoteWeighting::unweighted ? "majority" : "similarity";
    m["min_similarity"] = vote.min_similarity ? fmt_double(*vote.min_similarity) : "";
    m["allow_unbalanced"] = allow_unbalanced ? "true" : "false";
    m["lr"] = fmt_double(train_config.learning_rate);
    m["l2"] = fmt_double(train_config.l2_lambda);
    m["epochs"] = std::to_string(train_config.epochs);
    m["batch_size"] = std::to_string(train_config.batch_size);
    m["training_regime"] = training_regime == TrainingRegime::partial ? "partial" : "full";
    m["seed"] = std::to_string(sampling.seed);
    return m;
}

std::string ExperimentConfig::to_text() const {
    std::string out;
    for (const auto& [k, v] : to_map()) out += k + " = " + v + "\n";
    return out;
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
    ExperimentConfig cfg;
    auto path_of = [&](const std::string& v) -> std::filesystem::path {
        if (v.empty()) return {};
        std::filesystem::path p(v);
        if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
        return p.lexically_normal();
    };
    auto paths_of = [&](const std::string& v) {
        std::vector<std::filesystem::path> out;
        for (const auto& s : split_list(v)) out.push_back(path_of(s));
        return out;
    };
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    std::set<std::string> seen;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw UsageError("config line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string v = trim(line.substr(eq + 1));
        if (!seen.insert(key).second) throw UsageError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");

        if (key == "name") cfg.name = v;
        else if (key == "model") cfg.model = v;
        else if (key == "scenario") cfg.scenario = v;
        else if (key == "column") cfg.column = v;
        else if (key == "method") {
            if (v == "sim_search") cfg.method = Method::sim_search;
            else if (v == "classification") cfg.method = Method::classification;
            else if (v == "translation") cfg.method = Method::translation;
            else throw UsageError("config: unknown method '" + v + "'");
        } else if (key == "train") cfg.train = path_of(v);
        else if (key == "test") cfg.test = path_of(v);
        else if (key == "translated_test") cfg.translated_test = path_of(v);
        else if (key == "format") cfg.format = parse_dataset_format(v);
        else if (key == "semantic_key_delimiter") cfg.semantic_key_delimiter = v;
        else if (key == "embeddings") cfg.embeddings = paths_of(v);
        else if (key == "translated_embeddings") cfg.translated_embeddings = paths_of(v);
        else if (key == "shots") cfg.sampling.shots_per_class = parse_size(key, v);
        else if (key == "classes") cfg.sampling.classes = split_list(v);
        else if (key == "sample_languages") cfg.sampling.languages = split_list(v);
        else if (key == "clamp_shots") cfg.sampling.clamp_to_available = parse_bool(key, v);
        else if (key == "stratify_by_language") cfg.stratify_by_language = parse_bool(key, v);
        else if (key == "sampling") {
            if (v == "balanced") cfg.scheme = SamplingScheme::balanced;
            else if (v == "paired") cfg.scheme = SamplingScheme::paired;
            else throw UsageError("config: unknown sampling scheme '" + v + "'");
        } else if (key == "paired_languages") cfg.paired_languages = split_list(v);
        else if (key == "index_filter") {
            if (v == "none") cfg.index_filter = LanguageFilter::none;
            else if (v == "all_without_target") cfg.index_filter = LanguageFilter::all_without_target;
            else if (v == "explicit_list") cfg.index_filter = LanguageFilter::explicit_list;
            else throw UsageError("config: unknown index_filter '" + v + "'");
        } else if (key == "index_languages") cfg.index_languages = split_list(v);
        else if (key == "target_language") cfg.target_language = v;
        else if (key == "k") cfg.k = parse_size(key, v);
        else if (key == "index_mode") cfg.index_mode = parse_index_mode(v);
        else if (key == "hnsw_m") cfg.hnsw.max_neighbors = static_cast<std::uint32_t>(parse_size(key, v));
        else if (key == "hnsw_ef_construction") cfg.hnsw.ef_construction = static_cast<std::uint32_t>(parse_size(key, v));
        else if (key == "ef_search") cfg.ef_search = parse_size(key, v);
        else if (key == "vote") cfg.vote.weighting = parse_vote_weighting(v);
        else if (key == "min_similarity") {
            if (v.empty()) cfg.vote.min_similarity.reset();
            else cfg.vote.min_similarity = parse_double(key, v);
        } else if (key == "allow_unbalanced") cfg.allow_unbalanced = parse_bool(key, v);
        else if (key == "lr") cfg.train_config.learning_rate = parse_double(key, v);
        else if (key == "l2") cfg.train_config.l2_lambda = parse_double(key, v);
        else if (key == "epochs") cfg.train_config.epochs = parse_size(key, v);
        else if (key == "batch_size") cfg.train_config.batch_size = parse_size(key, v);
        else if (key == "training_regime") {
            if (v == "partial") cfg.training_regime = TrainingRegime::partial;
            else if (v == "full") cfg.training_regime = TrainingRegime::full;
            else throw UsageError("config: unknown training_regime '" + v + "'");
        } else if (key == "seed") {
            cfg.sampling.seed = parse_size(key, v);
        } else {
            throw UsageError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }
    cfg.hnsw.seed = cfg.sampling.seed;
    cfg.train_config.seed = cfg.sampling.seed;
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), std::filesystem::absolute(path).parent_path());
}

MetricsReport evaluate(const std::vector<LabeledPrediction>& preds, const Dataset& gold,
                       const std::vector<std::string>& known_labels) {
    MetricsReport rep;
    rep.confusion = confusion_matrix(preds, gold);
    rep.accuracy = rep.confusion.accuracy();
    rep.macro_f1 = rep.confusion.macro_f1();
    rep.per_class = rep.confusion.per_class();
    rep.total = rep.confusion.total();
    rep.correct = rep.confusion.correct();
    const std::set<std::string> known(known_labels.begin(), known_labels.end());
    for (const auto& r : gold.records()) rep.unseen_label_count += known.contains(r.label) ? 0 : 1;

    std::unordered_map<std::string, const std::string*> by_id;
    for (const auto& p : preds) by_id.emplace(p.id, &p.label);
    std::map<std::string, ConfusionMatrix> per_lang;
    for (const auto& r : gold.records()) per_lang[r.language].add(r.label, *by_id.at(r.id));
    for (const auto& [lang, cm] : per_lang) rep.per_language.push_back({lang, cm.accuracy(), cm.macro_f1(), cm.total()});
    return rep;
}

MetricsReport translation_pipeline_eval(const Dataset& translated_test, const Dataset& original,
                                        const LogRegModel& model, const EmbeddingStore& store) {
    const auto relabeled = relabel_translated(translated_test, original);
    auto rep = evaluate(predict_dataset(model, relabeled, store), relabeled, model.class_order);
    rep.method = "translation";
    return rep;
}

namespace {

json class_metrics_json(const std::vector<ClassMetrics>& per_class) {
    json arr = json::array();
    for (const auto& m : per_class) {
        arr.push_back({{"label", m.label}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"support", m.support}});
    }
    return arr;
}

}  // namespace

std::string MetricsReport::to_json() const {
    json j;
    j["name"] = name;
    j["model"] = model;
    j["method"] = method;
    j["scenario"] = scenario;
    j["column"] = column;
    j["accuracy"] = accuracy;
    j["macro_f1"] = macro_f1;
    j["total"] = total;
    j["correct"] = correct;
    j["tie_rate"] = tie_rate;
    j["unseen_label_count"] = unseen_label_count;
    j["index_size"] = index_size;
    j["index_languages"] = index_languages;
    j["per_class"] = class_metrics_json(per_class);
    json langs = json::array();
    for (const auto& l : per_language) {
        langs.push_back({{"language", l.language}, {"accuracy", l.accuracy}, {"macro_f1", l.macro_f1}, {"count", l.count}});
    }
    j["per_language"] = langs;
    json cells = json::array();
    for (const auto& [key, n] : confusion.cells()) cells.push_back({{"gold", key.first}, {"predicted", key.second}, {"count", n}});
    j["confusion"] = cells;
    json cfg = json::object();
    for (const auto& [k, v] : config) cfg[k] = v;
    j["config"] = cfg;
    return j.dump(2) + "\n";
}

MetricsReport MetricsReport::from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("report: malformed JSON (") + e.what() + ")");
    }
    try {
        MetricsReport r;
        r.name = j.at("name").get<std::string>();
        r.model = j.at("model").get<std::string>();
        r.method = j.at("method").get<std::string>();
        r.scenario = j.at("scenario").get<std::string>();
        r.column = j.at("column").get<std::string>();
        r.accuracy = j.at("accuracy").get<double>();
        r.macro_f1 = j.at("macro_f1").get<double>();
        r.total = j.at("total").get<std::size_t>();
        r.correct = j.at("correct").get<std::size_t>();
        r.tie_rate = j.at("tie_rate").get<double>();
        r.unseen_label_count = j.at("unseen_label_count").get<std::size_t>();
        r.index_size = j.at("index_size").get<std::size_t>();
        r.index_languages = j.at("index_languages").get<std::vector<std::string>>();
        for (const auto& m : j.at("per_class")) {
            r.per_class.push_back({m.at("label").get<std::string>(), m.at("precision").get<double>(),
                                   m.at("recall").get<double>(), m.at("f1").get<double>(),
                                   m.at("support").get<std::size_t>()});
        }
        for (const auto& l : j.at("per_language")) {
            r.per_language.push_back({l.at("language").get<std::string>(), l.at("accuracy").get<double>(),
                                      l.at("macro_f1").get<double>(), l.at("count").get<std::size_t>()});
        }
        for (const auto& c : j.at("confusion")) {
            r.confusion.add(c.at("gold").get<std::string>(), c.at("predicted").get<std::string>(),
                            c.at("count").get<std::size_t>());
        }
        for (const auto& [k, v] : j.at("config").items()) r.config[k] = v.get<std::string>();
        return r;
    } catch (const json::exception& e) {
        throw DataError(std::string("report: missing or mistyped field (") + e.what() + ")");
    }
}

std::string MetricsReport::to_text() const {
    std::ostringstream out;
    out << "experiment  " << name << "\n"
        << "model       " << model << "\n"
        << "method      " << method << "\n";
    if (!scenario.empty()) out << "scenario    " << scenario << "\n";
    out << "accuracy    " << fmt3(accuracy) << "\n"
        << "macro_f1    " << fmt3(macro_f1) << "\n"
        << "total       " << total << "\n"
        << "tie_rate    " << fmt3(tie_rate) << "\n"
        << "unseen      " << unseen_label_count << "\n";
    std::size_t width = 8;
    for (const auto& l : per_language) width = std::max(width, l.language.size());
    out << "\n" << std::string("language") << std::string(width - 8 + 2, ' ') << "accuracy  macro_f1  count\n";
    for (const auto& l : per_language) {
        out << l.language << std::string(width - l.language.size() + 2, ' ') << fmt3(l.accuracy) << "     "
            << fmt3(l.macro_f1) << "     " << l.count << "\n";
    }
    width = 5;
    for (const auto& c : per_class) width = std::max(width, c.label.size());
    out << "\nclass" << std::string(width - 5 + 2, ' ') << "precision  recall  f1     support\n";
    for (const auto& c : per_class) {
        out << c.label << std::string(width - c.label.size() + 2, ' ') << fmt3(c.precision) << "      "
            << fmt3(c.recall) << "   " << fmt3(c.f1) << "  " << c.support << "\n";
    }
    return out.str();
}

namespace {

struct Prepared {
    Dataset index_set;
    std::vector<std::string> index_languages;
};

std::vector<std::string> resolved_index_languages(const ExperimentConfig& cfg, const Dataset& train) {
    switch (cfg.index_filter) {
        case LanguageFilter::none: return {train.language_set().begin(), train.language_set().end()};
        case LanguageFilter::explicit_list: return cfg.index_languages;
        case LanguageFilter::all_without_target: {
            std::vector<std::string> out;
            for (const auto& l : train.language_set()) {
                if (l != cfg.target_language) out.push_back(l);
            }
            return out;
        }
    }
    return {};
}

Prepared prepare_index_set(const ExperimentConfig& cfg, const Dataset& train) {
    Prepared p;
    const Dataset filtered = stage("filter", [&] {
        switch (cfg.index_filter) {
            case LanguageFilter::none: return train;
            case LanguageFilter::all_without_target:
                return filter_by_language(train, FilterMode::exclude, {cfg.target_language});
            case LanguageFilter::explicit_list:
                return filter_by_language(train, FilterMode::include, cfg.index_languages);
        }
        return train;
    });
    p.index_set = stage("sample", [&] {
        if (cfg.sampling.shots_per_class == 0) return filtered;
        SamplingPlan plan = cfg.sampling;
        if (cfg.scheme == SamplingScheme::paired) {
            const auto own = resolved_index_languages(cfg, train);
            return paired_semantic_sample(train, plan, own, cfg.paired_languages).first;
        }
        if (plan.languages.empty() && cfg.stratify_by_language) {
            plan.languages.assign(filtered.language_set().begin(), filtered.language_set().end());
        }
        return sample_balanced(filtered, plan);
    });
    p.index_languages.assign(p.index_set.language_set().begin(), p.index_set.language_set().end());
    return p;
}

std::string hash_ids(const Dataset& d) {
    std::string all;
    for (const auto& r : d.records()) {
        all += r.id;
        all += '\n';
    }
    return sha256_hex({reinterpret_cast<const std::uint8_t*>(all.data()), all.size()});
}

std::string sha_text(const std::string& s) {
    return sha256_hex({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
    stage("config", [&] { cfg.validate(); });
    const LoadOptions load_opts{cfg.semantic_key_delimiter};
    const Dataset train = stage("load-train", [&] { return load_dataset(cfg.train, cfg.format, load_opts); });
    const Prepared prepared = prepare_index_set(cfg, train);
    const EmbeddingStore store = stage("load-embeddings", [&] { return load_stores(cfg.embeddings); });
    const Dataset test = stage("load-test", [&] {
        const auto all = load_dataset(cfg.test, cfg.format, load_opts);
        if (cfg.target_language.empty()) return all;
        return filter_by_language(all, FilterMode::include, {cfg.target_language});
    });

    ExperimentOutcome outcome;
    MetricsReport report;
    std::string predictions;
    if (cfg.method == Method::sim_search) {
        const QueryIndex ix = stage("build", [&] {
            BuildOptions b;
            b.mode = cfg.index_mode;
            b.hnsw = cfg.hnsw;
            b.allow_unbalanced = cfg.allow_unbalanced || cfg.sampling.clamp_to_available || cfg.sampling.shots_per_class == 0;
            return build_index(prepared.index_set, store, b);
        });
        const auto items = stage("classify", [&] {
            std::vector<std::pair<std::string, EmbeddingVector>> queries;
            queries.reserve(test.size());
            for (const auto& r : test.records()) queries.emplace_back(r.id, store.at(r.id));
            SearchOptions search;
            search.ef_search = cfg.ef_search;
            auto out = classify_batch(ix, queries, cfg.k, cfg.vote, search, options.threads);
            for (const auto& it : out) {
                if (!it.ok()) throw DataError("query '" + it.id + "': " + it.error());
            }
            return out;
        });
        report = stage("metrics", [&] {
            std::vector<LabeledPrediction> preds;
            std::size_t ties = 0;
            for (const auto& it : items) {
                preds.push_back({it.id, it.prediction().predicted_label});
                ties += it.prediction().tie_broken ? 1 : 0;
            }
            auto rep = evaluate(preds, test, ix.labels());
            rep.tie_rate = static_cast<double>(ties) / static_cast<double>(items.size());
            return rep;
        });
        for (const auto& it : items) {
            const auto& p = it.prediction();
            json votes = json::object();
            for (const auto& [label, n] : p.vote_counts) votes[label] = n;
            json top = json::array();
            for (const auto& n : p.support.items) top.push_back({{"id", n.id}, {"label", n.label}, {"similarity", n.similarity}});
            predictions += json{{"id", it.id}, {"predicted_label", p.predicted_label}, {"votes", votes},
                                {"tie_broken", p.tie_broken}, {"top", top}}.dump() + "\n";
        }
        report.index_size = ix.size();
    } else {
        const Dataset& fit_set = cfg.training_regime == TrainingRegime::partial
                                     ? prepared.index_set
                                     : train;
        const LogRegModel model = stage("train", [&] { return train_logreg(fit_set, store, cfg.train_config).model; });
        if (cfg.method == Method::classification) {
            report = stage("predict", [&] { return evaluate(predict_dataset(model, test, store), test, model.class_order); });
        } else {
            report = stage("translate-eval", [&] {
                const auto translated = load_dataset(cfg.translated_test, cfg.format, load_opts);
                const Dataset restricted = [&] {
                    std::unordered_set<std::string> ids;
                    for (const auto& r : test.records()) ids.insert(r.id);
                    std::vector<QueryRecord> keep;
                    for (const auto& r : translated.records()) {
                        if (ids.contains(r.id)) keep.push_back(r);
                    }
                    if (keep.empty()) throw DataError("translated test set shares no ids with the test set");
                    return Dataset(std::move(keep));
                }();
                const auto tstore = load_stores(cfg.translated_embeddings);
                return translation_pipeline_eval(restricted, test, model, tstore);
            });
        }
        report.index_size = fit_set.size();
    }
    report.name = cfg.name;
    report.model = cfg.model.empty() ? store.provider_name() : cfg.model;
    report.method = to_string(cfg.method);
    report.scenario = cfg.scenario;
    report.column = !cfg.column.empty() ? cfg.column : !cfg.target_language.empty() ? cfg.target_language : cfg.name;
    report.index_languages = prepared.index_languages;
    report.config = cfg.to_map();

    outcome.report = report;
    outcome.report_json = report.to_json();
    outcome.predictions_jsonl = predictions;

    json manifest;
    manifest["tool"] = "simquery";
    manifest["manifest_version"] = 1;
    manifest["config_text"] = cfg.to_text();
    json inputs = json::array();
    auto add_input = [&](const char* role, const std::filesystem::path& p) {
        if (!p.empty()) inputs.push_back({{"role", role}, {"path", p.string()}, {"sha256", sha256_file(p)}});
    };
    add_input("train", cfg.train);
    add_input("test", cfg.test);
    add_input("translated_test", cfg.translated_test);
    for (const auto& p : cfg.embeddings) add_input("embeddings", p);
    for (const auto& p : cfg.translated_embeddings) add_input("translated_embeddings", p);
    manifest["inputs"] = inputs;
    manifest["seed"] = cfg.sampling.seed;
    manifest["index_languages"] = prepared.index_languages;
    manifest["index_size"] = report.index_size;
    manifest["index_ids_sha256"] = hash_ids(prepared.index_set);
    manifest["outputs"] = {{"report.json", sha_text(outcome.report_json)},
                           {"predictions.jsonl", sha_text(outcome.predictions_jsonl)}};
    outcome.manifest_json = manifest.dump(2) + "\n";
    log::info("run.done", {{"name", cfg.name},
                           {"accuracy", fmt3(report.accuracy)},
                           {"macro_f1", fmt3(report.macro_f1)},
                           {"tie_rate", fmt3(report.tie_rate)}});
    return outcome;
}

void write_outcome(const ExperimentOutcome& outcome, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    write_file_text(out_dir / "report.json", outcome.report_json);
    write_file_text(out_dir / "report.txt", outcome.report.to_text());
    write_file_text(out_dir / "predictions.jsonl", outcome.predictions_jsonl);
    write_file_text(out_dir / "manifest.json", outcome.manifest_json);
}

ExperimentOutcome rerun_from_manifest(const std::filesystem::path& manifest_path, const RunOptions& options) {
    const auto bytes = read_file_bytes(manifest_path);
    json m;
    try {
        m = json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception& e) {
        throw DataError(manifest_path.string() + ": malformed manifest (" + e.what() + ")");
    }
    if (!m.contains("config_text") || !m.contains("inputs") || !m.contains("outputs")) {
        throw DataError(manifest_path.string() + ": manifest lacks config_text/inputs/outputs");
    }
    for (const auto& in : m.at("inputs")) {
        const auto path = in.at("path").get<std::string>();
        const auto expected = in.at("sha256").get<std::string>();
        const auto actual = sha256_file(path);
        if (actual != expected) {
            throw DataError("input '" + path + "' changed since the manifest was written (sha256 " + actual +
                            ", manifest " + expected + ")");
        }
    }
    const auto cfg = parse_config(m.at("config_text").get<std::string>());
    auto outcome = run_experiment(cfg, options);
    const auto recorded = m.at("outputs").at("report.json").get<std::string>();
    if (sha_text(outcome.report_json) != recorded) {
        throw RuntimeFailure("re-run report differs from the manifest's recorded report checksum");
    }
    return outcome;
}

ComparisonTable compare_reports(const std::vector<MetricsReport>& reports) {
    ComparisonTable t;
    for (const auto& r : reports) {
        if (std::find(t.columns.begin(), t.columns.end(), r.column) == t.columns.end()) t.columns.push_back(r.column);
        auto it = std::find_if(t.rows.begin(), t.rows.end(), [&](const ComparisonRow& row) {
            return row.model == r.model && row.method == r.method && row.scenario == r.scenario;
        });
        if (it == t.rows.end()) {
            t.rows.push_back({r.model, r.method, r.scenario, {}});
            it = std::prev(t.rows.end());
        }
        it->cells[r.column] = {r.accuracy, r.macro_f1};
    }
    return t;
}

std::string ComparisonTable::to_csv() const {
    std::string out = "model,method,scenario";
    for (const auto& c : columns) out += "," + c + " accuracy," + c + " f1";
    out += "\n";
    for (const auto& row : rows) {
        out += row.model + "," + row.method + "," + row.scenario;
        for (const auto& c : columns) {
            const auto it = row.cells.find(c);
            if (it == row.cells.end()) out += ",,";
            else out += "," + fmt3(it->second.accuracy) + "," + fmt3(it->second.macro_f1);
        }
        out += "\n";
    }
    return out;
}

std::string ComparisonTable::to_text() const {
    std::vector<std::vector<std::string>> grid;
    std::vector<std::string> header{"model", "method", "scenario"};
    for (const auto& c : columns) header.push_back(c);
    grid.push_back(header);
    for (const auto& row : rows) {
        std::vector<std::string> line{row.model, row.method, row.scenario};
        for (const auto& c : columns) {
            const auto it = row.cells.find(c);
            line.push_back(it == row.cells.end() ? "" : fmt3(it->second.accuracy) + ", " + fmt3(it->second.macro_f1));
        }
        grid.push_back(line);
    }
    std::vector<std::size_t> widths(header.size(), 0);
    for (const auto& line : grid) {
        for (std::size_t i = 0; i < line.size(); ++i) widths[i] = std::max(widths[i], line[i].size());
    }
    std::string out;
    for (const auto& line : grid) {
        std::string text;
        for (std::size_t i = 0; i < line.size(); ++i) {
            text += line[i];
            if (i + 1 < line.size()) text += std::string(widths[i] - line[i].size() + 2, ' ');
        }
        while (!text.empty() && text.back() == ' ') text.pop_back();
        out += text + "\n";
    }
    return out;
}

}  // namespace simquery

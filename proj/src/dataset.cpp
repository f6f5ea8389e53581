#include "simquery/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "simquery/error.hpp"
#include "simquery/log.hpp"
#include "simquery/rng.hpp"

namespace simquery {
namespace {

bool is_blank(const std::string& s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

std::string join(const std::vector<std::string>& items, const char* sep = ",") {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += sep;
        out += items[i];
    }
    return out;
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> cols;
    std::size_t start = 0;
    for (;;) {
        const auto tab = line.find('\t', start);
        if (tab == std::string::npos) {
            cols.push_back(line.substr(start));
            return cols;
        }
        cols.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
}

void check_record(const QueryRecord& r, const std::string& where) {
    if (r.id.empty()) throw DataError(where + ": empty id");
    if (is_blank(r.text)) throw DataError(where + ": record '" + r.id + "' has empty text");
    if (r.label.empty()) throw DataError(where + ": record '" + r.id + "' has empty label");
}

QueryRecord parse_json_record(const std::string& line, const std::string& where,
                              const LoadOptions& options) {
    nlohmann::json obj;
    try {
        obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(where + ": malformed JSON (" + e.what() + ")");
    }
    if (!obj.is_object()) throw DataError(where + ": expected a JSON object");
    auto field = [&](const char* name, bool required) -> std::string {
        auto it = obj.find(name);
        if (it == obj.end() || it->is_null()) {
            if (required) throw DataError(where + ": missing required field '" + name + "'");
            return {};
        }
        if (!it->is_string()) throw DataError(where + ": field '" + name + "' must be a string");
        return it->get<std::string>();
    };
    QueryRecord r;
    r.id = field("id", true);
    r.text = field("text", true);
    r.label = field("label", true);
    r.language = field("language", true);
    r.semantic_key = field("semantic_key", false);
    if (r.semantic_key.empty()) r.semantic_key = derive_semantic_key(r.id, options.semantic_key_delimiter);
    return r;
}

constexpr const char* kTsvHeader[] = {"id", "text", "label", "language", "semantic_key"};

}  // namespace

Dataset::Dataset(std::vector<QueryRecord> records) : records_(std::move(records)) {
    std::unordered_set<std::string> seen;
    seen.reserve(records_.size());
    for (std::size_t i = 0; i < records_.size(); ++i) {
        const auto& r = records_[i];
        check_record(r, "record " + std::to_string(i));
        if (!seen.insert(r.id).second) throw DataError("duplicate record id '" + r.id + "'");
        labels_.insert(r.label);
        languages_.insert(r.language);
    }
}

const QueryRecord* Dataset::find(const std::string& id) const {
    for (const auto& r : records_) {
        if (r.id == id) return &r;
    }
    return nullptr;
}

DatasetFormat parse_dataset_format(const std::string& name) {
    if (name == "jsonl" || name == "json-lines") return DatasetFormat::jsonl;
    if (name == "tsv") return DatasetFormat::tsv;
    throw UsageError("unknown dataset format '" + name + "' (expected jsonl or tsv)");
}

std::string derive_semantic_key(const std::string& id, const std::string& delimiter) {
    if (delimiter.empty()) return id;
    const auto pos = id.find(delimiter);
    return pos == std::string::npos ? id : id.substr(0, pos);
}

Dataset parse_dataset(const std::string& text, DatasetFormat format, const std::string& source,
                      const LoadOptions& options) {
    std::vector<QueryRecord> records;
    std::unordered_map<std::string, std::size_t> id_line;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string where = source + ":" + std::to_string(line_no);
        QueryRecord r;
        if (format == DatasetFormat::jsonl) {
            if (is_blank(line)) continue;
            r = parse_json_record(line, where, options);
        } else {
            if (!header_seen) {
                const auto cols = split_tabs(line);
                if (cols.size() != 5 || !std::equal(cols.begin(), cols.end(), std::begin(kTsvHeader))) {
                    throw DataError(where + ": malformed TSV header, expected "
                                    "'id<TAB>text<TAB>label<TAB>language<TAB>semantic_key'");
                }
                header_seen = true;
                continue;
            }
            if (line.empty()) continue;
            auto cols = split_tabs(line);
            if (cols.size() != 5) {
                throw DataError(where + ": malformed line, expected 5 tab-separated columns, got " +
                                std::to_string(cols.size()));
            }
            r = {std::move(cols[0]), std::move(cols[1]), std::move(cols[2]), std::move(cols[3]),
                 std::move(cols[4])};
            if (r.semantic_key.empty()) r.semantic_key = derive_semantic_key(r.id, options.semantic_key_delimiter);
        }
        check_record(r, where);
        auto [it, inserted] = id_line.emplace(r.id, line_no);
        if (!inserted) {
            throw DataError(source + ": duplicate id '" + r.id + "' on lines " + std::to_string(it->second) +
                            " and " + std::to_string(line_no));
        }
        records.push_back(std::move(r));
    }
    if (records.empty()) throw DataError(source + ": dataset is empty");
    return Dataset(std::move(records));
}

Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format, const LoadOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open dataset '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_dataset(buf.str(), format, path.string(), options);
}

std::string to_jsonl(const Dataset& d) {
    std::string out;
    for (const auto& r : d.records()) {
        nlohmann::ordered_json obj = {{"id", r.id},
                                      {"text", r.text},
                                      {"label", r.label},
                                      {"language", r.language},
                                      {"semantic_key", r.semantic_key}};
        out += obj.dump();
        out += '\n';
    }
    return out;
}

Dataset filter_by_language(const Dataset& d, FilterMode mode, const std::vector<std::string>& tags) {
    if (tags.empty()) throw UsageError("filter_by_language: tag list is empty");
    const std::set<std::string> wanted(tags.begin(), tags.end());
    if (mode == FilterMode::include) {
        std::vector<std::string> unmatched;
        for (const auto& t : wanted) {
            if (!d.language_set().contains(t)) unmatched.push_back(t);
        }
        if (!unmatched.empty()) log::warn("filter.unmatched_tags", {{"tags", join(unmatched)}});
    }
    std::vector<QueryRecord> kept;
    for (const auto& r : d.records()) {
        const bool listed = wanted.contains(r.language);
        if (listed == (mode == FilterMode::include)) kept.push_back(r);
    }
    if (kept.empty()) {
        throw DataError(std::string("language filter (") + (mode == FilterMode::include ? "include" : "exclude") +
                        " " + join(tags) + ") leaves an empty dataset");
    }
    return Dataset(std::move(kept));
}

void SamplingPlan::validate() const {
    if (shots_per_class < 1) throw UsageError("sampling plan: shots_per_class must be >= 1");
    std::set<std::string> uniq(languages.begin(), languages.end());
    if (uniq.size() != languages.size()) throw UsageError("sampling plan: duplicate language tags");
    std::set<std::string> uniq_classes(classes.begin(), classes.end());
    if (uniq_classes.size() != classes.size()) throw UsageError("sampling plan: duplicate classes");
}

namespace {

std::vector<std::string> plan_classes(const Dataset& d, const SamplingPlan& plan) {
    if (!plan.classes.empty()) return plan.classes;
    return {d.label_set().begin(), d.label_set().end()};
}

// Picks `n` of `candidates` (positions into some list) without replacement
// using a stream private to the stratum tag.
std::vector<std::size_t> draw(std::vector<std::size_t> candidates, std::size_t n, std::uint64_t seed,
                              const std::string& tag) {
    SplitMix64 rng(derive_seed(seed, tag));
    // Partial Fisher-Yates from the front.
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(candidates.size() - i));
        std::swap(candidates[i], candidates[j]);
    }
    candidates.resize(n);
    return candidates;
}

std::size_t shots_for(const SamplingPlan& plan, std::size_t available, const std::string& what) {
    if (available >= plan.shots_per_class) return plan.shots_per_class;
    if (!plan.clamp_to_available || available == 0) {
        throw DataError(what + " has " + std::to_string(available) + " records, fewer than the " +
                        std::to_string(plan.shots_per_class) + " shots requested");
    }
    log::warn("sample.clamped", {{"stratum", what},
                                 {"available", std::to_string(available)},
                                 {"requested", std::to_string(plan.shots_per_class)}});
    return available;
}

}  // namespace

Dataset sample_balanced(const Dataset& d, const SamplingPlan& plan) {
    plan.validate();
    const auto classes = plan_classes(d, plan);
    const bool stratified = !plan.languages.empty();

    std::map<std::pair<std::string, std::string>, std::vector<std::size_t>> strata;
    const std::set<std::string> class_set(classes.begin(), classes.end());
    const std::set<std::string> lang_set(plan.languages.begin(), plan.languages.end());
    for (std::size_t i = 0; i < d.records().size(); ++i) {
        const auto& r = d.records()[i];
        if (!class_set.contains(r.label)) continue;
        if (stratified && !lang_set.contains(r.language)) continue;
        strata[{r.label, stratified ? r.language : std::string()}].push_back(i);
    }

    std::vector<std::size_t> chosen;
    for (const auto& cls : classes) {
        const std::vector<std::string> langs = stratified ? plan.languages : std::vector<std::string>{""};
        for (const auto& lang : langs) {
            const auto it = strata.find({cls, lang});
            const std::vector<std::size_t> empty;
            const auto& candidates = it == strata.end() ? empty : it->second;
            const std::string what =
                "class '" + cls + "'" + (stratified ? " in language '" + lang + "'" : std::string());
            const std::size_t n = shots_for(plan, candidates.size(), what);
            auto picked = draw(candidates, n, plan.seed, cls + '\x1f' + lang);
            chosen.insert(chosen.end(), picked.begin(), picked.end());
        }
    }
    std::sort(chosen.begin(), chosen.end());
    std::vector<QueryRecord> out;
    out.reserve(chosen.size());
    for (auto i : chosen) out.push_back(d.records()[i]);
    return Dataset(std::move(out));
}

std::pair<Dataset, Dataset> paired_semantic_sample(const Dataset& d, const SamplingPlan& plan,
                                                   const std::vector<std::string>& set_a,
                                                   const std::vector<std::string>& set_b) {
    plan.validate();
    for (const auto* set : {&set_a, &set_b}) {
        if (set->empty()) throw UsageError("paired sampling: language sets must be non-empty");
        if (std::set<std::string>(set->begin(), set->end()).size() != set->size()) {
            throw UsageError("paired sampling: duplicate language tags");
        }
    }
    const auto classes = plan_classes(d, plan);

    // (label, key, language) -> record position; keys listed in first-seen order.
    std::map<std::tuple<std::string, std::string, std::string>, std::size_t> lookup;
    std::map<std::string, std::vector<std::string>> keys_by_class;
    std::set<std::pair<std::string, std::string>> seen_keys;
    for (std::size_t i = 0; i < d.records().size(); ++i) {
        const auto& r = d.records()[i];
        lookup.emplace(std::make_tuple(r.label, r.semantic_key, r.language), i);
        if (seen_keys.insert({r.label, r.semantic_key}).second) keys_by_class[r.label].push_back(r.semantic_key);
    }

    const std::size_t per_key = std::min(set_a.size(), set_b.size());
    std::vector<std::size_t> out_a;
    std::vector<std::size_t> out_b;
    std::size_t ordinal = 0;
    for (const auto& cls : classes) {
        const auto& keys = keys_by_class[cls];
        std::vector<std::size_t> positions(keys.size());
        for (std::size_t i = 0; i < keys.size(); ++i) positions[i] = i;
        const std::size_t n = shots_for(plan, keys.size(), "class '" + cls + "' (semantic keys)");
        auto picked = draw(positions, n, plan.seed, cls + "\x1fpaired");
        std::sort(picked.begin(), picked.end());
        for (auto p : picked) {
            const auto& key = keys[p];
            auto materialize = [&](const std::vector<std::string>& set, std::vector<std::size_t>& out) {
                for (const auto& lang : set) {
                    if (!lookup.contains({cls, key, lang})) {
                        throw DataError("semantic key '" + key + "' (class '" + cls +
                                        "') is missing a translation in language '" + lang + "'");
                    }
                }
                for (std::size_t t = 0; t < per_key; ++t) {
                    const auto& lang = set[(ordinal * per_key + t) % set.size()];
                    out.push_back(lookup.at({cls, key, lang}));
                }
            };
            materialize(set_a, out_a);
            materialize(set_b, out_b);
            ++ordinal;
        }
    }
    auto build = [&](std::vector<std::size_t> idx) {
        std::sort(idx.begin(), idx.end());
        std::vector<QueryRecord> recs;
        recs.reserve(idx.size());
        for (auto i : idx) recs.push_back(d.records()[i]);
        return Dataset(std::move(recs));
    };
    return {build(std::move(out_a)), build(std::move(out_b))};
}

std::vector<std::pair<std::string, std::size_t>> class_counts(const Dataset& d) {
    std::map<std::string, std::size_t> counts;
    for (const auto& r : d.records()) ++counts[r.label];
    return {counts.begin(), counts.end()};
}

}  // namespace simquery

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace simquery {

/// One labeled utterance.
struct QueryRecord {
    std::string id;
    std::string text;
    std::string label;
    std::string language;
    /// Groups translations of the same utterance across languages.
    std::string semantic_key;

    friend bool operator==(const QueryRecord&, const QueryRecord&) = default;
};

/// Ordered, validated collection of records. Immutable once constructed;
/// the label and language sets are derived from the records.
class Dataset {
public:
    Dataset() = default;
    /// Validates the record invariants (non-empty id/label, non-blank text,
    /// unique ids). Throws DataError on violation.
    explicit Dataset(std::vector<QueryRecord> records);

    const std::vector<QueryRecord>& records() const noexcept { return records_; }
    const std::set<std::string>& label_set() const noexcept { return labels_; }
    const std::set<std::string>& language_set() const noexcept { return languages_; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }

    /// Nullptr when absent.
    const QueryRecord* find(const std::string& id) const;

    friend bool operator==(const Dataset& a, const Dataset& b) { return a.records_ == b.records_; }

private:
    std::vector<QueryRecord> records_;
    std::set<std::string> labels_;
    std::set<std::string> languages_;
};

enum class DatasetFormat { jsonl, tsv };

DatasetFormat parse_dataset_format(const std::string& name);

struct LoadOptions {
    /// semantic_key defaults to the id prefix before this delimiter
    /// (the whole id when the delimiter is absent).
    std::string semantic_key_delimiter = "_";
};

Dataset load_dataset(const std::filesystem::path& path, DatasetFormat format,
                     const LoadOptions& options = {});
/// Same as load_dataset but over in-memory text; `source` names it in errors.
Dataset parse_dataset(const std::string& text, DatasetFormat format, const std::string& source,
                      const LoadOptions& options = {});

/// Writes JSON-lines in the load_dataset schema.
std::string to_jsonl(const Dataset& d);

std::string derive_semantic_key(const std::string& id, const std::string& delimiter);

enum class FilterMode { include, exclude };

/// Keeps (include) or drops (exclude) records whose language is in `tags`.
/// Include tags that match nothing are reported as a warning.
/// Throws DataError when the result is empty.
Dataset filter_by_language(const Dataset& d, FilterMode mode, const std::vector<std::string>& tags);

/// C-way N-shot sampling plan, optionally stratified by language.
struct SamplingPlan {
    std::size_t shots_per_class = 31;
    /// Empty means every label in the dataset.
    std::vector<std::string> classes;
    /// When non-empty, sample N per (class, language).
    std::vector<std::string> languages;
    std::uint64_t seed = 0;
    /// Shrink N for strata with fewer records instead of failing.
    bool clamp_to_available = false;

    void validate() const;
};

/// Draws exactly N records per class (per class and language when the plan
/// lists languages) without replacement. Each stratum uses its own stream
/// derived from (seed, class, language), so a stratum's draw depends only on
/// its own candidate records. Output keeps the input order.
Dataset sample_balanced(const Dataset& d, const SamplingPlan& plan);

/// Samples N semantic keys per class, then materializes the same keys in
/// two language configurations. Each key contributes
/// m = min(|set_a|, |set_b|) records per output, with languages rotated
/// through each set so both outputs have equal size and identical
/// (class, key) multisets. Throws DataError when a sampled key lacks a
/// translation in either set.
std::pair<Dataset, Dataset> paired_semantic_sample(const Dataset& d, const SamplingPlan& plan,
                                                   const std::vector<std::string>& set_a,
                                                   const std::vector<std::string>& set_b);

/// Per-label counts, sorted by label.
std::vector<std::pair<std::string, std::size_t>> class_counts(const Dataset& d);

}  // namespace simquery

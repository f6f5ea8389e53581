#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "simquery/baseline.hpp"
#include "simquery/classify.hpp"
#include "simquery/dataset.hpp"
#include "simquery/index.hpp"
#include "simquery/metrics.hpp"

namespace simquery {

enum class Method { sim_search, classification, translation };
enum class LanguageFilter { none, all_without_target, explicit_list };
enum class SamplingScheme { balanced, paired };
enum class TrainingRegime { partial, full };

const char* to_string(Method m);
const char* to_string(LanguageFilter f);

/// One scenario. Parsed from a flat `key = value` file; see README for keys.
struct ExperimentConfig {
    std::string name = "experiment";
    /// Row labels in comparison tables.
    std::string model;
    std::string scenario;
    /// Column label in comparison tables; defaults to target_language or name.
    std::string column;

    Method method = Method::sim_search;
    std::filesystem::path train;
    std::filesystem::path test;
    std::filesystem::path translated_test;
    DatasetFormat format = DatasetFormat::jsonl;
    std::string semantic_key_delimiter = "_";
    std::vector<std::filesystem::path> embeddings;
    /// Store holding vectors of the translated test text (translation only).
    std::vector<std::filesystem::path> translated_embeddings;

    /// shots_per_class == 0 disables sampling (index the whole filtered split).
    SamplingPlan sampling;
    bool stratify_by_language = true;
    SamplingScheme scheme = SamplingScheme::balanced;
    std::vector<std::string> paired_languages;

    LanguageFilter index_filter = LanguageFilter::none;
    std::vector<std::string> index_languages;
    /// When set, test records are restricted to this language.
    std::string target_language;

    std::size_t k = 31;
    IndexMode index_mode = IndexMode::exact;
    HnswParams hnsw;
    std::size_t ef_search = 0;
    VoteOptions vote;
    bool allow_unbalanced = false;

    TrainConfig train_config;
    TrainingRegime training_regime = TrainingRegime::partial;

    /// Throws UsageError when method-specific fields are missing.
    void validate() const;
    /// Ordered key/value view; its text form round-trips through parse_config.
    std::map<std::string, std::string> to_map() const;
    std::string to_text() const;
};

/// Relative paths resolve against `base_dir`.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

struct LanguageMetrics {
    std::string language;
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    std::size_t count = 0;
};

struct MetricsReport {
    std::string name;
    std::string model;
    std::string method;
    std::string scenario;
    std::string column;
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    std::size_t total = 0;
    std::size_t correct = 0;
    double tie_rate = 0.0;
    /// Test records whose gold label never appears in the index/train classes.
    std::size_t unseen_label_count = 0;
    std::vector<ClassMetrics> per_class;
    std::vector<LanguageMetrics> per_language;
    ConfusionMatrix confusion;
    std::vector<std::string> index_languages;
    std::size_t index_size = 0;
    std::map<std::string, std::string> config;

    std::string to_json() const;
    static MetricsReport from_json(const std::string& text);
    /// Aligned text rendering, metrics at 3 decimals.
    std::string to_text() const;
};

/// Scores predictions against gold, with per-language breakdown.
/// `known_labels` is the class universe of the index or model.
MetricsReport evaluate(const std::vector<LabeledPrediction>& preds, const Dataset& gold,
                       const std::vector<std::string>& known_labels);

/// Classification-head evaluation over a translated test set whose ids
/// match `original`; gold labels come from `original`.
MetricsReport translation_pipeline_eval(const Dataset& translated_test, const Dataset& original,
                                        const LogRegModel& model, const EmbeddingStore& store);

struct ExperimentOutcome {
    MetricsReport report;
    std::string report_json;
    std::string predictions_jsonl;
    std::string manifest_json;
};

struct RunOptions {
    std::size_t threads = 1;
};

/// sample -> filter -> build -> classify (or train + predict) -> metrics.
/// Errors are rethrown with the failing stage name prefixed.
ExperimentOutcome run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

/// Writes report.json, report.txt, predictions.jsonl and manifest.json.
void write_outcome(const ExperimentOutcome& outcome, const std::filesystem::path& out_dir);

/// Re-runs the config stored in a manifest after checking every recorded
/// input checksum; throws DataError if an input changed and RuntimeFailure
/// if the new report differs from the recorded one.
ExperimentOutcome rerun_from_manifest(const std::filesystem::path& manifest_path, const RunOptions& options = {});

struct ComparisonCell {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
};

struct ComparisonRow {
    std::string model;
    std::string method;
    std::string scenario;
    std::map<std::string, ComparisonCell> cells;
};

struct ComparisonTable {
    std::vector<std::string> columns;
    std::vector<ComparisonRow> rows;

    std::string to_csv() const;
    std::string to_text() const;
};

/// Rows keyed by (model, method, scenario) in first-seen order; columns in
/// first-seen order. Missing cells stay empty.
ComparisonTable compare_reports(const std::vector<MetricsReport>& reports);

}  // namespace simquery

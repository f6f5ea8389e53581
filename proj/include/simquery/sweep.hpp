#pragma once

#include <string>
#include <vector>

#include "simquery/classify.hpp"
#include "simquery/dataset.hpp"
#include "simquery/embedding.hpp"
#include "simquery/index.hpp"

namespace simquery {

struct SweepRow {
    std::size_t k = 0;
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    double tie_rate = 0.0;

    friend bool operator==(const SweepRow&, const SweepRow&) = default;
};

struct SweepTable {
    std::string provider;
    std::vector<SweepRow> rows;

    friend bool operator==(const SweepTable&, const SweepTable&) = default;
};

struct SweepOptions {
    std::size_t k_min = 1;
    std::size_t k_max = 75;
    std::size_t step = 2;
    VoteOptions vote;
    /// For hnsw indexes the beam is fixed at the value resolved for the
    /// largest k, so every row sees the same candidate pool.
    SearchOptions search;
    std::size_t threads = 1;
};

/// Grid k = k_min, k_min+step, ... <= k_max. Grid points above the index
/// size are dropped with a warning. Each test query is searched once at the
/// largest k; smaller k reuse the prefix of that neighbor list.
SweepTable sweep_k(const QueryIndex& ix, const Dataset& test, const EmbeddingStore& store,
                   const SweepOptions& options = {});

/// The k values sweep_k will evaluate for this index size.
std::vector<std::size_t> sweep_grid(const SweepOptions& options, std::size_t index_size);

struct AggregateRow {
    std::size_t k = 0;
    double mean_accuracy = 0.0;
    double mean_macro_f1 = 0.0;
};

struct SweepAggregate {
    std::vector<AggregateRow> rows;
    /// Argmax per metric; ties go to the smaller k.
    std::size_t best_k_accuracy = 0;
    std::size_t best_k_macro_f1 = 0;
};

/// Unweighted per-k mean across provider tables. Throws DataError when the
/// tables do not share the same k grid.
SweepAggregate aggregate_sweeps(const std::vector<SweepTable>& tables);

/// Columns: k,accuracy,macro_f1,tie_rate.
std::string sweep_to_csv(const SweepTable& table);
/// Static line chart of accuracy and macro-F1 against k.
std::string sweep_to_svg(const SweepTable& table);

}  // namespace simquery

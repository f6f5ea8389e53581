#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "simquery/index.hpp"

namespace simquery {

enum class VoteWeighting { unweighted, similarity };

VoteWeighting parse_vote_weighting(const std::string& name);

struct VoteOptions {
    /// Unweighted counts are plain majority vote.
    VoteWeighting weighting = VoteWeighting::unweighted;
    /// Neighbors below this similarity do not vote. Off by default.
    std::optional<double> min_similarity;
};

struct Prediction {
    /// Empty only when min_similarity rejected every neighbor.
    std::string predicted_label;
    std::map<std::string, std::size_t> vote_counts;
    /// Set whenever more than one label reached the top vote.
    bool tie_broken = false;
    NeighborSet support;

    bool rejected() const noexcept { return predicted_label.empty(); }
    friend bool operator==(const Prediction&, const Prediction&) = default;
};

/// Mode of the neighbor labels. Ties go to the tied label with the largest
/// summed similarity, then to the lexicographically smallest label.
/// With similarity weighting the primary score is the similarity sum and
/// the count becomes the first tie-break.
Prediction resolve_label(const NeighborSet& ns, const VoteOptions& options = {});

Prediction classify_query(const QueryIndex& ix, const EmbeddingVector& q, std::size_t k,
                          const VoteOptions& vote = {}, const SearchOptions& search = {});

struct BatchItem {
    std::string id;
    std::variant<Prediction, std::string> outcome;  // prediction or error message

    bool ok() const noexcept { return outcome.index() == 0; }
    const Prediction& prediction() const { return std::get<Prediction>(outcome); }
    const std::string& error() const { return std::get<std::string>(outcome); }
};

/// Element-wise classify_query, output in input order. Failures are
/// recorded per item instead of aborting the batch.
std::vector<BatchItem> classify_batch(const QueryIndex& ix,
                                      const std::vector<std::pair<std::string, EmbeddingVector>>& queries,
                                      std::size_t k, const VoteOptions& vote = {}, const SearchOptions& search = {},
                                      std::size_t threads = 1);

}  // namespace simquery

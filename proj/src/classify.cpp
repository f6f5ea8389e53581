#include "simquery/classify.hpp"

#include <algorithm>
#include <tuple>

#include "simquery/error.hpp"
#include "simquery/parallel.hpp"

namespace simquery {

VoteWeighting parse_vote_weighting(const std::string& name) {
    if (name == "majority" || name == "unweighted") return VoteWeighting::unweighted;
    if (name == "similarity") return VoteWeighting::similarity;
    throw UsageError("unknown vote weighting '" + name + "' (expected majority or similarity)");
}

Prediction resolve_label(const NeighborSet& ns, const VoteOptions& options) {
    if (ns.items.empty()) throw DataError("resolve_label: empty neighbor set");
    Prediction out;
    out.support.k_requested = ns.k_requested;
    for (const auto& n : ns.items) {
        if (options.min_similarity && n.similarity < *options.min_similarity) continue;
        out.support.items.push_back(n);
    }
    if (out.support.items.empty()) return out;

    struct Tally {
        std::size_t count = 0;
        double similarity = 0.0;
    };
    std::map<std::string, Tally> tally;
    // Support is sorted by similarity, so each label's sum is accumulated in
    // a fixed order regardless of how equal-similarity neighbors are arranged.
    std::vector<double> sims;
    for (const auto& n : out.support.items) {
        auto& t = tally[n.label];
        ++t.count;
        ++out.vote_counts[n.label];
    }
    for (auto& [label, t] : tally) {
        sims.clear();
        for (const auto& n : out.support.items) {
            if (n.label == label) sims.push_back(n.similarity);
        }
        std::sort(sims.begin(), sims.end(), std::greater<>());
        for (double s : sims) t.similarity += s;
    }

    const bool weighted = options.weighting == VoteWeighting::similarity;
    auto primary = [&](const Tally& t) { return weighted ? t.similarity : static_cast<double>(t.count); };
    double best = -1e300;
    for (const auto& [label, t] : tally) best = std::max(best, primary(t));
    std::vector<std::pair<const std::string*, const Tally*>> tied;
    for (const auto& [label, t] : tally) {
        if (primary(t) == best) tied.emplace_back(&label, &t);
    }
    out.tie_broken = tied.size() > 1;
    // tally iterates in label order, so the first maximum of the secondary
    // key is also the lexicographically smallest.
    const auto* winner = tied.front().first;
    auto secondary = [&](const Tally& t) { return weighted ? static_cast<double>(t.count) : t.similarity; };
    double best_secondary = secondary(*tied.front().second);
    for (const auto& [label, t] : tied) {
        if (secondary(*t) > best_secondary) {
            best_secondary = secondary(*t);
            winner = label;
        }
    }
    out.predicted_label = *winner;
    return out;
}

Prediction classify_query(const QueryIndex& ix, const EmbeddingVector& q, std::size_t k, const VoteOptions& vote,
                          const SearchOptions& search) {
    return resolve_label(ix.search(q, k, search), vote);
}

std::vector<BatchItem> classify_batch(const QueryIndex& ix,
                                      const std::vector<std::pair<std::string, EmbeddingVector>>& queries,
                                      std::size_t k, const VoteOptions& vote, const SearchOptions& search,
                                      std::size_t threads) {
    std::vector<BatchItem> out(queries.size());
    parallel_for(queries.size(), threads, [&](std::size_t i) {
        out[i].id = queries[i].first;
        try {
            out[i].outcome = classify_query(ix, queries[i].second, k, vote, search);
        } catch (const std::exception& e) {
            out[i].outcome = std::string(e.what());
        }
    });
    return out;
}

}  // namespace simquery

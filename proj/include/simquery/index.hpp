#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "simquery/dataset.hpp"
#include "simquery/embedding.hpp"

namespace simquery {

enum class IndexMode : std::uint8_t { exact = 0, hnsw = 1 };

IndexMode parse_index_mode(const std::string& name);
const char* to_string(IndexMode mode);

struct HnswParams {
    /// M_max; layer 0 allows 2 * max_neighbors.
    std::uint32_t max_neighbors = 16;
    std::uint32_t ef_construction = 100;
    /// Seeds level assignment.
    std::uint64_t seed = 0;
};

struct BuildOptions {
    IndexMode mode = IndexMode::exact;
    HnswParams hnsw;
    /// Permit unequal per-class entry counts.
    bool allow_unbalanced = false;
};

struct IndexEntry {
    std::string id;
    EmbeddingVector vector;
    std::string label;
    std::string language;
};

struct Neighbor {
    double similarity = 0.0;
    std::string id;
    std::string label;
    std::string language;

    friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Search result, descending by similarity (ties by ascending id bytes).
struct NeighborSet {
    std::vector<Neighbor> items;
    std::size_t k_requested = 0;

    /// First `k` items as a new set with k_requested = k.
    NeighborSet prefix(std::size_t k) const;
    friend bool operator==(const NeighborSet&, const NeighborSet&) = default;
};

struct SearchOptions {
    /// HNSW beam width; 0 selects max(64, 2k). Always raised to at least k.
    std::size_t ef_search = 0;
};

/// Layered proximity graph over index ordinals.
struct HnswGraph {
    HnswParams params;
    std::uint32_t entry_point = 0;
    /// links[node][level] lists neighbor ordinals; a node has levels 0..top.
    std::vector<std::vector<std::vector<std::uint32_t>>> links;

    std::size_t top_level(std::uint32_t node) const { return links[node].size() - 1; }
    friend bool operator==(const HnswGraph& a, const HnswGraph& b) {
        return a.entry_point == b.entry_point && a.links == b.links &&
               a.params.max_neighbors == b.params.max_neighbors &&
               a.params.ef_construction == b.params.ef_construction && a.params.seed == b.params.seed;
    }
};

/// Immutable labeled vector index. Stored vectors are unit-norm, so cosine
/// similarity reduces to a dot product. Safe for concurrent searches.
class QueryIndex {
public:
    /// Normalizes each vector and, in hnsw mode, builds the graph single-
    /// threaded in entry order. Throws DataError on dim mismatch, duplicate
    /// ids, or unbalanced classes without allow_unbalanced.
    static QueryIndex from_entries(std::vector<IndexEntry> entries, const BuildOptions& options);

    IndexMode mode() const noexcept { return mode_; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return ids_.size(); }

    const std::string& id(std::size_t i) const { return ids_[i]; }
    const std::string& label(std::size_t i) const { return labels_[i]; }
    const std::string& language(std::size_t i) const { return languages_[i]; }
    std::span<const float> vector(std::size_t i) const { return {vectors_.data() + i * dim_, dim_}; }
    const std::optional<HnswGraph>& graph() const noexcept { return graph_; }

    std::vector<std::string> labels() const;
    std::vector<std::string> languages() const;

    /// Exact mode: brute force. HNSW mode: graph search with ef_search.
    NeighborSet search(const EmbeddingVector& query, std::size_t k, const SearchOptions& options = {}) const;
    /// Brute-force top-k regardless of mode.
    NeighborSet search_exact(const EmbeddingVector& query, std::size_t k) const;

    /// Same ids, labels, languages and vector bytes, in the same order.
    bool same_entries(const QueryIndex& other) const;

    std::vector<std::uint8_t> encode() const;
    static QueryIndex decode(std::span<const std::uint8_t> bytes, const std::string& source = "qidx");

private:
    std::vector<float> prepare_query(const EmbeddingVector& query, std::size_t k) const;
    NeighborSet make_result(std::vector<std::pair<double, std::uint32_t>> scored, std::size_t k) const;
    void build_graph(const HnswParams& params);
    void repair_connectivity();

    IndexMode mode_ = IndexMode::exact;
    std::size_t dim_ = 0;
    std::vector<std::string> ids_;
    std::vector<std::string> labels_;
    std::vector<std::string> languages_;
    std::vector<float> vectors_;
    std::optional<HnswGraph> graph_;
};

inline constexpr std::uint16_t kQidxVersion = 1;

/// Looks up every record's vector in the store. Throws DataError naming the
/// first record id with no embedding.
QueryIndex build_index(const Dataset& d, const EmbeddingStore& store, const BuildOptions& options);

NeighborSet search_topk(const QueryIndex& ix, const EmbeddingVector& q, std::size_t k,
                        const SearchOptions& options = {});

/// |approx ids ∩ exact ids| / min(k, |exact|).
double recall_at_k(const NeighborSet& approx, const NeighborSet& exact, std::size_t k);

/// Mean over queries of recall_at_k(ann search, exact search, k).
double measure_recall(const QueryIndex& ann, const QueryIndex& exact, std::span<const EmbeddingVector> queries,
                      std::size_t k, const SearchOptions& options = {}, std::size_t threads = 1);

void save_index(const QueryIndex& ix, const std::filesystem::path& path);
QueryIndex load_index(const std::filesystem::path& path);

}  // namespace simquery

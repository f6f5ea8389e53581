#include "simquery/index.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <unordered_set>

#include "simquery/binary_io.hpp"
#include "simquery/checksum.hpp"
#include "simquery/error.hpp"
#include "simquery/parallel.hpp"
#include "simquery/rng.hpp"

namespace simquery {

IndexMode parse_index_mode(const std::string& name) {
    if (name == "exact") return IndexMode::exact;
    if (name == "hnsw") return IndexMode::hnsw;
    throw UsageError("unknown index mode '" + name + "' (expected exact or hnsw)");
}

const char* to_string(IndexMode mode) { return mode == IndexMode::exact ? "exact" : "hnsw"; }

NeighborSet NeighborSet::prefix(std::size_t k) const {
    NeighborSet out;
    out.k_requested = k;
    out.items.assign(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(std::min(k, items.size())));
    return out;
}

namespace {

using Scored = std::pair<double, std::uint32_t>;  // (distance, ordinal)

struct GraphBuilder {
    const std::vector<float>& vectors;
    std::size_t dim;
    HnswGraph& graph;
    std::vector<std::uint32_t> visit_tag;
    std::uint32_t epoch = 0;

    std::span<const float> vec(std::uint32_t i) const { return {vectors.data() + std::size_t(i) * dim, dim}; }
    double distance(std::uint32_t a, std::uint32_t b) const { return 1.0 - dot(vec(a), vec(b)); }

    std::size_t capacity(std::size_t level) const {
        return level == 0 ? 2 * std::size_t(graph.params.max_neighbors) : graph.params.max_neighbors;
    }

    std::vector<Scored> search_layer(std::uint32_t query, const std::vector<std::uint32_t>& entry_points,
                                     std::size_t ef, std::size_t level) {
        if (++epoch == 0) {
            std::fill(visit_tag.begin(), visit_tag.end(), 0);
            epoch = 1;
        }
        std::priority_queue<Scored, std::vector<Scored>, std::greater<>> candidates;
        std::priority_queue<Scored> results;
        for (auto ep : entry_points) {
            visit_tag[ep] = epoch;
            const double d = distance(query, ep);
            candidates.emplace(d, ep);
            results.emplace(d, ep);
        }
        while (results.size() > ef) results.pop();
        while (!candidates.empty()) {
            const auto [d_c, c] = candidates.top();
            if (d_c > results.top().first && results.size() >= ef) break;
            candidates.pop();
            for (auto nb : graph.links[c][level]) {
                if (visit_tag[nb] == epoch) continue;
                visit_tag[nb] = epoch;
                const double d = distance(query, nb);
                if (results.size() < ef || d < results.top().first) {
                    candidates.emplace(d, nb);
                    results.emplace(d, nb);
                    if (results.size() > ef) results.pop();
                }
            }
        }
        std::vector<Scored> out;
        out.reserve(results.size());
        while (!results.empty()) {
            out.push_back(results.top());
            results.pop();
        }
        std::reverse(out.begin(), out.end());
        return out;
    }

    // Diversity heuristic; pruned candidates backfill up to the limit.
    std::vector<std::uint32_t> select(const std::vector<Scored>& sorted_candidates, std::size_t limit) const {
        std::vector<std::uint32_t> kept;
        std::vector<std::uint32_t> pruned;
        for (const auto& [d_e, e] : sorted_candidates) {
            if (kept.size() >= limit) break;
            bool diverse = true;
            for (auto r : kept) {
                if (distance(e, r) < d_e) {
                    diverse = false;
                    break;
                }
            }
            (diverse ? kept : pruned).push_back(e);
        }
        for (auto e : pruned) {
            if (kept.size() >= limit) break;
            kept.push_back(e);
        }
        return kept;
    }

    void insert(std::uint32_t q, std::size_t level, std::size_t& max_level, bool first) {
        graph.links[q].assign(level + 1, {});
        if (first) {
            graph.entry_point = q;
            max_level = level;
            return;
        }
        std::uint32_t ep = graph.entry_point;
        for (std::size_t lc = max_level; lc > level; --lc) ep = search_layer(q, {ep}, 1, lc).front().second;
        std::vector<std::uint32_t> eps{ep};
        for (std::size_t lc = std::min(level, max_level) + 1; lc-- > 0;) {
            const auto found = search_layer(q, eps, graph.params.ef_construction, lc);
            auto& own = graph.links[q][lc];
            own = select(found, graph.params.max_neighbors);
            for (auto e : own) {
                auto& theirs = graph.links[e][lc];
                theirs.push_back(q);
                if (theirs.size() > capacity(lc)) {
                    std::vector<Scored> scored;
                    scored.reserve(theirs.size());
                    for (auto n : theirs) scored.emplace_back(distance(e, n), n);
                    std::sort(scored.begin(), scored.end());
                    theirs = select(scored, capacity(lc));
                }
            }
            eps.clear();
            for (const auto& s : found) eps.push_back(s.second);
        }
        if (level > max_level) {
            max_level = level;
            graph.entry_point = q;
        }
    }
};

}  // namespace

QueryIndex QueryIndex::from_entries(std::vector<IndexEntry> entries, const BuildOptions& options) {
    if (entries.empty()) throw DataError("cannot build an index with no entries");
    QueryIndex ix;
    ix.mode_ = options.mode;
    ix.dim_ = entries.front().vector.dim();
    std::unordered_set<std::string> seen;
    std::map<std::string, std::size_t> per_class;
    ix.vectors_.reserve(entries.size() * ix.dim_);
    for (auto& e : entries) {
        if (e.vector.dim() != ix.dim_) {
            throw DataError("entry '" + e.id + "' has dim " + std::to_string(e.vector.dim()) + ", index dim is " +
                            std::to_string(ix.dim_));
        }
        if (!seen.insert(e.id).second) throw DataError("duplicate index entry id '" + e.id + "'");
        const auto unit = e.vector.normalized() ? e.vector : normalize(e.vector);
        ix.vectors_.insert(ix.vectors_.end(), unit.values().begin(), unit.values().end());
        ++per_class[e.label];
        ix.ids_.push_back(std::move(e.id));
        ix.labels_.push_back(std::move(e.label));
        ix.languages_.push_back(std::move(e.language));
    }
    if (!options.allow_unbalanced) {
        const auto [lo, hi] = std::minmax_element(per_class.begin(), per_class.end(),
                                                  [](const auto& a, const auto& b) { return a.second < b.second; });
        if (lo->second != hi->second) {
            throw DataError("unbalanced index: class '" + lo->first + "' has " + std::to_string(lo->second) +
                            " entries but class '" + hi->first + "' has " + std::to_string(hi->second) +
                            " (pass the allow-unbalanced override to build anyway)");
        }
    }
    if (options.mode == IndexMode::hnsw) ix.build_graph(options.hnsw);
    return ix;
}

void QueryIndex::build_graph(const HnswParams& params) {
    if (params.max_neighbors < 2) throw UsageError("hnsw: max_neighbors must be >= 2");
    if (params.ef_construction < 1) throw UsageError("hnsw: ef_construction must be >= 1");
    HnswGraph graph;
    graph.params = params;
    graph.links.resize(size());
    GraphBuilder builder{vectors_, dim_, graph, std::vector<std::uint32_t>(size(), 0)};
    SplitMix64 rng(params.seed);
    const double level_mult = 1.0 / std::log(static_cast<double>(params.max_neighbors));
    std::size_t max_level = 0;
    for (std::uint32_t i = 0; i < size(); ++i) {
        const double u = 1.0 - rng.uniform();  // (0, 1]
        const auto level = std::min<std::size_t>(255, static_cast<std::size_t>(-std::log(u) * level_mult));
        builder.insert(i, level, max_level, i == 0);
    }
    graph_ = std::move(graph);
    repair_connectivity();
}

// Guarantees every node is reachable on layer 0 from the entry point, so a
// beam as wide as the index visits everything.
void QueryIndex::repair_connectivity() {
    auto& links = graph_->links;
    const std::size_t n = size();
    std::vector<char> reached(n, 0);
    std::vector<std::uint32_t> stack;
    auto flood = [&](std::uint32_t start) {
        if (reached[start]) return;
        reached[start] = 1;
        stack.push_back(start);
        while (!stack.empty()) {
            const auto c = stack.back();
            stack.pop_back();
            for (auto nb : links[c][0]) {
                if (!reached[nb]) {
                    reached[nb] = 1;
                    stack.push_back(nb);
                }
            }
        }
    };
    flood(graph_->entry_point);
    for (std::uint32_t u = 0; u < n; ++u) {
        if (reached[u]) continue;
        std::uint32_t best = graph_->entry_point;
        double best_sim = -2.0;
        for (std::uint32_t r = 0; r < n; ++r) {
            if (!reached[r]) continue;
            const double s = dot(vector(u), vector(r));
            if (s > best_sim) {
                best_sim = s;
                best = r;
            }
        }
        links[best][0].push_back(u);
        if (std::find(links[u][0].begin(), links[u][0].end(), best) == links[u][0].end()) {
            links[u][0].push_back(best);
        }
        flood(u);
    }
}

std::vector<std::string> QueryIndex::labels() const {
    std::vector<std::string> out(labels_.begin(), labels_.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<std::string> QueryIndex::languages() const {
    std::vector<std::string> out(languages_.begin(), languages_.end());
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::vector<float> QueryIndex::prepare_query(const EmbeddingVector& query, std::size_t k) const {
    if (size() == 0) throw DataError("search on an empty index");
    if (k < 1) throw UsageError("k must be >= 1");
    if (query.dim() != dim_) {
        throw DataError("query dim " + std::to_string(query.dim()) + " does not match index dim " +
                        std::to_string(dim_));
    }
    const auto unit = query.normalized() ? query : normalize(query);
    return {unit.values().begin(), unit.values().end()};
}

NeighborSet QueryIndex::make_result(std::vector<std::pair<double, std::uint32_t>> scored, std::size_t k) const {
    const auto before = [this](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return ids_[a.second] < ids_[b.second];
    };
    const std::size_t take = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(), before);
    NeighborSet out;
    out.k_requested = k;
    out.items.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        const auto [sim, o] = scored[i];
        out.items.push_back({std::clamp(sim, -1.0, 1.0), ids_[o], labels_[o], languages_[o]});
    }
    return out;
}

NeighborSet QueryIndex::search_exact(const EmbeddingVector& query, std::size_t k) const {
    const auto q = prepare_query(query, k);
    std::vector<std::pair<double, std::uint32_t>> scored(size());
    for (std::uint32_t i = 0; i < size(); ++i) scored[i] = {dot(q, vector(i)), i};
    return make_result(std::move(scored), k);
}

NeighborSet QueryIndex::search(const EmbeddingVector& query, std::size_t k, const SearchOptions& options) const {
    if (mode_ == IndexMode::exact || !graph_) return search_exact(query, k);
    const auto q = prepare_query(query, k);
    const std::size_t ef = std::max(k, options.ef_search ? options.ef_search : std::max<std::size_t>(64, 2 * k));
    const auto& links = graph_->links;
    auto dist = [&](std::uint32_t i) { return 1.0 - dot(q, vector(i)); };

    std::uint32_t ep = graph_->entry_point;
    double ep_dist = dist(ep);
    for (std::size_t lc = graph_->top_level(ep); lc > 0; --lc) {
        for (bool moved = true; moved;) {
            moved = false;
            for (auto nb : links[ep][lc]) {
                const double d = dist(nb);
                if (d < ep_dist || (d == ep_dist && nb < ep)) {
                    ep = nb;
                    ep_dist = d;
                    moved = true;
                }
            }
        }
    }

    std::vector<char> visited(size(), 0);
    std::priority_queue<Scored, std::vector<Scored>, std::greater<>> candidates;
    std::priority_queue<Scored> results;
    visited[ep] = 1;
    candidates.emplace(ep_dist, ep);
    results.emplace(ep_dist, ep);
    while (!candidates.empty()) {
        const auto [d_c, c] = candidates.top();
        if (d_c > results.top().first && results.size() >= ef) break;
        candidates.pop();
        for (auto nb : links[c][0]) {
            if (visited[nb]) continue;
            visited[nb] = 1;
            const double d = dist(nb);
            if (results.size() < ef || d < results.top().first) {
                candidates.emplace(d, nb);
                results.emplace(d, nb);
                if (results.size() > ef) results.pop();
            }
        }
    }
    std::vector<std::pair<double, std::uint32_t>> scored;
    scored.reserve(results.size());
    while (!results.empty()) {
        const auto o = results.top().second;
        results.pop();
        scored.emplace_back(dot(q, vector(o)), o);
    }
    return make_result(std::move(scored), k);
}

bool QueryIndex::same_entries(const QueryIndex& other) const {
    return dim_ == other.dim_ && ids_ == other.ids_ && labels_ == other.labels_ &&
           languages_ == other.languages_ &&
           std::equal(vectors_.begin(), vectors_.end(), other.vectors_.begin(), other.vectors_.end(),
                      [](float a, float b) { return std::bit_cast<std::uint32_t>(a) == std::bit_cast<std::uint32_t>(b); });
}

std::vector<std::uint8_t> QueryIndex::encode() const {
    ByteWriter w;
    w.raw("QIDX");
    w.u16(kQidxVersion);
    w.u8(static_cast<std::uint8_t>(mode_));
    w.u32(static_cast<std::uint32_t>(dim_));
    w.u64(size());
    for (std::size_t i = 0; i < size(); ++i) {
        w.str(ids_[i]);
        w.str(labels_[i]);
        w.str(languages_[i]);
        for (float x : vector(i)) w.f32(x);
    }
    if (mode_ == IndexMode::hnsw) {
        w.u32(graph_->params.max_neighbors);
        w.u32(graph_->params.ef_construction);
        w.u64(graph_->params.seed);
        w.u32(graph_->entry_point);
        for (const auto& node : graph_->links) {
            w.u8(static_cast<std::uint8_t>(node.size() - 1));
            for (const auto& level : node) {
                w.u32(static_cast<std::uint32_t>(level.size()));
                for (auto nb : level) w.u32(nb);
            }
        }
    }
    w.u32(crc32(w.bytes()));
    return w.take();
}

QueryIndex QueryIndex::decode(std::span<const std::uint8_t> bytes, const std::string& source) {
    ByteReader r(bytes, source);
    if (bytes.size() < 4 || r.raw(4) != "QIDX") throw DataError(source + ": bad magic, not a QIDX file");
    const auto version = r.u16();
    if (version != kQidxVersion) {
        throw DataError(source + ": index version mismatch (file " + std::to_string(version) + ", supported " +
                        std::to_string(kQidxVersion) + ")");
    }
    if (bytes.size() < 4 + 2 + 4) throw DataError(source + ": truncated index file");
    const auto payload = bytes.first(bytes.size() - 4);
    ByteReader tail(bytes.last(4), source);
    if (crc32(payload) != tail.u32()) throw DataError(source + ": checksum failure, index file is corrupted");

    ByteReader p(payload, source);
    p.raw(6);
    QueryIndex ix;
    const auto mode = p.u8();
    if (mode > 1) throw DataError(source + ": unknown index mode " + std::to_string(mode));
    ix.mode_ = static_cast<IndexMode>(mode);
    ix.dim_ = p.u32();
    const auto count = p.u64();
    if (ix.dim_ == 0) throw DataError(source + ": dim must be >= 1");
    if (count > p.remaining() / (12 + 4 * ix.dim_)) throw DataError(source + ": count exceeds payload size");
    for (std::uint64_t i = 0; i < count; ++i) {
        ix.ids_.push_back(p.str());
        ix.labels_.push_back(p.str());
        ix.languages_.push_back(p.str());
        for (std::size_t j = 0; j < ix.dim_; ++j) ix.vectors_.push_back(p.f32());
    }
    if (ix.mode_ == IndexMode::hnsw) {
        HnswGraph g;
        g.params.max_neighbors = p.u32();
        g.params.ef_construction = p.u32();
        g.params.seed = p.u64();
        g.entry_point = p.u32();
        if (g.entry_point >= count) throw DataError(source + ": graph entry point out of range");
        g.links.resize(count);
        for (auto& node : g.links) {
            node.resize(std::size_t(p.u8()) + 1);
            for (auto& level : node) {
                const auto n = p.u32();
                p.require(4ULL * n);
                level.resize(n);
                for (auto& nb : level) {
                    nb = p.u32();
                    if (nb >= count) throw DataError(source + ": graph neighbor ordinal out of range");
                }
            }
        }
        ix.graph_ = std::move(g);
    }
    if (p.remaining() != 0) throw DataError(source + ": trailing bytes in index payload");
    return ix;
}

QueryIndex build_index(const Dataset& d, const EmbeddingStore& store, const BuildOptions& options) {
    std::vector<IndexEntry> entries;
    entries.reserve(d.size());
    for (const auto& r : d.records()) {
        if (!store.contains(r.id)) throw DataError("missing embedding for record id '" + r.id + "'");
        entries.push_back({r.id, store.at(r.id), r.label, r.language});
    }
    return QueryIndex::from_entries(std::move(entries), options);
}

NeighborSet search_topk(const QueryIndex& ix, const EmbeddingVector& q, std::size_t k, const SearchOptions& options) {
    return ix.search(q, k, options);
}

double recall_at_k(const NeighborSet& approx, const NeighborSet& exact, std::size_t k) {
    const std::size_t denom = std::min(k, exact.items.size());
    if (denom == 0) throw DataError("recall_at_k: empty exact result");
    std::unordered_set<std::string> truth;
    for (std::size_t i = 0; i < denom; ++i) truth.insert(exact.items[i].id);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < std::min(k, approx.items.size()); ++i) hits += truth.contains(approx.items[i].id) ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(denom);
}

double measure_recall(const QueryIndex& ann, const QueryIndex& exact, std::span<const EmbeddingVector> queries,
                      std::size_t k, const SearchOptions& options, std::size_t threads) {
    if (!ann.same_entries(exact)) throw DataError("measure_recall: indexes were built from different entries");
    if (queries.empty()) throw UsageError("measure_recall: no queries");
    std::vector<double> per_query(queries.size());
    parallel_for(queries.size(), threads, [&](std::size_t i) {
        per_query[i] = recall_at_k(ann.search(queries[i], k, options), exact.search_exact(queries[i], k), k);
    });
    double sum = 0.0;
    for (double v : per_query) sum += v;
    return sum / static_cast<double>(queries.size());
}

void save_index(const QueryIndex& ix, const std::filesystem::path& path) { write_file_bytes(path, ix.encode()); }

QueryIndex load_index(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    return QueryIndex::decode(bytes, path.string());
}

}  // namespace simquery

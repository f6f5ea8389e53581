#pragma once

// Test-only generators and oracles. Nothing here calls into the search or
// voting code it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <unistd.h>
#include <string>
#include <utility>
#include <vector>

#include "simquery/dataset.hpp"
#include "simquery/embedding.hpp"
#include "simquery/index.hpp"
#include "simquery/rng.hpp"

namespace simquery::testing {

inline std::vector<float> random_unit(std::size_t dim, SplitMix64& rng) {
    std::vector<float> v(dim);
    double sq = 0.0;
    for (auto& x : v) {
        x = static_cast<float>(rng.normal());
        sq += double(x) * x;
    }
    const double n = std::sqrt(sq);
    for (auto& x : v) x = static_cast<float>(x / n);
    return v;
}

inline std::vector<EmbeddingVector> random_unit_vectors(std::size_t count, std::size_t dim, std::uint64_t seed) {
    SplitMix64 rng(seed);
    std::vector<EmbeddingVector> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.emplace_back(random_unit(dim, rng));
    return out;
}

inline std::string make_id(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "v%05zu", i);
    return buf;
}

/// Entries labeled round-robin over `classes` labels (balanced when count
/// is a multiple of classes).
inline std::vector<IndexEntry> entries_from(const std::vector<EmbeddingVector>& vs, std::size_t classes = 1) {
    std::vector<IndexEntry> out;
    for (std::size_t i = 0; i < vs.size(); ++i) {
        out.push_back({make_id(i), vs[i], "c" + std::to_string(i % classes), "en-US"});
    }
    return out;
}

/// Full-sort top-k oracle: scores every entry with a plain double dot over
/// the stored unit vectors, sorts everything, returns the first k ids.
inline std::vector<std::string> full_sort_topk(const QueryIndex& ix, const EmbeddingVector& q, std::size_t k) {
    const auto unit = normalize(q);
    std::vector<std::pair<double, std::string>> all;
    for (std::size_t i = 0; i < ix.size(); ++i) {
        double s = 0.0;
        const auto v = ix.vector(i);
        for (std::size_t j = 0; j < ix.dim(); ++j) s += double(unit.values()[j]) * double(v[j]);
        all.emplace_back(s, ix.id(i));
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < std::min(k, all.size()); ++i) ids.push_back(all[i].second);
    return ids;
}

/// Gaussian clusters: `classes` well-separated unit centers, members are
/// center + N(0, sigma^2) per coordinate.
struct ClusterSet {
    std::vector<QueryRecord> records;
    EmbeddingStore store;
};

inline ClusterSet gaussian_clusters(std::size_t classes, std::size_t per_class, std::size_t dim, double sigma,
                                    std::uint64_t seed, const std::string& id_prefix = "q",
                                    const std::vector<std::string>& languages = {"en-US"}) {
    SplitMix64 rng(seed);
    std::vector<std::vector<double>> centers(classes, std::vector<double>(dim, 0.0));
    // Orthogonal axis-aligned centers scaled to distance sqrt(2) apart.
    for (std::size_t c = 0; c < classes; ++c) centers[c][c % dim] = 1.0;
    ClusterSet out{{}, EmbeddingStore(dim, "synthetic-clusters")};
    std::size_t n = 0;
    for (std::size_t c = 0; c < classes; ++c) {
        for (std::size_t i = 0; i < per_class; ++i) {
            for (const auto& lang : languages) {
                std::vector<float> v(dim);
                for (std::size_t j = 0; j < dim; ++j) v[j] = static_cast<float>(centers[c][j] + sigma * rng.normal());
                const std::string id = id_prefix + std::to_string(n++);
                out.records.push_back({id, "text " + id, "intent_" + std::to_string(c), lang, id});
                out.store.add(id, EmbeddingVector(std::move(v)));
            }
        }
    }
    return out;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::uint64_t counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("simquery_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    out << s;
}

inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Line-counting oracle: non-blank lines of a text file.
inline std::size_t count_nonblank_lines(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") != std::string::npos) ++n;
    }
    return n;
}

struct CorpusFiles {
    std::filesystem::path train;
    std::filesystem::path test;
    std::filesystem::path embeddings;
};

/// Writes a multilingual clustered corpus: train.jsonl with `train_per_cell`
/// semantic keys per class, each present in every language, test.jsonl with
/// `test_per_cell` records per (class, language), and one QEMB store with
/// every vector. Record ids are "<key>_<language>", so the default "_"
/// delimiter recovers the key.
inline CorpusFiles write_corpus(const std::filesystem::path& dir, const std::vector<std::string>& languages,
                                std::size_t classes, std::size_t train_per_cell, std::size_t test_per_cell,
                                std::size_t dim, double sigma, std::uint64_t seed) {
    SplitMix64 rng(seed);
    EmbeddingStore store(dim, "synthetic-clusters");
    auto vec = [&](std::size_t c) {
        std::vector<float> v(dim);
        for (std::size_t j = 0; j < dim; ++j) v[j] = static_cast<float>((j == c % dim ? 1.0 : 0.0) + sigma * rng.normal());
        return EmbeddingVector(std::move(v));
    };
    auto make = [&](const std::string& prefix, std::size_t per_cell) {
        std::vector<QueryRecord> rs;
        for (std::size_t c = 0; c < classes; ++c) {
            for (std::size_t i = 0; i < per_cell; ++i) {
                const std::string key = prefix + std::to_string(c) + "x" + std::to_string(i);
                for (const auto& lang : languages) {
                    const std::string id = key + "_" + lang;
                    rs.push_back({id, "text of " + id, "intent_" + std::to_string(c), lang, key});
                    store.add(id, vec(c));
                }
            }
        }
        return Dataset(std::move(rs));
    };
    CorpusFiles files{dir / "train.jsonl", dir / "test.jsonl", dir / "emb.qemb"};
    write_text(files.train, to_jsonl(make("u", train_per_cell)));
    write_text(files.test, to_jsonl(make("t", test_per_cell)));
    save_embedding_store(store, files.embeddings);
    return files;
}

}  // namespace simquery::testing

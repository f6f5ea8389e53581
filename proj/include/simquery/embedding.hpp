#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace simquery {

/// Fixed-dimension float vector. Components are always finite; the
/// `normalized` flag records that the L2 norm is 1 within 1e-5.
class EmbeddingVector {
public:
    EmbeddingVector() = default;
    /// Throws DataError on empty input or non-finite components.
    explicit EmbeddingVector(std::vector<float> values, bool normalized = false);

    std::size_t dim() const noexcept { return values_.size(); }
    std::span<const float> values() const noexcept { return values_; }
    bool normalized() const noexcept { return normalized_; }
    double norm() const noexcept;

    friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;

private:
    std::vector<float> values_;
    bool normalized_ = false;
};

/// Dot product accumulated in double, in index order.
double dot(std::span<const float> a, std::span<const float> b) noexcept;

/// v / ||v||. Throws DataError when ||v|| <= 1e-12.
EmbeddingVector normalize(const EmbeddingVector& v);

/// dot(a,b) / (||a|| ||b||) clamped to [-1, 1]. Symmetric bit-for-bit.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

/// Deterministic stand-in encoder: character 3-grams (over code points of
/// the ASCII-lowercased text, padded with boundary markers) hashed with
/// signed feature hashing into `dim` buckets, then L2-normalized.
/// Requires dim >= 8 and non-blank text.
EmbeddingVector test_embed(const std::string& text, std::size_t dim, std::uint64_t seed);

/// Vectors keyed by record id, all with the same dimension.
class EmbeddingStore {
public:
    EmbeddingStore() = default;
    EmbeddingStore(std::size_t dim, std::string provider_name);

    /// Throws DataError on dimension mismatch or duplicate id.
    void add(const std::string& id, EmbeddingVector v);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return entries_.size(); }
    const std::string& provider_name() const noexcept { return provider_; }
    /// Ordered by id bytes.
    const std::map<std::string, EmbeddingVector>& entries() const noexcept { return entries_; }

    bool contains(const std::string& id) const { return entries_.contains(id); }
    /// Throws DataError naming the id when missing.
    const EmbeddingVector& at(const std::string& id) const;

    /// Union of stores; dims must agree and ids must be disjoint.
    void merge(const EmbeddingStore& other);

private:
    std::size_t dim_ = 0;
    std::string provider_;
    std::map<std::string, EmbeddingVector> entries_;
};

inline constexpr std::uint16_t kQembVersion = 1;

/// QEMB layout (little-endian): "QEMB", u16 version, u32 dim, u64 count,
/// count x [u32 id_len, id bytes, dim x f32], u32 provider_len, provider.
/// Records are written sorted by id bytes.
std::vector<std::uint8_t> encode_qemb(const EmbeddingStore& store);
EmbeddingStore decode_qemb(std::span<const std::uint8_t> bytes, const std::string& source = "qemb");

EmbeddingStore load_embedding_store(const std::filesystem::path& path);
void save_embedding_store(const EmbeddingStore& store, const std::filesystem::path& path);

}  // namespace simquery

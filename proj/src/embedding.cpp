#include "simquery/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "simquery/binary_io.hpp"
#include "simquery/error.hpp"
#include "simquery/rng.hpp"

namespace simquery {

EmbeddingVector::EmbeddingVector(std::vector<float> values, bool normalized)
    : values_(std::move(values)), normalized_(normalized) {
    if (values_.empty()) throw DataError("embedding vector must have dim >= 1");
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i])) {
            throw DataError("embedding vector has non-finite component at position " + std::to_string(i));
        }
    }
}

double EmbeddingVector::norm() const noexcept { return std::sqrt(dot(values_, values_)); }

double dot(std::span<const float> a, std::span<const float> b) noexcept {
    double acc = 0.0;
    const std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return acc;
}

EmbeddingVector normalize(const EmbeddingVector& v) {
    const double n = v.norm();
    if (!(n > 1e-12)) throw DataError("cannot normalize a near-zero vector");
    std::vector<float> out(v.dim());
    const auto in = v.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(in[i] / n);
    return EmbeddingVector(std::move(out), true);
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dim() != b.dim()) {
        throw DataError("dimension mismatch: " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
    }
    const double na = a.norm();
    const double nb = b.norm();
    if (!(na > 0.0) || !(nb > 0.0)) throw DataError("cosine similarity of a zero vector");
    const double c = dot(a.values(), b.values()) / (na * nb);
    return std::clamp(c, -1.0, 1.0);
}

namespace {

// Decodes UTF-8 into code points, replacing invalid sequences by U+FFFD.
std::vector<char32_t> code_points(const std::string& s) {
    std::vector<char32_t> out;
    std::size_t i = 0;
    while (i < s.size()) {
        const auto c = static_cast<unsigned char>(s[i]);
        int len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 0;
        if (len == 0 || i + static_cast<std::size_t>(len) > s.size()) {
            out.push_back(0xFFFD);
            ++i;
            continue;
        }
        char32_t cp = len == 1 ? c : c & (0x7F >> len);
        bool ok = true;
        for (int k = 1; k < len; ++k) {
            const auto cc = static_cast<unsigned char>(s[i + k]);
            if ((cc >> 6) != 0x2) {
                ok = false;
                break;
            }
            cp = (cp << 6) | (cc & 0x3F);
        }
        if (!ok) {
            out.push_back(0xFFFD);
            ++i;
            continue;
        }
        if (cp < 0x80 && cp >= 'A' && cp <= 'Z') cp += 'a' - 'A';
        out.push_back(cp);
        i += static_cast<std::size_t>(len);
    }
    return out;
}

}  // namespace

EmbeddingVector test_embed(const std::string& text, std::size_t dim, std::uint64_t seed) {
    if (dim < 8) throw UsageError("test_embed: dim must be >= 8");
    if (std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c) != 0; })) {
        throw DataError("test_embed: empty text");
    }
    std::vector<char32_t> cps;
    cps.push_back(0x02);
    const auto body = code_points(text);
    cps.insert(cps.end(), body.begin(), body.end());
    cps.push_back(0x03);

    std::vector<double> acc(dim, 0.0);
    for (std::size_t i = 0; i + 3 <= cps.size(); ++i) {
        // Hash the 12 bytes of the three code points (little-endian u32 each).
        char buf[12];
        for (int k = 0; k < 3; ++k) {
            const auto cp = static_cast<std::uint32_t>(cps[i + k]);
            for (int b = 0; b < 4; ++b) buf[4 * k + b] = static_cast<char>((cp >> (8 * b)) & 0xFF);
        }
        const std::uint64_t h = SplitMix64::mix(fnv1a64({buf, sizeof buf}) ^ seed);
        const std::size_t bucket = static_cast<std::size_t>(h % dim);
        acc[bucket] += (h >> 63) ? -1.0 : 1.0;
    }
    double sq = 0.0;
    for (double a : acc) sq += a * a;
    if (sq == 0.0) throw DataError("test_embed: hashed features cancel to a zero vector");
    const double n = std::sqrt(sq);
    std::vector<float> out(dim);
    for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(acc[i] / n);
    return EmbeddingVector(std::move(out), true);
}

EmbeddingStore::EmbeddingStore(std::size_t dim, std::string provider_name)
    : dim_(dim), provider_(std::move(provider_name)) {
    if (dim_ == 0) throw DataError("embedding store dim must be >= 1");
}

void EmbeddingStore::add(const std::string& id, EmbeddingVector v) {
    if (v.dim() != dim_) {
        throw DataError("embedding for '" + id + "' has dim " + std::to_string(v.dim()) + ", store dim is " +
                        std::to_string(dim_));
    }
    if (!entries_.emplace(id, std::move(v)).second) throw DataError("duplicate embedding id '" + id + "'");
}

const EmbeddingVector& EmbeddingStore::at(const std::string& id) const {
    const auto it = entries_.find(id);
    if (it == entries_.end()) throw DataError("no embedding for record id '" + id + "'");
    return it->second;
}

void EmbeddingStore::merge(const EmbeddingStore& other) {
    if (entries_.empty() && dim_ == 0) {
        *this = other;
        return;
    }
    if (other.dim_ != dim_) {
        throw DataError("cannot merge embedding stores of dim " + std::to_string(dim_) + " and " +
                        std::to_string(other.dim_));
    }
    for (const auto& [id, v] : other.entries_) add(id, v);
    if (provider_ != other.provider_) provider_ += "+" + other.provider_;
}

std::vector<std::uint8_t> encode_qemb(const EmbeddingStore& store) {
    ByteWriter w;
    w.raw("QEMB");
    w.u16(kQembVersion);
    w.u32(static_cast<std::uint32_t>(store.dim()));
    w.u64(store.size());
    for (const auto& [id, v] : store.entries()) {
        w.str(id);
        for (float x : v.values()) w.f32(x);
    }
    w.str(store.provider_name());
    return w.take();
}

EmbeddingStore decode_qemb(std::span<const std::uint8_t> bytes, const std::string& source) {
    ByteReader r(bytes, source);
    if (bytes.size() < 4 || r.raw(4) != "QEMB") throw DataError(source + ": bad magic, not a QEMB file");
    const auto version = r.u16();
    if (version != kQembVersion) {
        throw DataError(source + ": unsupported QEMB version " + std::to_string(version));
    }
    const std::uint32_t dim = r.u32();
    const std::uint64_t count = r.u64();
    if (dim == 0) throw DataError(source + ": dim must be >= 1");
    // Smallest possible record is 4 + 4*dim bytes; reject impossible counts before allocating.
    const std::uint64_t min_record = 4 + 4ULL * dim;
    if (count > r.remaining() / min_record) {
        throw DataError(source + ": count " + std::to_string(count) + " x dim " + std::to_string(dim) +
                        " needs at least " + std::to_string(r.position() + count * min_record) +
                        " bytes, file has " + std::to_string(bytes.size()));
    }
    std::vector<std::pair<std::string, std::vector<float>>> records;
    records.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        std::string id = r.str();
        std::vector<float> values(dim);
        r.require(4ULL * dim);
        for (auto& v : values) v = r.f32();
        records.emplace_back(std::move(id), std::move(values));
    }
    std::string provider = r.str();
    if (r.remaining() != 0) {
        throw DataError(source + ": " + std::to_string(r.remaining()) + " trailing bytes after payload");
    }
    EmbeddingStore store(dim, std::move(provider));
    for (auto& [id, values] : records) {
        for (std::size_t j = 0; j < values.size(); ++j) {
            if (std::isnan(values[j])) throw DataError(source + ": NaN component in record '" + id + "'");
        }
        store.add(id, EmbeddingVector(std::move(values)));
    }
    return store;
}

EmbeddingStore load_embedding_store(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    return decode_qemb(bytes, path.string());
}

void save_embedding_store(const EmbeddingStore& store, const std::filesystem::path& path) {
    write_file_bytes(path, encode_qemb(store));
}

}  // namespace simquery

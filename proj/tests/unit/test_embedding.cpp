#include <gtest/gtest.h>

#include <cmath>

#include "simquery/binary_io.hpp"
#include "simquery/embedding.hpp"
#include "simquery/error.hpp"
#include "simquery/rng.hpp"
#include "support/synthetic.hpp"

using namespace simquery;
using simquery::testing::TempDir;

TEST(EmbeddingVector, RejectsEmptyAndNonFinite) {
    EXPECT_THROW(EmbeddingVector(std::vector<float>{}), DataError);
    EXPECT_THROW(EmbeddingVector(std::vector<float>{1.0f, NAN}), DataError);
    EXPECT_THROW(EmbeddingVector(std::vector<float>{INFINITY}), DataError);
}

TEST(Normalize, Examples) {
    const auto n = normalize(EmbeddingVector({3.0f, 4.0f}));
    EXPECT_FLOAT_EQ(n.values()[0], 0.6f);
    EXPECT_FLOAT_EQ(n.values()[1], 0.8f);
    EXPECT_TRUE(n.normalized());

    const auto again = normalize(n);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(again.values()[i], n.values()[i], 1e-7);
    EXPECT_THROW(normalize(EmbeddingVector({0.0f, 0.0f})), DataError);
}

TEST(CosineSimilarity, Examples) {
    const EmbeddingVector a({1.0f, 2.0f, -3.0f});
    EXPECT_NEAR(cosine_similarity(a, a), 1.0, 1e-12);
    EXPECT_EQ(cosine_similarity(EmbeddingVector({1.0f, 0.0f}), EmbeddingVector({0.0f, 1.0f})), 0.0);
    // Hand computation: (1,1).(1,0) / (sqrt2 * 1) = 1/sqrt2.
    EXPECT_NEAR(cosine_similarity(EmbeddingVector({1.0f, 1.0f}), EmbeddingVector({1.0f, 0.0f})), 0.7071, 1e-4);
    EXPECT_THROW(cosine_similarity(EmbeddingVector({1.0f}), EmbeddingVector({1.0f, 0.0f})), DataError);
    EXPECT_THROW(cosine_similarity(EmbeddingVector({0.0f, 0.0f}), EmbeddingVector({1.0f, 0.0f})), DataError);
}

TEST(CosineSimilarity, Properties) {
    SplitMix64 rng(42);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t dim = 1 + rng.below(64);
        std::vector<float> av(dim), bv(dim);
        for (auto& x : av) x = static_cast<float>(rng.normal());
        for (auto& x : bv) x = static_cast<float>(rng.normal());
        const EmbeddingVector a(av), b(bv);
        const double ab = cosine_similarity(a, b);
        EXPECT_EQ(ab, cosine_similarity(b, a));  // exact symmetry
        EXPECT_GE(ab, -1.0);
        EXPECT_LE(ab, 1.0);

        const float c = static_cast<float>(0.01 + 100.0 * rng.uniform());
        std::vector<float> scaled(av);
        for (auto& x : scaled) x *= c;
        EXPECT_NEAR(cosine_similarity(EmbeddingVector(scaled), b), ab, 1e-6);

        const auto na = normalize(a), nb = normalize(b);
        EXPECT_NEAR(cosine_similarity(na, nb), dot(na.values(), nb.values()), 1e-6);
    }
}

TEST(TestEmbed, DeterministicNormalizedAndDiscriminative) {
    const auto a = test_embed("book a flight", 64, 7);
    const auto b = test_embed("book a flight", 64, 7);
    EXPECT_EQ(a, b);
    EXPECT_NEAR(a.norm(), 1.0, 1e-5);
    EXPECT_TRUE(a.normalized());
    EXPECT_LT(cosine_similarity(test_embed("abc", 64, 7), test_embed("abd", 64, 7)), 1.0);
    // Lower-casing happens before hashing.
    EXPECT_EQ(test_embed("Book A Flight", 64, 7), a);
    // The seed changes the hash.
    EXPECT_NE(test_embed("book a flight", 64, 8), a);
}

TEST(TestEmbed, SharedSubstringsRaiseSimilarity) {
    const auto base = test_embed("book a flight to boston", 256, 1);
    const auto near = test_embed("book a flight to denver", 256, 1);
    const auto far = test_embed("what is the weather like", 256, 1);
    EXPECT_GT(cosine_similarity(base, near), cosine_similarity(base, far));
}

TEST(TestEmbed, Errors) {
    EXPECT_THROW(test_embed("hello", 4, 0), UsageError);
    EXPECT_THROW(test_embed("", 64, 0), DataError);
    EXPECT_THROW(test_embed("   ", 64, 0), DataError);
}

TEST(TestEmbed, PurePropertyOverRandomStrings) {
    SplitMix64 rng(3);
    const std::string alphabet = "abcdefghijklmnopqrstuvwxyz ABC\xc3\xa9\xe4\xb8\xad";
    for (int trial = 0; trial < 200; ++trial) {
        std::string s;
        const auto len = 1 + rng.below(30);
        for (std::uint64_t i = 0; i < len; ++i) s += alphabet[rng.below(alphabet.size())];
        if (s.find_first_not_of(' ') == std::string::npos) s += "x";
        const std::size_t dim = 8 + rng.below(120);
        const std::uint64_t seed = rng.next();
        const auto v1 = test_embed(s, dim, seed);
        const auto v2 = test_embed(std::string(s), dim, seed);
        EXPECT_EQ(v1, v2);
        EXPECT_EQ(v1.dim(), dim);
        EXPECT_NEAR(v1.norm(), 1.0, 1e-5);
    }
}

namespace {

EmbeddingStore small_store() {
    EmbeddingStore s(4, "unit-test");
    s.add("b", EmbeddingVector({1.0f, 2.0f, 3.0f, 4.0f}));
    s.add("a", EmbeddingVector({-1.0f, 0.5f, 0.25f, 8.0f}));
    return s;
}

}  // namespace

TEST(Qemb, RoundTripIsByteIdentical) {
    TempDir dir("qemb");
    const auto path = dir / "s.qemb";
    save_embedding_store(small_store(), path);
    const auto first = read_file_bytes(path);
    const auto loaded = load_embedding_store(path);
    EXPECT_EQ(loaded.size(), 2u);
    EXPECT_EQ(loaded.dim(), 4u);
    EXPECT_EQ(loaded.provider_name(), "unit-test");
    EXPECT_FALSE(loaded.at("a").normalized());  // not renormalized on load
    EXPECT_FLOAT_EQ(loaded.at("a").values()[3], 8.0f);
    save_embedding_store(loaded, dir / "t.qemb");
    EXPECT_EQ(read_file_bytes(dir / "t.qemb"), first);
}

TEST(Qemb, ExactLayout) {
    EmbeddingStore s(1, "p");
    s.add("x", EmbeddingVector({1.0f}));
    const auto bytes = encode_qemb(s);
    const std::vector<std::uint8_t> expected{'Q', 'E', 'M', 'B', 1, 0,                   // magic, version
                                             1, 0, 0, 0,                                 // dim
                                             1, 0, 0, 0, 0, 0, 0, 0,                     // count
                                             1, 0, 0, 0, 'x', 0x00, 0x00, 0x80, 0x3F,    // id, 1.0f
                                             1, 0, 0, 0, 'p'};                           // provider
    EXPECT_EQ(bytes, expected);
}

TEST(Qemb, ReaderAcceptsUnsortedRecords) {
    ByteWriter w;
    w.raw("QEMB");
    w.u16(1);
    w.u32(1);
    w.u64(2);
    w.str("z");
    w.f32(1.0f);
    w.str("a");
    w.f32(2.0f);
    w.str("prov");
    const auto store = decode_qemb(w.bytes());
    EXPECT_EQ(store.size(), 2u);
    EXPECT_NE(encode_qemb(store), w.bytes());  // canonical writer sorts
}

TEST(Qemb, Errors) {
    auto good = encode_qemb(small_store());
    auto bad_magic = good;
    bad_magic[0] = 'X';
    EXPECT_THROW(decode_qemb(bad_magic), DataError);

    auto truncated = good;
    truncated.resize(good.size() - 10);
    try {
        decode_qemb(truncated);
        FAIL();
    } catch (const DataError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("expected"), std::string::npos) << msg;
        EXPECT_NE(msg.find(std::to_string(truncated.size())), std::string::npos) << msg;
    }

    ByteWriter dup;
    dup.raw("QEMB");
    dup.u16(1);
    dup.u32(1);
    dup.u64(2);
    dup.str("a");
    dup.f32(1.0f);
    dup.str("a");
    dup.f32(2.0f);
    dup.str("p");
    EXPECT_THROW(decode_qemb(dup.bytes()), DataError);

    ByteWriter nan;
    nan.raw("QEMB");
    nan.u16(1);
    nan.u32(1);
    nan.u64(1);
    nan.str("a");
    nan.f32(NAN);
    nan.str("p");
    EXPECT_THROW(decode_qemb(nan.bytes()), DataError);

    ByteWriter huge;
    huge.raw("QEMB");
    huge.u16(1);
    huge.u32(4);
    huge.u64(1'000'000);
    EXPECT_THROW(decode_qemb(huge.bytes()), DataError);
}

TEST(EmbeddingStore, AddAndMerge) {
    auto s = small_store();
    EXPECT_THROW(s.add("a", EmbeddingVector({1.0f, 1.0f, 1.0f, 1.0f})), DataError);
    EXPECT_THROW(s.add("c", EmbeddingVector({1.0f})), DataError);
    EXPECT_THROW(s.at("missing"), DataError);
    EmbeddingStore other(4, "unit-test");
    other.add("c", EmbeddingVector({0.0f, 0.0f, 0.0f, 1.0f}));
    s.merge(other);
    EXPECT_EQ(s.size(), 3u);
    EXPECT_THROW(s.merge(other), DataError);
}

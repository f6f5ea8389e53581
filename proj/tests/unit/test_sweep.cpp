#include <gtest/gtest.h>

#include "simquery/error.hpp"
#include "simquery/metrics.hpp"
#include "simquery/sweep.hpp"
#include "support/synthetic.hpp"

using namespace simquery;
namespace st = simquery::testing;

namespace {

struct Fixture {
    QueryIndex ix;
    Dataset test;
    EmbeddingStore store;
};

// 200-entry random index over 4 labels; test queries are random vectors with
// random gold labels so predictions vary with k.
Fixture random_fixture(std::uint64_t seed, IndexMode mode = IndexMode::exact) {
    BuildOptions opts;
    opts.mode = mode;
    opts.hnsw.seed = seed;
    auto ix = QueryIndex::from_entries(st::entries_from(st::random_unit_vectors(200, 16, seed), 4), opts);
    EmbeddingStore store(16, "random");
    std::vector<QueryRecord> rs;
    SplitMix64 rng(seed + 1);
    const auto qs = st::random_unit_vectors(60, 16, seed + 2);
    for (std::size_t i = 0; i < qs.size(); ++i) {
        const std::string id = "t" + std::to_string(i);
        rs.push_back({id, "text", "c" + std::to_string(rng.below(4)), "en-US", id});
        store.add(id, qs[i]);
    }
    return {std::move(ix), Dataset(std::move(rs)), std::move(store)};
}

// Per-k oracle: an independent search and vote for every grid point.
SweepTable per_k_oracle(const Fixture& f, const std::vector<std::size_t>& grid, const SearchOptions& search) {
    SweepTable t;
    t.provider = f.store.provider_name();
    for (auto k : grid) {
        ConfusionMatrix cm;
        std::size_t ties = 0;
        for (const auto& r : f.test.records()) {
            const auto p = classify_query(f.ix, f.store.at(r.id), k, {}, search);
            cm.add(r.label, p.predicted_label);
            ties += p.tie_broken;
        }
        t.rows.push_back({k, cm.accuracy(), cm.macro_f1(), double(ties) / double(f.test.size())});
    }
    return t;
}

SweepTable table_of(const std::string& provider, const std::vector<std::pair<std::size_t, double>>& acc) {
    SweepTable t{provider, {}};
    for (auto [k, a] : acc) t.rows.push_back({k, a, a, 0.0});
    return t;
}

}  // namespace

TEST(Sweep, DefaultGridHas38Points) {
    const auto grid = sweep_grid({}, 1000);
    ASSERT_EQ(grid.size(), 38u);
    EXPECT_EQ(grid.front(), 1u);
    EXPECT_EQ(grid.back(), 75u);
}

TEST(Sweep, GridClampedToIndexSize) {
    const auto grid = sweep_grid({}, 20);
    EXPECT_EQ(grid.back(), 19u);
    EXPECT_EQ(grid.size(), 10u);
    EXPECT_THROW(sweep_grid({5, 9, 2}, 3), DataError);
    EXPECT_THROW(sweep_grid({0, 9, 2}, 30), UsageError);
}

TEST(Sweep, SingleClassIndexIsAlwaysRight) {
    const auto train = st::gaussian_clusters(1, 80, 8, 0.1, 1, "tr");
    const auto test = st::gaussian_clusters(1, 10, 8, 0.1, 2, "te");
    const auto ix = build_index(Dataset(train.records), train.store, {});
    const auto table = sweep_k(ix, Dataset(test.records), test.store);
    ASSERT_EQ(table.rows.size(), 38u);
    for (const auto& row : table.rows) {
        EXPECT_EQ(row.accuracy, 1.0);
        EXPECT_EQ(row.macro_f1, 1.0);
    }
}

TEST(Sweep, PrefixTruncationMatchesPerKSearch) {
    const auto f = random_fixture(42);
    const auto table = sweep_k(f.ix, f.test, f.store);
    EXPECT_EQ(table, per_k_oracle(f, sweep_grid({}, f.ix.size()), {}));
}

TEST(Sweep, PrefixTruncationMatchesPerKSearchHnsw) {
    const auto f = random_fixture(43, IndexMode::hnsw);
    const auto table = sweep_k(f.ix, f.test, f.store);
    // The sweep fixes the beam at the largest k; the oracle uses the same beam.
    EXPECT_EQ(table, per_k_oracle(f, sweep_grid({}, f.ix.size()), {150}));
}

TEST(Sweep, IndependentOfTestOrderAndThreads) {
    const auto f = random_fixture(44);
    const auto base = sweep_k(f.ix, f.test, f.store);
    auto records = f.test.records();
    SplitMix64 rng(1);
    shuffle(records, rng);
    SweepOptions opts;
    opts.threads = 3;
    const auto permuted = sweep_k(f.ix, Dataset(records), f.store, opts);
    ASSERT_EQ(base.rows.size(), permuted.rows.size());
    for (std::size_t i = 0; i < base.rows.size(); ++i) {
        EXPECT_EQ(base.rows[i].k, permuted.rows[i].k);
        EXPECT_EQ(base.rows[i].accuracy, permuted.rows[i].accuracy);
        EXPECT_NEAR(base.rows[i].macro_f1, permuted.rows[i].macro_f1, 1e-15);
        EXPECT_EQ(base.rows[i].tie_rate, permuted.rows[i].tie_rate);
    }
}

TEST(Aggregate, IdenticalTables) {
    const auto t = table_of("p", {{1, 0.5}, {3, 0.6}});
    const auto agg = aggregate_sweeps({t, t});
    EXPECT_DOUBLE_EQ(agg.rows[0].mean_accuracy, 0.5);
    EXPECT_DOUBLE_EQ(agg.rows[1].mean_accuracy, 0.6);
}

TEST(Aggregate, HandArithmetic) {
    const auto agg = aggregate_sweeps({table_of("a", {{1, 0.8}, {3, 0.9}}), table_of("b", {{1, 0.6}, {3, 0.7}})});
    EXPECT_NEAR(agg.rows[0].mean_accuracy, 0.7, 1e-12);
    EXPECT_NEAR(agg.rows[1].mean_accuracy, 0.8, 1e-12);
    EXPECT_EQ(agg.best_k_accuracy, 3u);
}

TEST(Aggregate, TiesGoToSmallerK) {
    const auto agg = aggregate_sweeps({table_of("a", {{1, 0.5}, {3, 0.9}, {5, 0.9}})});
    EXPECT_EQ(agg.best_k_accuracy, 3u);
}

TEST(Aggregate, MismatchedGrid) {
    EXPECT_THROW(aggregate_sweeps({table_of("a", {{1, 0.8}}), table_of("b", {{3, 0.6}})}), DataError);
    EXPECT_THROW(aggregate_sweeps({}), DataError);
}

TEST(Aggregate, ArgmaxInvariantUnderConstantShift) {
    SplitMix64 rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<SweepTable> tables, shifted;
        for (int p = 0; p < 5; ++p) {
            std::vector<std::pair<std::size_t, double>> acc, acc_shift;
            for (std::size_t k = 1; k <= 75; k += 2) {
                const double a = std::round(rng.uniform() * 1000.0) / 1024.0;
                acc.emplace_back(k, a);
                acc_shift.emplace_back(k, a + 0.125);
            }
            tables.push_back(table_of("p", acc));
            shifted.push_back(table_of("p", acc_shift));
        }
        EXPECT_EQ(aggregate_sweeps(tables).best_k_accuracy, aggregate_sweeps(shifted).best_k_accuracy);
    }
}

TEST(SweepOutput, CsvAndSvg) {
    const auto t = table_of("p", {{1, 0.5}, {3, 0.75}});
    EXPECT_EQ(sweep_to_csv(t), "k,accuracy,macro_f1,tie_rate\n1,0.500000,0.500000,0.000000\n3,0.750000,0.750000,0.000000\n");
    const auto svg = sweep_to_svg(t);
    EXPECT_EQ(svg.rfind("<svg", 0), 0u);
    EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

#include "simquery/sweep.hpp"

#include <algorithm>
#include <cstdio>

#include "simquery/error.hpp"
#include "simquery/log.hpp"
#include "simquery/metrics.hpp"
#include "simquery/parallel.hpp"

namespace simquery {

std::vector<std::size_t> sweep_grid(const SweepOptions& options, std::size_t index_size) {
    if (options.k_min < 1 || options.step < 1 || options.k_max < options.k_min) {
        throw UsageError("sweep: need 1 <= k_min <= k_max and step >= 1");
    }
    std::vector<std::size_t> grid;
    std::size_t dropped = 0;
    for (std::size_t k = options.k_min; k <= options.k_max; k += options.step) {
        if (k > index_size) {
            ++dropped;
            continue;
        }
        grid.push_back(k);
    }
    if (dropped > 0) {
        log::warn("sweep.k_clamped", {{"index_size", std::to_string(index_size)},
                                      {"k_max", std::to_string(options.k_max)},
                                      {"dropped", std::to_string(dropped)}});
    }
    if (grid.empty()) throw DataError("sweep: no k in the grid fits an index of size " + std::to_string(index_size));
    return grid;
}

SweepTable sweep_k(const QueryIndex& ix, const Dataset& test, const EmbeddingStore& store,
                   const SweepOptions& options) {
    if (test.empty()) throw DataError("sweep: empty test set");
    const auto grid = sweep_grid(options, ix.size());
    const std::size_t k_top = grid.back();
    SearchOptions search = options.search;
    if (search.ef_search == 0) search.ef_search = std::max<std::size_t>(64, 2 * k_top);

    const auto& records = test.records();
    std::vector<NeighborSet> neighbors(records.size());
    parallel_for(records.size(), options.threads, [&](std::size_t i) {
        neighbors[i] = ix.search(store.at(records[i].id), k_top, search);
    });

    SweepTable table;
    table.provider = store.provider_name();
    for (const auto k : grid) {
        ConfusionMatrix cm;
        std::size_t ties = 0;
        for (std::size_t i = 0; i < records.size(); ++i) {
            const auto p = resolve_label(neighbors[i].prefix(k), options.vote);
            cm.add(records[i].label, p.predicted_label);
            ties += p.tie_broken ? 1 : 0;
        }
        table.rows.push_back({k, cm.accuracy(), cm.macro_f1(),
                              static_cast<double>(ties) / static_cast<double>(records.size())});
    }
    return table;
}

SweepAggregate aggregate_sweeps(const std::vector<SweepTable>& tables) {
    if (tables.empty()) throw DataError("aggregate_sweeps: no tables");
    const auto& first = tables.front().rows;
    for (const auto& t : tables) {
        bool same = t.rows.size() == first.size();
        for (std::size_t i = 0; same && i < first.size(); ++i) same = t.rows[i].k == first[i].k;
        if (!same) throw DataError("aggregate_sweeps: provider '" + t.provider + "' has a different k grid");
    }
    SweepAggregate agg;
    const double n = static_cast<double>(tables.size());
    for (std::size_t i = 0; i < first.size(); ++i) {
        AggregateRow row{first[i].k, 0.0, 0.0};
        for (const auto& t : tables) {
            row.mean_accuracy += t.rows[i].accuracy;
            row.mean_macro_f1 += t.rows[i].macro_f1;
        }
        row.mean_accuracy /= n;
        row.mean_macro_f1 /= n;
        agg.rows.push_back(row);
    }
    const AggregateRow* best_acc = &agg.rows.front();
    const AggregateRow* best_f1 = &agg.rows.front();
    for (const auto& row : agg.rows) {
        if (row.mean_accuracy > best_acc->mean_accuracy) best_acc = &row;
        if (row.mean_macro_f1 > best_f1->mean_macro_f1) best_f1 = &row;
    }
    agg.best_k_accuracy = best_acc->k;
    agg.best_k_macro_f1 = best_f1->k;
    return agg;
}

std::string sweep_to_csv(const SweepTable& table) {
    std::string out = "k,accuracy,macro_f1,tie_rate\n";
    char buf[128];
    for (const auto& r : table.rows) {
        std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f,%.6f\n", r.k, r.accuracy, r.macro_f1, r.tie_rate);
        out += buf;
    }
    return out;
}

std::string sweep_to_svg(const SweepTable& table) {
    constexpr double width = 640, height = 360, left = 50, right = 20, top = 20, bottom = 40;
    const double k_lo = table.rows.empty() ? 0.0 : static_cast<double>(table.rows.front().k);
    const double k_hi = table.rows.empty() ? 1.0 : static_cast<double>(table.rows.back().k);
    const double span = k_hi > k_lo ? k_hi - k_lo : 1.0;
    auto x = [&](double k) { return left + (k - k_lo) / span * (width - left - right); };
    auto y = [&](double v) { return top + (1.0 - v) * (height - top - bottom); };
    char buf[160];
    std::string out;
    std::snprintf(buf, sizeof buf,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\">\n", width, height);
    out += buf;
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%.0f\" y=\"%.0f\" width=\"%.0f\" height=\"%.0f\" fill=\"none\" stroke=\"#888\"/>\n",
                  left, top, width - left - right, height - top - bottom);
    out += buf;
    auto polyline = [&](const char* color, auto metric) {
        out += "<polyline fill=\"none\" stroke=\"";
        out += color;
        out += "\" stroke-width=\"2\" points=\"";
        for (const auto& r : table.rows) {
            std::snprintf(buf, sizeof buf, "%.2f,%.2f ", x(static_cast<double>(r.k)), y(metric(r)));
            out += buf;
        }
        out += "\"/>\n";
    };
    polyline("#1f77b4", [](const SweepRow& r) { return r.accuracy; });
    polyline("#d62728", [](const SweepRow& r) { return r.macro_f1; });
    std::snprintf(buf, sizeof buf, "<text x=\"%.0f\" y=\"%.0f\" font-size=\"12\">k = %.0f .. %.0f</text>\n", left,
                  height - 12, k_lo, k_hi);
    out += buf;
    out += "<text x=\"60\" y=\"36\" font-size=\"12\" fill=\"#1f77b4\">accuracy</text>\n";
    out += "<text x=\"60\" y=\"52\" font-size=\"12\" fill=\"#d62728\">macro F1</text>\n";
    out += "</svg>\n";
    return out;
}

}  // namespace simquery

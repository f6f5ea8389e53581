#include "simquery/metrics.hpp"

#include <set>
#include <unordered_map>

#include "simquery/error.hpp"

namespace simquery {

void ConfusionMatrix::add(const std::string& gold, const std::string& predicted, std::size_t n) {
    cells_[{gold, predicted}] += n;
    gold_totals_[gold] += n;
    predicted_totals_[predicted] += n;
    total_ += n;
    if (gold == predicted) correct_ += n;
}

std::size_t ConfusionMatrix::count(const std::string& gold, const std::string& predicted) const {
    const auto it = cells_.find({gold, predicted});
    return it == cells_.end() ? 0 : it->second;
}

std::vector<std::string> ConfusionMatrix::gold_labels() const {
    std::vector<std::string> out;
    for (const auto& [label, n] : gold_totals_) out.push_back(label);
    return out;
}

double ConfusionMatrix::accuracy() const {
    if (total_ == 0) throw DataError("accuracy of an empty evaluation set");
    return static_cast<double>(correct_) / static_cast<double>(total_);
}

std::vector<ClassMetrics> ConfusionMatrix::per_class() const {
    std::vector<ClassMetrics> out;
    for (const auto& [label, gold_n] : gold_totals_) {
        const std::size_t tp = count(label, label);
        const auto pit = predicted_totals_.find(label);
        const std::size_t predicted_n = pit == predicted_totals_.end() ? 0 : pit->second;
        ClassMetrics m;
        m.label = label;
        m.support = gold_n;
        m.precision = predicted_n ? static_cast<double>(tp) / static_cast<double>(predicted_n) : 0.0;
        m.recall = static_cast<double>(tp) / static_cast<double>(gold_n);
        m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
        out.push_back(m);
    }
    return out;
}

double ConfusionMatrix::macro_f1() const {
    if (total_ == 0) throw DataError("macro-F1 of an empty evaluation set");
    double sum = 0.0;
    const auto classes = per_class();
    for (const auto& m : classes) sum += m.f1;
    return sum / static_cast<double>(classes.size());
}

std::vector<std::pair<std::string, std::string>> align_with_gold(const std::vector<LabeledPrediction>& preds,
                                                                 const Dataset& gold) {
    if (gold.empty()) throw DataError("evaluation against an empty test set");
    std::unordered_map<std::string, const std::string*> predicted;
    predicted.reserve(preds.size());
    for (const auto& p : preds) {
        if (!predicted.emplace(p.id, &p.label).second) throw DataError("duplicate prediction for id '" + p.id + "'");
    }
    std::vector<std::pair<std::string, std::string>> pairs;
    pairs.reserve(gold.size());
    for (const auto& r : gold.records()) {
        const auto it = predicted.find(r.id);
        if (it == predicted.end()) throw DataError("missing prediction for id '" + r.id + "'");
        pairs.emplace_back(r.label, *it->second);
    }
    if (predicted.size() != gold.size()) {
        for (const auto& p : preds) {
            if (!gold.find(p.id)) throw DataError("prediction for unknown id '" + p.id + "'");
        }
    }
    return pairs;
}

ConfusionMatrix confusion_matrix(const std::vector<LabeledPrediction>& preds, const Dataset& gold) {
    ConfusionMatrix cm;
    for (const auto& [g, p] : align_with_gold(preds, gold)) cm.add(g, p);
    return cm;
}

double accuracy(const std::vector<LabeledPrediction>& preds, const Dataset& gold) {
    const auto pairs = align_with_gold(preds, gold);
    std::size_t correct = 0;
    for (const auto& [g, p] : pairs) correct += g == p ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

double macro_f1(const std::vector<LabeledPrediction>& preds, const Dataset& gold) {
    const auto pairs = align_with_gold(preds, gold);
    std::set<std::string> classes;
    for (const auto& [g, p] : pairs) classes.insert(g);
    double sum = 0.0;
    for (const auto& c : classes) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (const auto& [g, p] : pairs) {
            if (g == c && p == c) ++tp;
            else if (p == c) ++fp;
            else if (g == c) ++fn;
        }
        const std::size_t denom = 2 * tp + fp + fn;
        sum += denom ? 2.0 * static_cast<double>(tp) / static_cast<double>(denom) : 0.0;
    }
    return sum / static_cast<double>(classes.size());
}

}  // namespace simquery

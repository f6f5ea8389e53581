#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "simquery/dataset.hpp"

namespace simquery {

struct LabeledPrediction {
    std::string id;
    std::string label;
};

struct ClassMetrics {
    std::string label;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

/// Gold-by-predicted counts. Labels that only appear as predictions are
/// tracked but never enter the macro average.
class ConfusionMatrix {
public:
    void add(const std::string& gold, const std::string& predicted, std::size_t n = 1);

    std::size_t count(const std::string& gold, const std::string& predicted) const;
    std::size_t total() const noexcept { return total_; }
    std::size_t correct() const noexcept { return correct_; }
    const std::map<std::pair<std::string, std::string>, std::size_t>& cells() const noexcept { return cells_; }
    /// Labels seen as gold, sorted.
    std::vector<std::string> gold_labels() const;

    double accuracy() const;
    std::vector<ClassMetrics> per_class() const;
    double macro_f1() const;

private:
    std::map<std::pair<std::string, std::string>, std::size_t> cells_;
    std::map<std::string, std::size_t> gold_totals_;
    std::map<std::string, std::size_t> predicted_totals_;
    std::size_t total_ = 0;
    std::size_t correct_ = 0;
};

/// Pairs each prediction with its gold label. Throws DataError on an empty
/// gold set, duplicate prediction ids, or prediction ids not matching the
/// gold ids exactly.
std::vector<std::pair<std::string, std::string>> align_with_gold(const std::vector<LabeledPrediction>& preds,
                                                                 const Dataset& gold);

ConfusionMatrix confusion_matrix(const std::vector<LabeledPrediction>& preds, const Dataset& gold);

/// Computed directly from (gold, predicted) pairs, independent of ConfusionMatrix.
double accuracy(const std::vector<LabeledPrediction>& preds, const Dataset& gold);
double macro_f1(const std::vector<LabeledPrediction>& preds, const Dataset& gold);

}  // namespace simquery

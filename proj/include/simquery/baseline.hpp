#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "simquery/dataset.hpp"
#include "simquery/embedding.hpp"
#include "simquery/metrics.hpp"

namespace simquery {

struct TrainConfig {
    double learning_rate = 0.1;
    double l2_lambda = 1e-4;
    std::size_t epochs = 200;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
};

/// Multinomial logistic regression over frozen embeddings.
/// weights is row-major [classes x dim].
struct LogRegModel {
    std::size_t dim = 0;
    std::vector<std::string> class_order;
    std::vector<float> weights;
    std::vector<float> bias;
    TrainConfig config;

    std::size_t num_classes() const noexcept { return class_order.size(); }
    /// Zero weights and bias.
    static LogRegModel zeros(std::size_t dim, std::vector<std::string> classes, TrainConfig config = {});
    void validate() const;

    friend bool operator==(const LogRegModel& a, const LogRegModel& b);
};

struct LossGrad {
    double loss = 0.0;
    std::vector<double> grad_weights;  // row-major, same shape as weights
    std::vector<double> grad_bias;
};

struct Example {
    std::span<const float> x;
    std::size_t class_index;
};

/// loss = -(1/B) sum log softmax(Wx + b)[y] + (lambda/2) ||W||_F^2 with its
/// exact gradient. Accumulation runs in double, in batch order.
LossGrad logreg_loss_grad(const LogRegModel& model, std::span<const Example> batch);

/// Label-based convenience overload; throws DataError on an unknown label.
LossGrad logreg_loss_grad(const LogRegModel& model,
                          const std::vector<std::pair<EmbeddingVector, std::string>>& batch);

struct TrainResult {
    LogRegModel model;
    /// Full-data objective at initialization, then after each epoch.
    std::vector<double> loss_trace;
};

/// Mini-batch gradient descent from zero initialization. The shuffle for
/// each epoch is drawn from SplitMix64(seed); single-threaded, so the model
/// is bit-identical for identical inputs. Features are the unit-normalized
/// embeddings. Throws DataError with fewer than two classes and
/// RuntimeFailure if the loss becomes non-finite.
TrainResult train_logreg(const Dataset& train, const EmbeddingStore& store, const TrainConfig& config);
TrainResult train_logreg(const std::vector<std::pair<EmbeddingVector, std::string>>& examples,
                         const TrainConfig& config);

struct LogRegOutput {
    std::string label;
    std::vector<double> probabilities;  // class_order order
};

/// Argmax of softmax(Wq + b); ties go to the earlier class in class_order.
/// The query is normalized before scoring, matching training.
LogRegOutput predict_logreg(const LogRegModel& model, const EmbeddingVector& q);

/// Predicts every record of `test`. Test ids must all be in the store.
std::vector<LabeledPrediction> predict_dataset(const LogRegModel& model, const Dataset& test,
                                               const EmbeddingStore& store);

/// Re-labels a translated test set from the original by id. Throws
/// DataError when the sets are empty or their id sets differ.
Dataset relabel_translated(const Dataset& translated, const Dataset& original);

inline constexpr std::uint16_t kQlrmVersion = 1;

/// QLRM layout: "QLRM", u16 version, u32 dim, u32 classes, class names
/// (u32 len + bytes), f32 weights row-major, f32 bias, f64 lr, f64 lambda,
/// u32 epochs, u32 batch, u64 seed, u32 CRC32 of everything before it.
std::vector<std::uint8_t> encode_qlrm(const LogRegModel& model);
LogRegModel decode_qlrm(std::span<const std::uint8_t> bytes, const std::string& source = "qlrm");
void save_model(const LogRegModel& model, const std::filesystem::path& path);
LogRegModel load_model(const std::filesystem::path& path);

}  // namespace simquery

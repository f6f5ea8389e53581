#include "simquery/baseline.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "simquery/binary_io.hpp"
#include "simquery/checksum.hpp"
#include "simquery/error.hpp"
#include "simquery/log.hpp"
#include "simquery/rng.hpp"

namespace simquery {

LogRegModel LogRegModel::zeros(std::size_t dim, std::vector<std::string> classes, TrainConfig config) {
    LogRegModel m;
    m.dim = dim;
    m.class_order = std::move(classes);
    m.weights.assign(m.class_order.size() * dim, 0.0f);
    m.bias.assign(m.class_order.size(), 0.0f);
    m.config = config;
    m.validate();
    return m;
}

void LogRegModel::validate() const {
    if (dim == 0) throw DataError("logreg model: dim must be >= 1");
    if (class_order.empty()) throw DataError("logreg model: no classes");
    if (std::set<std::string>(class_order.begin(), class_order.end()).size() != class_order.size()) {
        throw DataError("logreg model: duplicate class names");
    }
    if (weights.size() != class_order.size() * dim || bias.size() != class_order.size()) {
        throw DataError("logreg model: parameter shape does not match classes x dim");
    }
    for (float w : weights) {
        if (std::isnan(w)) throw DataError("logreg model: NaN weight");
    }
    for (float b : bias) {
        if (std::isnan(b)) throw DataError("logreg model: NaN bias");
    }
}

bool operator==(const LogRegModel& a, const LogRegModel& b) {
    auto bits_equal = [](const std::vector<float>& x, const std::vector<float>& y) {
        return std::equal(x.begin(), x.end(), y.begin(), y.end(), [](float p, float q) {
            return std::bit_cast<std::uint32_t>(p) == std::bit_cast<std::uint32_t>(q);
        });
    };
    return a.dim == b.dim && a.class_order == b.class_order && bits_equal(a.weights, b.weights) &&
           bits_equal(a.bias, b.bias) && a.config.learning_rate == b.config.learning_rate &&
           a.config.l2_lambda == b.config.l2_lambda && a.config.epochs == b.config.epochs &&
           a.config.batch_size == b.config.batch_size && a.config.seed == b.config.seed;
}

namespace {

// Writes softmax(Wx + b) into probs and returns log-sum-exp of the logits.
double softmax(const LogRegModel& m, std::span<const float> x, std::vector<double>& probs) {
    const std::size_t c_n = m.num_classes();
    probs.resize(c_n);
    double max_logit = -INFINITY;
    for (std::size_t c = 0; c < c_n; ++c) {
        double z = m.bias[c];
        const float* row = m.weights.data() + c * m.dim;
        for (std::size_t j = 0; j < m.dim; ++j) z += static_cast<double>(row[j]) * static_cast<double>(x[j]);
        probs[c] = z;
        max_logit = std::max(max_logit, z);
    }
    double sum = 0.0;
    for (auto& p : probs) {
        p = std::exp(p - max_logit);
        sum += p;
    }
    for (auto& p : probs) p /= sum;
    return max_logit + std::log(sum);
}

std::size_t class_index(const LogRegModel& m, const std::string& label) {
    const auto it = std::find(m.class_order.begin(), m.class_order.end(), label);
    if (it == m.class_order.end()) throw DataError("label '" + label + "' is not a model class");
    return static_cast<std::size_t>(it - m.class_order.begin());
}

std::vector<float> unit_features(const EmbeddingVector& v) {
    const auto u = v.normalized() ? v : normalize(v);
    return {u.values().begin(), u.values().end()};
}

}  // namespace

LossGrad logreg_loss_grad(const LogRegModel& model, std::span<const Example> batch) {
    if (batch.empty()) throw DataError("logreg_loss_grad: empty batch");
    const std::size_t c_n = model.num_classes();
    LossGrad out;
    out.grad_weights.assign(model.weights.size(), 0.0);
    out.grad_bias.assign(c_n, 0.0);
    std::vector<double> probs;
    double data_loss = 0.0;
    for (const auto& ex : batch) {
        if (ex.x.size() != model.dim) throw DataError("logreg_loss_grad: feature dim mismatch");
        if (ex.class_index >= c_n) throw DataError("logreg_loss_grad: class index out of range");
        const double lse = softmax(model, ex.x, probs);
        double z_y = model.bias[ex.class_index];
        const float* row_y = model.weights.data() + ex.class_index * model.dim;
        for (std::size_t j = 0; j < model.dim; ++j) z_y += static_cast<double>(row_y[j]) * static_cast<double>(ex.x[j]);
        data_loss += lse - z_y;
        for (std::size_t c = 0; c < c_n; ++c) {
            const double dz = probs[c] - (c == ex.class_index ? 1.0 : 0.0);
            double* g = out.grad_weights.data() + c * model.dim;
            for (std::size_t j = 0; j < model.dim; ++j) g[j] += dz * static_cast<double>(ex.x[j]);
            out.grad_bias[c] += dz;
        }
    }
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    const double lambda = model.config.l2_lambda;
    double sq = 0.0;
    for (std::size_t i = 0; i < model.weights.size(); ++i) {
        const double w = model.weights[i];
        sq += w * w;
        out.grad_weights[i] = out.grad_weights[i] * inv_b + lambda * w;
    }
    for (auto& g : out.grad_bias) g *= inv_b;
    out.loss = data_loss * inv_b + 0.5 * lambda * sq;
    return out;
}

LossGrad logreg_loss_grad(const LogRegModel& model, const std::vector<std::pair<EmbeddingVector, std::string>>& batch) {
    std::vector<Example> examples;
    examples.reserve(batch.size());
    for (const auto& [v, label] : batch) examples.push_back({v.values(), class_index(model, label)});
    return logreg_loss_grad(model, examples);
}

TrainResult train_logreg(const std::vector<std::pair<EmbeddingVector, std::string>>& examples,
                         const TrainConfig& config) {
    if (examples.empty()) throw DataError("train_logreg: no training examples");
    if (config.batch_size < 1) throw UsageError("train_logreg: batch_size must be >= 1");
    std::set<std::string> labels;
    for (const auto& [v, label] : examples) labels.insert(label);
    if (labels.size() < 2) throw DataError("train_logreg: need at least two classes, got " + std::to_string(labels.size()));

    const std::size_t dim = examples.front().first.dim();
    TrainResult result{LogRegModel::zeros(dim, {labels.begin(), labels.end()}, config), {}};
    auto& model = result.model;

    std::vector<std::vector<float>> features;
    std::vector<Example> all;
    features.reserve(examples.size());
    for (const auto& [v, label] : examples) {
        if (v.dim() != dim) throw DataError("train_logreg: inconsistent embedding dims");
        features.push_back(unit_features(v));
    }
    for (std::size_t i = 0; i < examples.size(); ++i) {
        all.push_back({features[i], class_index(model, examples[i].second)});
    }

    result.loss_trace.push_back(logreg_loss_grad(model, all).loss);
    SplitMix64 rng(config.seed);
    std::vector<std::size_t> order(all.size());
    std::vector<Example> batch;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        shuffle(order, rng);
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            batch.clear();
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            for (std::size_t i = start; i < end; ++i) batch.push_back(all[order[i]]);
            const auto g = logreg_loss_grad(model, batch);
            for (std::size_t i = 0; i < model.weights.size(); ++i) {
                model.weights[i] = static_cast<float>(model.weights[i] - config.learning_rate * g.grad_weights[i]);
            }
            for (std::size_t c = 0; c < model.bias.size(); ++c) {
                model.bias[c] = static_cast<float>(model.bias[c] - config.learning_rate * g.grad_bias[c]);
            }
        }
        const double loss = logreg_loss_grad(model, all).loss;
        if (!std::isfinite(loss)) {
            throw RuntimeFailure("train_logreg: loss diverged (non-finite) at epoch " + std::to_string(epoch));
        }
        result.loss_trace.push_back(loss);
    }
    if (result.loss_trace.back() > result.loss_trace.front()) {
        log::warn("train.loss_increased", {{"initial", std::to_string(result.loss_trace.front())},
                                           {"final", std::to_string(result.loss_trace.back())}});
    }
    return result;
}

TrainResult train_logreg(const Dataset& train, const EmbeddingStore& store, const TrainConfig& config) {
    std::vector<std::pair<EmbeddingVector, std::string>> examples;
    examples.reserve(train.size());
    for (const auto& r : train.records()) examples.emplace_back(store.at(r.id), r.label);
    return train_logreg(examples, config);
}

LogRegOutput predict_logreg(const LogRegModel& model, const EmbeddingVector& q) {
    if (q.dim() != model.dim) {
        throw DataError("query dim " + std::to_string(q.dim()) + " does not match model dim " +
                        std::to_string(model.dim));
    }
    const auto x = unit_features(q);
    LogRegOutput out;
    softmax(model, x, out.probabilities);
    const auto best = std::max_element(out.probabilities.begin(), out.probabilities.end());
    out.label = model.class_order[static_cast<std::size_t>(best - out.probabilities.begin())];
    return out;
}

std::vector<LabeledPrediction> predict_dataset(const LogRegModel& model, const Dataset& test,
                                               const EmbeddingStore& store) {
    std::vector<LabeledPrediction> out;
    out.reserve(test.size());
    for (const auto& r : test.records()) out.push_back({r.id, predict_logreg(model, store.at(r.id)).label});
    return out;
}

Dataset relabel_translated(const Dataset& translated, const Dataset& original) {
    if (translated.empty()) throw DataError("translated test set is empty");
    if (translated.size() != original.size()) {
        throw DataError("translated test set has " + std::to_string(translated.size()) +
                        " records, original has " + std::to_string(original.size()));
    }
    std::unordered_map<std::string, const QueryRecord*> by_id;
    for (const auto& r : original.records()) by_id.emplace(r.id, &r);
    std::vector<QueryRecord> out;
    out.reserve(translated.size());
    for (const auto& t : translated.records()) {
        const auto it = by_id.find(t.id);
        if (it == by_id.end()) throw DataError("translated record '" + t.id + "' has no original with that id");
        QueryRecord r = t;
        r.label = it->second->label;
        r.language = it->second->language;
        out.push_back(std::move(r));
    }
    return Dataset(std::move(out));
}

std::vector<std::uint8_t> encode_qlrm(const LogRegModel& model) {
    model.validate();
    ByteWriter w;
    w.raw("QLRM");
    w.u16(kQlrmVersion);
    w.u32(static_cast<std::uint32_t>(model.dim));
    w.u32(static_cast<std::uint32_t>(model.num_classes()));
    for (const auto& c : model.class_order) w.str(c);
    for (float x : model.weights) w.f32(x);
    for (float x : model.bias) w.f32(x);
    w.f64(model.config.learning_rate);
    w.f64(model.config.l2_lambda);
    w.u32(static_cast<std::uint32_t>(model.config.epochs));
    w.u32(static_cast<std::uint32_t>(model.config.batch_size));
    w.u64(model.config.seed);
    w.u32(crc32(w.bytes()));
    return w.take();
}

LogRegModel decode_qlrm(std::span<const std::uint8_t> bytes, const std::string& source) {
    ByteReader head(bytes, source);
    if (bytes.size() < 4 || head.raw(4) != "QLRM") throw DataError(source + ": bad magic, not a QLRM file");
    const auto version = head.u16();
    if (version != kQlrmVersion) {
        throw DataError(source + ": model version mismatch (file " + std::to_string(version) + ")");
    }
    if (bytes.size() < 10) throw DataError(source + ": truncated model file");
    const auto payload = bytes.first(bytes.size() - 4);
    ByteReader tail(bytes.last(4), source);
    if (crc32(payload) != tail.u32()) throw DataError(source + ": checksum failure, model file is corrupted");
    ByteReader r(payload, source);
    r.raw(6);
    LogRegModel m;
    m.dim = r.u32();
    const auto classes = r.u32();
    r.require(4ULL * classes);
    for (std::uint32_t c = 0; c < classes; ++c) m.class_order.push_back(r.str());
    r.require(4ULL * classes * m.dim);
    m.weights.resize(std::size_t(classes) * m.dim);
    for (auto& w : m.weights) w = r.f32();
    m.bias.resize(classes);
    for (auto& b : m.bias) b = r.f32();
    m.config.learning_rate = r.f64();
    m.config.l2_lambda = r.f64();
    m.config.epochs = r.u32();
    m.config.batch_size = r.u32();
    m.config.seed = r.u64();
    if (r.remaining() != 0) throw DataError(source + ": trailing bytes in model payload");
    m.validate();
    return m;
}

void save_model(const LogRegModel& model, const std::filesystem::path& path) {
    write_file_bytes(path, encode_qlrm(model));
}

LogRegModel load_model(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    return decode_qlrm(bytes, path.string());
}

}  // namespace simquery

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace fedsim {

struct TensorSpec {
    std::string name;
    std::vector<std::size_t> shape;

    std::size_t element_count() const;
    bool operator==(const TensorSpec&) const = default;
};

using Layout = std::vector<TensorSpec>;

std::size_t layout_size(const Layout& layout);
void validate_layout(const Layout& layout);

// Flat model parameters: named tensors backed by one contiguous value array.
struct ParamVector {
    Layout layout;
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    void validate() const; // throws on layout/value-count mismatch or non-finite values
    bool operator==(const ParamVector&) const = default;
};

ParamVector zeros_like(const Layout& layout);

struct TrainConfig {
    std::size_t local_epochs = 1; // E
    std::size_t batch_size = 1;   // B
    double learning_rate = 0.05;
    std::uint64_t seed = 0;

    void validate() const;
};

// Fixed-dimension feature vectors stored row-major.
struct LabeledDataset {
    std::size_t feature_dim = 0;
    std::size_t num_classes = 0;
    std::vector<double> features; // size() == labels.size() * feature_dim
    std::vector<std::size_t> labels;

    std::size_t size() const { return labels.size(); }
    const double* sample(std::size_t i) const { return features.data() + i * feature_dim; }
    void validate() const;
};

// Layout of the reference multinomial logistic-regression classifier:
// a weight matrix [num_classes x feature_dim] plus a bias vector.
Layout classifier_layout(std::size_t feature_dim, std::size_t num_classes);

// Seeded pseudo-random initial parameters; identical (layout, seed) pairs
// always produce identical values.
ParamVector init_params(const Layout& layout, std::uint64_t seed);

// Mean cross-entropy of the softmax classifier over the dataset.
double loss(const ParamVector& params, const LabeledDataset& data);

// Mean cross-entropy gradient over the dataset (same layout as params).
ParamVector loss_gradient(const ParamVector& params, const LabeledDataset& data);

struct TrainResult {
    ParamVector params;
    double final_loss = 0.0;
};

// Plain minibatch SGD: local_epochs passes over a per-epoch seeded shuffle of
// the samples, one gradient step per minibatch (last batch may be smaller).
// The shuffle seed of pass i is derived from (cfg.seed, epoch_offset + i), so
// training for E epochs equals E chained single-epoch calls with advancing
// epoch_offset. Throws if the loss turns non-finite.
TrainResult local_train(const ParamVector& start, const LabeledDataset& data,
                        const TrainConfig& cfg, std::uint64_t epoch_offset = 0);

// Fraction of samples whose argmax logit equals the label; ties break toward
// the lowest class index.
double evaluate_accuracy(const ParamVector& params, const LabeledDataset& data);

} // namespace fedsim

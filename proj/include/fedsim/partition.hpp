#pragma once

#include <cstdint>
#include <vector>

#include "fedsim/model.hpp"

namespace fedsim {

// Feature geometry of the synthetic classification task: unit-variance
// Gaussian blobs in 8 dimensions, one mean per class on a scaled simplex.
inline constexpr std::size_t kSynthFeatureDim = 8;
inline constexpr double kSynthMeanScale = 3.0;

// Default class proportions of the 4-class fixture (imbalanced,
// roughly 0.61 / 0.11 / 0.09 / 0.19).
std::vector<double> default_class_weights();

struct Shard {
    std::uint64_t client_id = 0;
    std::vector<std::size_t> indices;
};

enum class PartitionMode { iid, label_skew };

// n samples, class c drawn with probability class_weights[c], features from
// the per-class Gaussian blob. Fully seeded.
LabeledDataset synth_dataset(std::size_t n, std::size_t num_classes,
                             const std::vector<double>& class_weights, std::uint64_t seed);

// Seeded uniform shuffle split into num_clients near-equal chunks.
std::vector<Shard> partition_iid(const LabeledDataset& data, std::size_t num_clients,
                                 std::uint64_t seed);

// Label-skew partition: stable sort by label, cut into
// num_clients x shards_per_client contiguous shards, deal shards_per_client
// to each client by a seeded permutation.
std::vector<Shard> partition_label_skew(const LabeledDataset& data, std::size_t num_clients,
                                        std::size_t shards_per_client, std::uint64_t seed);

// Per-client class histogram: result[client][class] = count.
std::vector<std::vector<std::size_t>> shard_stats(const LabeledDataset& data,
                                                  const std::vector<Shard>& shards);

// Materializes a shard's samples as a standalone dataset.
LabeledDataset subset(const LabeledDataset& data, const std::vector<std::size_t>& indices);

} // namespace fedsim

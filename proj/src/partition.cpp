#include "fedsim/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "fedsim/rng.hpp"

namespace fedsim {

std::vector<double> default_class_weights() {
    // Instance counts 2051 / 364 / 315 / 653 normalized to probabilities.
    const double total = 2051.0 + 364.0 + 315.0 + 653.0;
    return {2051.0 / total, 364.0 / total, 315.0 / total, 653.0 / total};
}

LabeledDataset synth_dataset(std::size_t n, std::size_t num_classes,
                             const std::vector<double>& class_weights, std::uint64_t seed) {
    if (n == 0) throw std::invalid_argument("n must be positive");
    if (num_classes == 0) throw std::invalid_argument("num_classes must be positive");
    if (class_weights.size() != num_classes)
        throw std::invalid_argument("class_weights length must equal num_classes");
    double sum = 0.0;
    for (double w : class_weights) {
        if (!(w >= 0.0)) throw std::invalid_argument("class weights must be non-negative");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("class_weights must sum to 1");

    std::vector<double> cdf(num_classes);
    std::partial_sum(class_weights.begin(), class_weights.end(), cdf.begin());
    cdf.back() = 1.0;

    Rng rng(mix_seed(seed, 0x5d47));
    LabeledDataset data;
    data.feature_dim = kSynthFeatureDim;
    data.num_classes = num_classes;
    data.labels.reserve(n);
    data.features.reserve(n * kSynthFeatureDim);
    for (std::size_t i = 0; i < n; ++i) {
        double u = rng.uniform01();
        std::size_t c = static_cast<std::size_t>(
            std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        if (c >= num_classes) c = num_classes - 1;
        data.labels.push_back(c);
        for (std::size_t d = 0; d < kSynthFeatureDim; ++d) {
            double mean = (d == c % kSynthFeatureDim) ? kSynthMeanScale : 0.0;
            data.features.push_back(mean + rng.normal());
        }
    }
    return data;
}

namespace {

std::vector<Shard> deal_contiguous(const std::vector<std::size_t>& order, std::size_t num_chunks) {
    // Chunk sizes differ by at most one; the first (n % chunks) get the extra.
    std::vector<Shard> shards(num_chunks);
    std::size_t base = order.size() / num_chunks;
    std::size_t extra = order.size() % num_chunks;
    std::size_t pos = 0;
    for (std::size_t c = 0; c < num_chunks; ++c) {
        std::size_t len = base + (c < extra ? 1 : 0);
        shards[c].client_id = c;
        shards[c].indices.assign(order.begin() + pos, order.begin() + pos + len);
        pos += len;
    }
    return shards;
}

} // namespace

std::vector<Shard> partition_iid(const LabeledDataset& data, std::size_t num_clients,
                                 std::uint64_t seed) {
    data.validate();
    if (num_clients == 0) throw std::invalid_argument("num_clients must be positive");
    if (data.size() < num_clients)
        throw std::invalid_argument("more clients than samples");
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(mix_seed(seed, 0x11d));
    rng.shuffle(order);
    return deal_contiguous(order, num_clients);
}

std::vector<Shard> partition_label_skew(const LabeledDataset& data, std::size_t num_clients,
                                        std::size_t shards_per_client, std::uint64_t seed) {
    data.validate();
    if (num_clients == 0 || shards_per_client == 0)
        throw std::invalid_argument("num_clients and shards_per_client must be positive");
    std::size_t num_chunks = num_clients * shards_per_client;
    if (num_chunks > data.size())
        throw std::invalid_argument("insufficient samples for requested shard count");

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return data.labels[a] < data.labels[b];
    });

    std::vector<Shard> chunks = deal_contiguous(order, num_chunks);
    std::vector<std::size_t> chunk_order(num_chunks);
    std::iota(chunk_order.begin(), chunk_order.end(), std::size_t{0});
    Rng rng(mix_seed(seed, 0x5ce));
    rng.shuffle(chunk_order);

    std::vector<Shard> shards(num_clients);
    for (std::size_t k = 0; k < num_clients; ++k) {
        shards[k].client_id = k;
        for (std::size_t s = 0; s < shards_per_client; ++s) {
            const auto& chunk = chunks[chunk_order[k * shards_per_client + s]].indices;
            shards[k].indices.insert(shards[k].indices.end(), chunk.begin(), chunk.end());
        }
    }
    return shards;
}

std::vector<std::vector<std::size_t>> shard_stats(const LabeledDataset& data,
                                                  const std::vector<Shard>& shards) {
    std::vector<std::vector<std::size_t>> hist;
    hist.reserve(shards.size());
    for (const auto& shard : shards) {
        std::vector<std::size_t> row(data.num_classes, 0);
        for (std::size_t idx : shard.indices) {
            if (idx >= data.size()) throw std::out_of_range("shard index out of range");
            ++row[data.labels[idx]];
        }
        hist.push_back(std::move(row));
    }
    return hist;
}

LabeledDataset subset(const LabeledDataset& data, const std::vector<std::size_t>& indices) {
    LabeledDataset out;
    out.feature_dim = data.feature_dim;
    out.num_classes = data.num_classes;
    out.labels.reserve(indices.size());
    out.features.reserve(indices.size() * data.feature_dim);
    for (std::size_t idx : indices) {
        if (idx >= data.size()) throw std::out_of_range("sample index out of range");
        out.labels.push_back(data.labels[idx]);
        const double* x = data.sample(idx);
        out.features.insert(out.features.end(), x, x + data.feature_dim);
    }
    return out;
}

} // namespace fedsim

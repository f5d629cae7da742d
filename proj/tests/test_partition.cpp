#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "fedsim/partition.hpp"
#include "fedsim/rng.hpp"

using namespace fedsim;

namespace {

// Balanced dataset with contiguous per-class blocks of equal size.
LabeledDataset balanced_dataset(std::size_t per_class, std::size_t num_classes) {
    LabeledDataset data;
    data.feature_dim = 2;
    data.num_classes = num_classes;
    Rng rng(11);
    for (std::size_t c = 0; c < num_classes; ++c)
        for (std::size_t i = 0; i < per_class; ++i) {
            data.labels.push_back(c);
            data.features.push_back(rng.normal());
            data.features.push_back(rng.normal());
        }
    // interleave so the sort in label_skew has real work to do
    std::vector<std::size_t> order(data.labels.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    LabeledDataset shuffled = data;
    for (std::size_t i = 0; i < order.size(); ++i) {
        shuffled.labels[i] = data.labels[order[i]];
        shuffled.features[2 * i] = data.features[2 * order[i]];
        shuffled.features[2 * i + 1] = data.features[2 * order[i] + 1];
    }
    return shuffled;
}

void check_disjoint_cover(const std::vector<Shard>& shards, std::size_t n) {
    std::set<std::size_t> seen;
    std::size_t total = 0;
    for (const auto& shard : shards) {
        CHECK_FALSE(shard.indices.empty());
        total += shard.indices.size();
        for (std::size_t idx : shard.indices) {
            CHECK(idx < n);
            CHECK(seen.insert(idx).second); // no duplicates across shards
        }
    }
    CHECK(total == n);
}

double mean_label_entropy(const LabeledDataset& data, const std::vector<Shard>& shards) {
    auto hist = shard_stats(data, shards);
    double total = 0.0;
    for (const auto& row : hist) {
        double n = 0.0;
        for (std::size_t c : row) n += static_cast<double>(c);
        double h = 0.0;
        for (std::size_t c : row) {
            if (c == 0) continue;
            double p = static_cast<double>(c) / n;
            h -= p * std::log(p);
        }
        total += h;
    }
    return total / static_cast<double>(hist.size());
}

} // namespace

TEST_CASE("synth_dataset follows the requested class proportions") {
    auto weights = default_class_weights();
    LabeledDataset data = synth_dataset(1000, 4, weights, 31);
    std::size_t class0 = std::count(data.labels.begin(), data.labels.end(), std::size_t{0});
    // binomial: mean 1000*p, sigma = sqrt(1000*p*(1-p))
    double p = weights[0];
    double sigma = std::sqrt(1000.0 * p * (1.0 - p));
    CHECK(std::abs(static_cast<double>(class0) - 1000.0 * p) < 4.0 * sigma);
}

TEST_CASE("synth_dataset is deterministic") {
    std::vector<double> uniform(4, 0.25);
    LabeledDataset a = synth_dataset(4, 4, uniform, 9);
    LabeledDataset b = synth_dataset(4, 4, uniform, 9);
    CHECK(a.labels == b.labels);
    CHECK(a.features == b.features);
}

TEST_CASE("synth_dataset rejects invalid weight vectors") {
    CHECK_THROWS_AS(synth_dataset(10, 2, {0.5, 0.6}, 1), std::invalid_argument);
    CHECK_THROWS_AS(synth_dataset(10, 2, {0.5}, 1), std::invalid_argument);
    CHECK_THROWS_AS(synth_dataset(10, 2, {1.5, -0.5}, 1), std::invalid_argument);
    CHECK_THROWS_AS(synth_dataset(0, 2, {0.5, 0.5}, 1), std::invalid_argument);
}

TEST_CASE("partition_iid splits into near-equal shards") {
    std::vector<double> uniform(2, 0.5);
    LabeledDataset ten = synth_dataset(10, 2, uniform, 3);
    auto shards = partition_iid(ten, 5, 7);
    REQUIRE(shards.size() == 5);
    for (const auto& s : shards) CHECK(s.indices.size() == 2);
    check_disjoint_cover(shards, 10);

    LabeledDataset eleven = synth_dataset(11, 2, uniform, 3);
    auto uneven = partition_iid(eleven, 5, 7);
    std::multiset<std::size_t> sizes;
    for (const auto& s : uneven) sizes.insert(s.indices.size());
    CHECK(sizes == std::multiset<std::size_t>{3, 2, 2, 2, 2});
    check_disjoint_cover(uneven, 11);
}

TEST_CASE("partition_iid rejects more clients than samples") {
    std::vector<double> uniform(2, 0.5);
    LabeledDataset data = synth_dataset(3, 2, uniform, 3);
    CHECK_THROWS_AS(partition_iid(data, 4, 0), std::invalid_argument);
}

TEST_CASE("partitioners are deterministic and cover the dataset") {
    LabeledDataset data = balanced_dataset(30, 4);
    for (std::uint64_t seed : {0ULL, 1ULL, 42ULL}) {
        auto iid_a = partition_iid(data, 7, seed);
        auto iid_b = partition_iid(data, 7, seed);
        for (std::size_t k = 0; k < iid_a.size(); ++k) CHECK(iid_a[k].indices == iid_b[k].indices);
        check_disjoint_cover(iid_a, data.size());

        auto skew_a = partition_label_skew(data, 5, 3, seed);
        auto skew_b = partition_label_skew(data, 5, 3, seed);
        for (std::size_t k = 0; k < skew_a.size(); ++k)
            CHECK(skew_a[k].indices == skew_b[k].indices);
        check_disjoint_cover(skew_a, data.size());
    }
}

TEST_CASE("one shard per client on balanced data isolates classes") {
    LabeledDataset data = balanced_dataset(25, 4);
    auto shards = partition_label_skew(data, 4, 1, 13);
    auto hist = shard_stats(data, shards);
    for (const auto& row : hist) {
        std::size_t nonzero = 0;
        for (std::size_t c : row)
            if (c > 0) ++nonzero;
        CHECK(nonzero == 1);
        CHECK(std::accumulate(row.begin(), row.end(), std::size_t{0}) == 25);
    }
}

TEST_CASE("shards_per_client bounds the distinct labels per client") {
    // each of the client's contiguous label-sorted ranges covers at most two
    // label values when the range is no longer than the smallest class, so a
    // client sees at most 2 * shards_per_client distinct labels
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        LabeledDataset data = balanced_dataset(9, 4);
        auto shards = partition_label_skew(data, 3, 2, seed);
        auto hist = shard_stats(data, shards);
        for (const auto& row : hist) {
            std::size_t distinct = 0;
            for (std::size_t c : row)
                if (c > 0) ++distinct;
            CHECK(distinct <= 4);
        }
    }
    // when the range size divides the class size, ranges never straddle a
    // class boundary and each holds exactly one label
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        LabeledDataset data = balanced_dataset(8, 4);
        auto shards = partition_label_skew(data, 4, 2, seed);
        auto hist = shard_stats(data, shards);
        for (const auto& row : hist) {
            std::size_t distinct = 0;
            for (std::size_t c : row)
                if (c > 0) ++distinct;
            CHECK(distinct <= 2);
        }
    }
}

TEST_CASE("partition_label_skew rejects insufficient samples") {
    LabeledDataset data = balanced_dataset(2, 2); // 4 samples
    CHECK_THROWS_AS(partition_label_skew(data, 3, 2, 0), std::invalid_argument);
}

TEST_CASE("iid histograms stay near uniform on balanced data") {
    LabeledDataset data = balanced_dataset(200, 2); // 400 samples, 200 each
    auto shards = partition_iid(data, 2, 5);
    auto hist = shard_stats(data, shards);
    // hypergeometric: draw 200 of 400 with 200 successes
    double mean = 100.0;
    double sigma = std::sqrt(200.0 * 0.5 * 0.5 * (400.0 - 200.0) / (400.0 - 1.0));
    for (const auto& row : hist)
        for (std::size_t c : row)
            CHECK(std::abs(static_cast<double>(c) - mean) < 4.0 * sigma);
}

TEST_CASE("shard_stats handles the empty shard list") {
    LabeledDataset data = balanced_dataset(2, 2);
    CHECK(shard_stats(data, {}).empty());
}

TEST_CASE("shard_stats rejects out-of-range indices") {
    LabeledDataset data = balanced_dataset(2, 2);
    std::vector<Shard> bad{{0, {99}}};
    CHECK_THROWS_AS(shard_stats(data, bad), std::out_of_range);
}

TEST_CASE("label skew lowers per-client label entropy versus iid") {
    LabeledDataset data = balanced_dataset(50, 4);
    auto skew = partition_label_skew(data, 4, 1, 3);
    auto iid = partition_iid(data, 4, 3);
    CHECK(mean_label_entropy(data, skew) <= mean_label_entropy(data, iid));
}

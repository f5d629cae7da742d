#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "fedsim/model.hpp"
#include "fedsim/partition.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace fedsim;
using fedsim::testing::random_params;
using fedsim::testing::small_fixture;

TEST_CASE("init_params is deterministic and layout-sized") {
    Layout layout{{"w", {2, 5}}};
    ParamVector a = init_params(layout, 7);
    ParamVector b = init_params(layout, 7);
    CHECK(a == b);
    CHECK(a.values.size() == 10);

    ParamVector c = init_params(layout, 8);
    bool any_differ = false;
    for (std::size_t i = 0; i < a.values.size(); ++i)
        if (a.values[i] != c.values[i]) any_differ = true;
    CHECK(any_differ);
}

TEST_CASE("init_params rejects invalid layouts") {
    CHECK_THROWS_AS(init_params({}, 1), std::invalid_argument);
    CHECK_THROWS_AS(init_params({{"w", {0, 3}}}, 1), std::invalid_argument);
    CHECK_THROWS_AS(init_params({{"", {3}}}, 1), std::invalid_argument);
    CHECK_THROWS_AS(init_params({{"w", {3}}, {"w", {2}}}, 1), std::invalid_argument);
}

TEST_CASE("loss of uniform logits is ln(num_classes)") {
    LabeledDataset data = small_fixture();
    ParamVector zero = zeros_like(classifier_layout(data.feature_dim, data.num_classes));
    CHECK(loss(zero, data) == doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("loss rejects dimension mismatch") {
    LabeledDataset data = small_fixture();
    ParamVector wrong = zeros_like(classifier_layout(data.feature_dim + 1, data.num_classes));
    CHECK_THROWS_AS(loss(wrong, data), std::invalid_argument);
}

TEST_CASE("loss matches an independent scalar cross-entropy") {
    LabeledDataset data = small_fixture();
    ParamVector params = random_params(classifier_layout(4, 3), 99);
    double expected = oracle::cross_entropy(params, data);
    CHECK(std::abs(loss(params, data) - expected) < 1e-12);
}

TEST_CASE("loss is invariant to sample order") {
    LabeledDataset data = small_fixture();
    ParamVector params = random_params(classifier_layout(4, 3), 5);
    LabeledDataset reversed = data;
    for (std::size_t i = 0; i < data.size(); ++i) {
        std::size_t j = data.size() - 1 - i;
        reversed.labels[i] = data.labels[j];
        for (std::size_t d = 0; d < 4; ++d)
            reversed.features[i * 4 + d] = data.features[j * 4 + d];
    }
    CHECK(loss(params, data) == doctest::Approx(loss(params, reversed)).epsilon(1e-12));
}

TEST_CASE("full-batch single epoch equals one gradient step") {
    LabeledDataset data = small_fixture();
    ParamVector start = random_params(classifier_layout(4, 3), 17);
    TrainConfig cfg{1, data.size(), 0.3, 123};
    TrainResult result = local_train(start, data, cfg);
    ParamVector expected = oracle::single_gradient_step(start, data, 0.3);
    REQUIRE(result.params.values.size() == expected.values.size());
    for (std::size_t j = 0; j < expected.values.size(); ++j)
        CHECK(std::abs(result.params.values[j] - expected.values[j]) < 1e-12);
}

TEST_CASE("zero-epoch configs are rejected") {
    LabeledDataset data = small_fixture();
    ParamVector start = zeros_like(classifier_layout(4, 3));
    CHECK_THROWS_AS(local_train(start, data, TrainConfig{0, 1, 0.1, 0}), std::invalid_argument);
    CHECK_THROWS_AS(local_train(start, data, TrainConfig{1, 0, 0.1, 0}), std::invalid_argument);
    CHECK_THROWS_AS(local_train(start, data, TrainConfig{1, 1, 0.0, 0}), std::invalid_argument);
}

TEST_CASE("two epochs equal two chained single-epoch calls") {
    LabeledDataset data = small_fixture();
    ParamVector start = random_params(classifier_layout(4, 3), 3);
    TrainConfig two{2, 4, 0.1, 55};
    TrainConfig one{1, 4, 0.1, 55};
    TrainResult full = local_train(start, data, two);
    TrainResult step1 = local_train(start, data, one, 0);
    TrainResult step2 = local_train(step1.params, data, one, 1);
    CHECK(full.params == step2.params);
    CHECK(full.final_loss == step2.final_loss);
}

TEST_CASE("training is a pure function of its inputs") {
    LabeledDataset data = small_fixture();
    ParamVector start = random_params(classifier_layout(4, 3), 21);
    TrainConfig cfg{3, 2, 0.05, 9};
    CHECK(local_train(start, data, cfg).params == local_train(start, data, cfg).params);
}

TEST_CASE("vanishing learning rate leaves parameters near start") {
    LabeledDataset data = small_fixture();
    ParamVector start = random_params(classifier_layout(4, 3), 8);
    TrainConfig cfg{1, 1, 1e-9, 2};
    TrainResult result = local_train(start, data, cfg);
    double max_change = 0.0;
    for (std::size_t j = 0; j < start.values.size(); ++j)
        max_change = std::max(max_change, std::abs(result.params.values[j] - start.values[j]));
    CHECK(max_change < 1e-6);
}

TEST_CASE("analytic gradient matches central finite differences") {
    LabeledDataset data = small_fixture(7);
    ParamVector params = random_params(classifier_layout(4, 3), 31);
    ParamVector analytic = loss_gradient(params, data);
    ParamVector numeric = oracle::finite_difference_gradient(params, data);
    for (std::size_t j = 0; j < analytic.values.size(); ++j) {
        double denom = std::max(std::abs(numeric.values[j]), 1e-8);
        CHECK(std::abs(analytic.values[j] - numeric.values[j]) / denom < 1e-5);
    }
}

TEST_CASE("evaluate_accuracy counts argmax hits") {
    // Hand-built 4-sample, 2-class, 1-dim task: weights [1, -1], bias 0.
    LabeledDataset data;
    data.feature_dim = 1;
    data.num_classes = 2;
    data.features = {1.0, 2.0, -1.0, 3.0};
    data.labels = {0, 0, 1, 1}; // last sample misclassified by the params below
    ParamVector p = zeros_like(classifier_layout(1, 2));
    p.values = {1.0, -1.0, 0.0, 0.0};
    CHECK(evaluate_accuracy(p, data) == doctest::Approx(0.75));

    data.labels = {0, 0, 1, 0};
    CHECK(evaluate_accuracy(p, data) == doctest::Approx(1.0));
}

TEST_CASE("argmax ties break toward the lowest class index") {
    LabeledDataset data;
    data.feature_dim = 1;
    data.num_classes = 2;
    data.features = {1.0};
    data.labels = {0};
    ParamVector p = zeros_like(classifier_layout(1, 2)); // all logits equal
    CHECK(evaluate_accuracy(p, data) == doctest::Approx(1.0));
    data.labels = {1};
    CHECK(evaluate_accuracy(p, data) == doctest::Approx(0.0));
}

TEST_CASE("random params score at chance on average on a balanced fixture") {
    // a single random linear classifier maps each blob almost wholly to one
    // class, so accuracy concentrates on multiples of 1/4; the chance level
    // shows up in the average over many draws
    std::vector<double> uniform(4, 0.25);
    LabeledDataset data = synth_dataset(10000, 4, uniform, 2024);
    double sum = 0.0;
    const int draws = 100;
    for (int i = 0; i < draws; ++i) {
        ParamVector p = random_params(classifier_layout(kSynthFeatureDim, 4), 1000 + i, 0.01);
        sum += evaluate_accuracy(p, data);
    }
    CHECK(std::abs(sum / draws - 0.25) < 0.05);
}

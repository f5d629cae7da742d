#include "fedsim/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include "fedsim/rng.hpp"

namespace fedsim {

double Rng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    do {
        u1 = uniform01();
    } while (u1 <= 0.0);
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
}

std::size_t TensorSpec::element_count() const {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::size_t layout_size(const Layout& layout) {
    std::size_t total = 0;
    for (const auto& t : layout) total += t.element_count();
    return total;
}

void validate_layout(const Layout& layout) {
    if (layout.empty()) throw std::invalid_argument("layout must be non-empty");
    std::unordered_set<std::string> names;
    for (const auto& t : layout) {
        if (t.name.empty()) throw std::invalid_argument("tensor name must be non-empty");
        if (!names.insert(t.name).second)
            throw std::invalid_argument("duplicate tensor name: " + t.name);
        if (t.shape.empty()) throw std::invalid_argument("tensor '" + t.name + "' has empty shape");
        for (std::size_t d : t.shape)
            if (d == 0) throw std::invalid_argument("tensor '" + t.name + "' has a zero dimension");
    }
}

void ParamVector::validate() const {
    validate_layout(layout);
    if (values.size() != layout_size(layout))
        throw std::invalid_argument("value count does not match layout size");
    for (double v : values)
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite parameter value");
}

ParamVector zeros_like(const Layout& layout) {
    validate_layout(layout);
    return ParamVector{layout, std::vector<double>(layout_size(layout), 0.0)};
}

void TrainConfig::validate() const {
    if (local_epochs < 1) throw std::invalid_argument("local_epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
}

void LabeledDataset::validate() const {
    if (labels.empty()) throw std::invalid_argument("dataset must be non-empty");
    if (feature_dim == 0) throw std::invalid_argument("feature_dim must be positive");
    if (num_classes == 0) throw std::invalid_argument("num_classes must be positive");
    if (features.size() != labels.size() * feature_dim)
        throw std::invalid_argument("feature array size does not match sample count");
    for (std::size_t y : labels)
        if (y >= num_classes) throw std::invalid_argument("label out of range");
}

Layout classifier_layout(std::size_t feature_dim, std::size_t num_classes) {
    return Layout{{"weights", {num_classes, feature_dim}}, {"bias", {num_classes}}};
}

ParamVector init_params(const Layout& layout, std::uint64_t seed) {
    validate_layout(layout);
    Rng rng(mix_seed(seed, 0x1217));
    ParamVector p{layout, {}};
    p.values.resize(layout_size(layout));
    for (double& v : p.values) v = 0.1 * rng.normal();
    return p;
}

namespace {

struct ClassifierView {
    std::size_t dim;
    std::size_t classes;
    const double* weights; // classes x dim, row-major
    const double* bias;    // classes
};

ClassifierView view_classifier(const ParamVector& params, const LabeledDataset& data) {
    Layout expected = classifier_layout(data.feature_dim, data.num_classes);
    if (params.layout != expected)
        throw std::invalid_argument("parameter layout does not match dataset dimensions");
    return ClassifierView{data.feature_dim, data.num_classes, params.values.data(),
                          params.values.data() + data.num_classes * data.feature_dim};
}

void compute_logits(const ClassifierView& m, const double* x, std::vector<double>& out) {
    for (std::size_t c = 0; c < m.classes; ++c) {
        double z = m.bias[c];
        const double* wrow = m.weights + c * m.dim;
        for (std::size_t d = 0; d < m.dim; ++d) z += wrow[d] * x[d];
        out[c] = z;
    }
}

// Converts logits to probabilities in place; returns log(sum exp(z - zmax)) + zmax.
double softmax_inplace(std::vector<double>& z) {
    double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double& v : z) {
        v = std::exp(v - zmax);
        sum += v;
    }
    for (double& v : z) v /= sum;
    return std::log(sum) + zmax;
}

// Accumulates the cross-entropy gradient of one sample into grad (unscaled).
void accumulate_gradient(const ClassifierView& m, const double* x, std::size_t label,
                         std::vector<double>& probs, double* grad_w, double* grad_b) {
    compute_logits(m, x, probs);
    softmax_inplace(probs);
    for (std::size_t c = 0; c < m.classes; ++c) {
        double delta = probs[c] - (c == label ? 1.0 : 0.0);
        double* grow = grad_w + c * m.dim;
        for (std::size_t d = 0; d < m.dim; ++d) grow[d] += delta * x[d];
        grad_b[c] += delta;
    }
}

} // namespace

double loss(const ParamVector& params, const LabeledDataset& data) {
    data.validate();
    params.validate();
    ClassifierView m = view_classifier(params, data);
    std::vector<double> z(m.classes);
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        compute_logits(m, data.sample(i), z);
        double zy = z[data.labels[i]];
        double lse = softmax_inplace(z);
        total += lse - zy;
    }
    return total / static_cast<double>(data.size());
}

ParamVector loss_gradient(const ParamVector& params, const LabeledDataset& data) {
    data.validate();
    params.validate();
    ClassifierView m = view_classifier(params, data);
    ParamVector grad = zeros_like(params.layout);
    double* gw = grad.values.data();
    double* gb = grad.values.data() + m.classes * m.dim;
    std::vector<double> probs(m.classes);
    for (std::size_t i = 0; i < data.size(); ++i)
        accumulate_gradient(m, data.sample(i), data.labels[i], probs, gw, gb);
    double inv_n = 1.0 / static_cast<double>(data.size());
    for (double& v : grad.values) v *= inv_n;
    return grad;
}

TrainResult local_train(const ParamVector& start, const LabeledDataset& data,
                        const TrainConfig& cfg, std::uint64_t epoch_offset) {
    cfg.validate();
    data.validate();
    start.validate();
    ClassifierView m = view_classifier(start, data);

    ParamVector params = start;
    std::vector<std::size_t> order(data.size());
    std::vector<double> probs(m.classes);
    std::vector<double> grad(params.values.size());

    for (std::size_t epoch = 0; epoch < cfg.local_epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(mix_seed(cfg.seed, epoch_offset + epoch));
        rng.shuffle(order);

        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            std::size_t end = std::min(begin + cfg.batch_size, order.size());
            std::fill(grad.begin(), grad.end(), 0.0);
            ClassifierView cur{m.dim, m.classes, params.values.data(),
                               params.values.data() + m.classes * m.dim};
            for (std::size_t i = begin; i < end; ++i)
                accumulate_gradient(cur, data.sample(order[i]), data.labels[order[i]], probs,
                                    grad.data(), grad.data() + m.classes * m.dim);
            double step = cfg.learning_rate / static_cast<double>(end - begin);
            for (std::size_t j = 0; j < params.values.size(); ++j)
                params.values[j] -= step * grad[j];
        }
    }

    double final_loss = loss(params, data);
    if (!std::isfinite(final_loss))
        throw std::runtime_error("training diverged: non-finite loss");
    return TrainResult{std::move(params), final_loss};
}

double evaluate_accuracy(const ParamVector& params, const LabeledDataset& data) {
    data.validate();
    params.validate();
    ClassifierView m = view_classifier(params, data);
    std::vector<double> z(m.classes);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        compute_logits(m, data.sample(i), z);
        std::size_t best = 0;
        for (std::size_t c = 1; c < m.classes; ++c)
            if (z[c] > z[best]) best = c; // ties keep the lower index
        if (best == data.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

} // namespace fedsim

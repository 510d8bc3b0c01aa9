#include "chimatch/neural.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <cmath>
#include <limits>
#include <random>

namespace chimatch {

namespace {

std::uint64_t next_version()
{
    // versions are unique across all networks so a cache never matches a
    // different net that happens to share an address later
    static std::atomic<std::uint64_t> counter{0};
    return ++counter;
}

void activate(Matrix& z, Activation a)
{
    switch (a) {
    case Activation::linear:
        break;
    case Activation::tanh:
        // the exp form vectorizes; libm tanh does not
        z = 1.0 - 2.0 / ((2.0 * z.array()).exp() + 1.0);
        break;
    case Activation::relu:
        z = z.array().max(0.0);
        break;
    case Activation::sigmoid:
        z = (1.0 + (-z.array()).exp()).inverse();
        break;
    }
}

// derivative expressed through the activated value
void scale_by_derivative(Matrix& grad, const Matrix& h, Activation a)
{
    switch (a) {
    case Activation::linear:
        break;
    case Activation::tanh:
        grad.array() *= 1.0 - h.array().square();
        break;
    case Activation::relu:
        grad.array() *= (h.array() > 0.0).cast<double>();
        break;
    case Activation::sigmoid:
        grad.array() *= h.array() * (1.0 - h.array());
        break;
    }
}

} // namespace

std::string to_string(Activation a)
{
    switch (a) {
    case Activation::linear:
        return "linear";
    case Activation::tanh:
        return "tanh";
    case Activation::relu:
        return "relu";
    case Activation::sigmoid:
        return "sigmoid";
    }
    return "?";
}

Activation activation_from_string(const std::string& s)
{
    if (s == "linear") {
        return Activation::linear;
    }
    if (s == "tanh") {
        return Activation::tanh;
    }
    if (s == "relu") {
        return Activation::relu;
    }
    if (s == "sigmoid") {
        return Activation::sigmoid;
    }
    throw Error("unknown activation '" + s + "'");
}

Gradients& Gradients::operator+=(const Gradients& other)
{
    if (other.weight.size() != weight.size()) {
        throw Error("Gradients: layer count mismatch");
    }
    for (std::size_t i = 0; i < weight.size(); ++i) {
        weight[i] += other.weight[i];
        bias[i] += other.bias[i];
    }
    return *this;
}

Gradients& Gradients::operator*=(double s)
{
    for (std::size_t i = 0; i < weight.size(); ++i) {
        weight[i] *= s;
        bias[i] *= s;
    }
    return *this;
}

double Gradients::squared_norm() const
{
    double s = 0.0;
    for (std::size_t i = 0; i < weight.size(); ++i) {
        s += weight[i].squaredNorm() + bias[i].squaredNorm();
    }
    return s;
}

void Mlp::check_spec(const MlpSpec& spec)
{
    if (spec.sizes.size() < 2) {
        throw Error("Mlp: need at least input and output sizes");
    }
    const std::size_t n_layers = spec.sizes.size() - 1;
    if (spec.activations.size() != n_layers) {
        throw Error("Mlp: expected " + std::to_string(n_layers) + " activations, got "
                    + std::to_string(spec.activations.size()));
    }
    if (!spec.dropout_after.empty() && spec.dropout_after.size() != n_layers) {
        throw Error("Mlp: dropout_after must have one entry per layer");
    }
    for (int s : spec.sizes) {
        if (s < 1) {
            throw Error("Mlp: layer sizes must be positive");
        }
    }
    if (!(spec.dropout_rate >= 0.0 && spec.dropout_rate < 1.0)) {
        throw Error("Mlp: dropout rate must lie in [0,1)");
    }
}

Mlp::Mlp(const MlpSpec& spec)
{
    check_spec(spec);
    dropout_rate_ = spec.dropout_rate;
    for (std::size_t l = 0; l + 1 < spec.sizes.size(); ++l) {
        Layer layer;
        layer.weight = Matrix::Zero(spec.sizes[l], spec.sizes[l + 1]);
        layer.bias = RowVector::Zero(spec.sizes[l + 1]);
        layer.activation = spec.activations[l];
        layer.dropout_after = !spec.dropout_after.empty() && spec.dropout_after[l];
        layers_.push_back(std::move(layer));
    }
    version_ = next_version();
}

Mlp::Mlp(const MlpSpec& spec, Rng& rng) : Mlp(spec)
{
    for (auto& layer : layers_) {
        const double bound = std::sqrt(6.0 / static_cast<double>(layer.in() + layer.out()));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) {
            for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) {
                layer.weight(i, j) = u(rng);
            }
        }
    }
}

Layer& Mlp::mutable_layer(std::size_t i)
{
    version_ = next_version();
    return layers_.at(i);
}

std::size_t Mlp::parameter_count() const
{
    std::size_t n = 0;
    for (const auto& l : layers_) {
        n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    }
    return n;
}

bool Mlp::finite() const
{
    for (const auto& l : layers_) {
        if (!l.weight.allFinite() || !l.bias.allFinite()) {
            return false;
        }
    }
    return true;
}

MlpSpec Mlp::spec() const
{
    MlpSpec s;
    s.dropout_rate = dropout_rate_;
    s.sizes.push_back(static_cast<int>(in()));
    for (const auto& l : layers_) {
        s.sizes.push_back(static_cast<int>(l.out()));
        s.activations.push_back(l.activation);
        s.dropout_after.push_back(l.dropout_after);
    }
    return s;
}

ForwardCache Mlp::forward(const Matrix& batch, Rng* rng) const
{
    if (layers_.empty()) {
        throw Error("Mlp::forward: empty network");
    }
    if (batch.cols() != in()) {
        throw Error("Mlp::forward: batch has " + std::to_string(batch.cols()) + " columns, network expects "
                    + std::to_string(in()));
    }
    ForwardCache cache;
    cache.version = version_;
    cache.owner = this;
    cache.inputs.reserve(layers_.size() + 1);
    cache.activated.reserve(layers_.size());
    cache.masks.resize(layers_.size());
    cache.inputs.push_back(batch);
    const bool train = rng != nullptr && dropout_rate_ > 0.0;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        Matrix h = cache.inputs.back() * layer.weight;
        h.rowwise() += layer.bias;
        activate(h, layer.activation);
        cache.activated.push_back(h);
        if (train && layer.dropout_after) {
            const double keep_scale = 1.0 / (1.0 - dropout_rate_);
            Matrix mask(h.rows(), h.cols());
            for (Eigen::Index i = 0; i < mask.size(); ++i) {
                mask.data()[i] = u(*rng) < dropout_rate_ ? 0.0 : keep_scale;
            }
            h.array() *= mask.array();
            cache.masks[l] = std::move(mask);
        }
        cache.inputs.push_back(std::move(h));
    }
    return cache;
}

Matrix Mlp::predict(const Matrix& batch) const
{
    return forward(batch, nullptr).output();
}

Gradients Mlp::zero_gradients() const
{
    Gradients g;
    for (const auto& l : layers_) {
        g.weight.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
        g.bias.push_back(RowVector::Zero(l.bias.size()));
    }
    return g;
}

Gradients Mlp::backward(const ForwardCache& cache, const Matrix& grad_output, Matrix* grad_input) const
{
    if (cache.owner != this || cache.version != version_) {
        throw Error("Mlp::backward: stale cache (parameters changed since forward)");
    }
    const Matrix& out = cache.output();
    if (grad_output.rows() != out.rows() || grad_output.cols() != out.cols()) {
        throw Error("Mlp::backward: output gradient shape mismatch");
    }
    Gradients g;
    g.weight.resize(layers_.size());
    g.bias.resize(layers_.size());
    Matrix delta = grad_output;
    for (std::size_t k = layers_.size(); k-- > 0;) {
        const auto& layer = layers_[k];
        if (cache.masks[k].size() != 0) {
            delta.array() *= cache.masks[k].array();
        }
        scale_by_derivative(delta, cache.activated[k], layer.activation);
        g.weight[k].noalias() = cache.inputs[k].transpose() * delta;
        g.bias[k] = delta.colwise().sum();
        if (k > 0 || grad_input != nullptr) {
            Matrix next = delta * layer.weight.transpose();
            delta = std::move(next);
        }
    }
    if (grad_input != nullptr) {
        *grad_input = std::move(delta);
    }
    return g;
}

void Mlp::apply(const Gradients& g, double scale)
{
    if (g.weight.size() != layers_.size()) {
        throw Error("Mlp::apply: gradient layer count mismatch");
    }
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        layers_[l].weight += scale * g.weight[l];
        layers_[l].bias += scale * g.bias[l];
    }
    version_ = next_version();
}

AdamState::AdamState(const Mlp& net, double lr_, double weight_decay_) : lr(lr_), weight_decay(weight_decay_)
{
    for (const auto& l : net.layers()) {
        m_weight.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
        v_weight.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
        m_bias.push_back(RowVector::Zero(l.bias.size()));
        v_bias.push_back(RowVector::Zero(l.bias.size()));
    }
}

namespace {

template <class P, class G, class M>
void adam_update(P& param, const G& grad, M& m, M& v, const AdamState& s, double c1, double c2)
{
    const auto g = (grad.array() + s.weight_decay * param.array()).eval();
    m.array() = s.beta1 * m.array() + (1.0 - s.beta1) * g;
    v.array() = s.beta2 * v.array() + (1.0 - s.beta2) * g.square();
    param.array() -= s.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + s.eps);
}

} // namespace

void adam_step(Mlp& net, const Gradients& grads, AdamState& state)
{
    if (grads.weight.size() != net.depth() || state.m_weight.size() != net.depth()) {
        throw Error("adam_step: layer count mismatch");
    }
    state.step += 1;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t l = 0; l < net.depth(); ++l) {
        auto& layer = net.mutable_layer(l);
        if (grads.weight[l].rows() != layer.weight.rows() || grads.weight[l].cols() != layer.weight.cols()
            || grads.bias[l].size() != layer.bias.size()) {
            throw Error("adam_step: gradient shape mismatch at layer " + std::to_string(l));
        }
        adam_update(layer.weight, grads.weight[l], state.m_weight[l], state.v_weight[l], state, c1, c2);
        adam_update(layer.bias, grads.bias[l], state.m_bias[l], state.v_bias[l], state, c1, c2);
    }
}

PlateauSchedule::PlateauSchedule(double factor, int patience, double floor, double threshold)
    : factor_(factor), patience_(patience), floor_(floor), threshold_(threshold),
      best_(std::numeric_limits<double>::infinity())
{
    if (!(factor > 0.0 && factor < 1.0)) {
        throw Error("PlateauSchedule: factor must lie in (0,1)");
    }
    if (patience < 1) {
        throw Error("PlateauSchedule: patience must be at least 1");
    }
}

double PlateauSchedule::update(double loss, double lr)
{
    if (loss < best_ * (1.0 - threshold_) || !std::isfinite(best_)) {
        best_ = loss;
        bad_epochs_ = 0;
        return lr;
    }
    if (++bad_epochs_ >= patience_) {
        bad_epochs_ = 0;
        return std::max(lr * factor_, floor_);
    }
    return lr;
}

double lr_plateau(double lr, const std::vector<double>& loss_history, double factor, int patience, double floor)
{
    PlateauSchedule s(factor, patience, floor);
    for (double loss : loss_history) {
        lr = s.update(loss, lr);
    }
    return lr;
}

namespace {

nlohmann::json matrix_json(const Matrix& m)
{
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<double> r(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            r[static_cast<std::size_t>(j)] = m(i, j);
        }
        rows.push_back(r);
    }
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", rows}};
}

Matrix matrix_from_json(const nlohmann::json& j)
{
    const auto r = j.at("rows").get<Eigen::Index>();
    const auto c = j.at("cols").get<Eigen::Index>();
    const auto& data = j.at("data");
    if (static_cast<Eigen::Index>(data.size()) != r) {
        throw Error("checkpoint: row count does not match header");
    }
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
        const auto row = data[static_cast<std::size_t>(i)].get<std::vector<double>>();
        if (static_cast<Eigen::Index>(row.size()) != c) {
            throw Error("checkpoint: column count does not match header");
        }
        for (Eigen::Index k = 0; k < c; ++k) {
            m(i, k) = row[static_cast<std::size_t>(k)];
        }
    }
    return m;
}

} // namespace

nlohmann::json to_json(const Mlp& net)
{
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : net.layers()) {
        layers.push_back({{"activation", to_string(l.activation)},
                          {"dropout_after", l.dropout_after},
                          {"weight", matrix_json(l.weight)},
                          {"bias", matrix_json(l.bias)}});
    }
    const auto s = net.spec();
    return {{"sizes", s.sizes}, {"dropout_rate", net.dropout_rate()}, {"layers", layers}};
}

Mlp mlp_from_json(const nlohmann::json& j)
{
    MlpSpec spec;
    spec.sizes = j.at("sizes").get<std::vector<int>>();
    spec.dropout_rate = j.at("dropout_rate").get<double>();
    const auto& layers = j.at("layers");
    if (layers.size() + 1 != spec.sizes.size()) {
        throw Error("checkpoint: layer count does not match sizes header");
    }
    for (const auto& l : layers) {
        spec.activations.push_back(activation_from_string(l.at("activation").get<std::string>()));
        spec.dropout_after.push_back(l.at("dropout_after").get<bool>());
    }
    Mlp net(spec);
    for (std::size_t i = 0; i < layers.size(); ++i) {
        Matrix w = matrix_from_json(layers[i].at("weight"));
        Matrix b = matrix_from_json(layers[i].at("bias"));
        auto& layer = net.mutable_layer(i);
        if (w.rows() != layer.weight.rows() || w.cols() != layer.weight.cols() || b.rows() != 1
            || b.cols() != layer.bias.size()) {
            throw Error("checkpoint: parameter shape mismatch at layer " + std::to_string(i));
        }
        layer.weight = w;
        layer.bias = b.row(0);
    }
    if (!net.finite()) {
        throw Error("checkpoint: non-finite parameters");
    }
    return net;
}

} // namespace chimatch

#ifndef CHIMATCH_NEURAL_HPP
#define CHIMATCH_NEURAL_HPP

#include "chimatch/types.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace chimatch {

enum class Activation { linear, tanh, relu, sigmoid };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

// y = act(x W + b), batch rows are samples.
struct Layer {
    Matrix weight; // in x out
    RowVector bias; // 1 x out
    Activation activation = Activation::linear;
    bool dropout_after = false;

    Eigen::Index in() const { return weight.rows(); }
    Eigen::Index out() const { return weight.cols(); }
};

struct MlpSpec {
    std::vector<int> sizes;              // in, hidden..., out
    std::vector<Activation> activations; // one per layer
    std::vector<bool> dropout_after;     // one per layer; empty = none
    double dropout_rate = 0.0;
};

struct ForwardCache {
    // inputs[l] is the (post-dropout) input of layer l; inputs.back() is the output
    std::vector<Matrix> inputs;
    std::vector<Matrix> activated;
    std::vector<Matrix> masks; // empty where no dropout was applied
    std::uint64_t version = 0;
    const void* owner = nullptr;

    const Matrix& output() const { return inputs.back(); }
};

struct Gradients {
    std::vector<Matrix> weight;
    std::vector<RowVector> bias;

    Gradients& operator+=(const Gradients& other);
    Gradients& operator*=(double s);
    double squared_norm() const;
};

class Mlp {
public:
    Mlp() = default;
    // Glorot-uniform weights, zero biases.
    Mlp(const MlpSpec& spec, Rng& rng);
    // All-zero parameters.
    explicit Mlp(const MlpSpec& spec);

    std::size_t depth() const { return layers_.size(); }
    Eigen::Index in() const { return layers_.front().in(); }
    Eigen::Index out() const { return layers_.back().out(); }
    double dropout_rate() const { return dropout_rate_; }
    const Layer& layer(std::size_t i) const { return layers_.at(i); }
    const std::vector<Layer>& layers() const { return layers_; }
    // Mutable access invalidates outstanding caches.
    Layer& mutable_layer(std::size_t i);
    std::uint64_t version() const { return version_; }
    std::size_t parameter_count() const;
    bool finite() const;
    MlpSpec spec() const;

    // Train mode when rng is given (dropout active), eval mode otherwise.
    ForwardCache forward(const Matrix& batch, Rng* rng = nullptr) const;
    Matrix predict(const Matrix& batch) const;

    // Parameter gradients for the loss whose gradient w.r.t. the output is
    // `grad_output`. Writes the gradient w.r.t. the input when requested.
    Gradients backward(const ForwardCache& cache, const Matrix& grad_output, Matrix* grad_input = nullptr) const;

    Gradients zero_gradients() const;

    // Adds `scale * g` to the parameters.
    void apply(const Gradients& g, double scale);

private:
    void check_spec(const MlpSpec& spec);

    std::vector<Layer> layers_;
    double dropout_rate_ = 0.0;
    std::uint64_t version_ = 0;
};

struct AdamState {
    std::vector<Matrix> m_weight;
    std::vector<Matrix> v_weight;
    std::vector<RowVector> m_bias;
    std::vector<RowVector> v_bias;
    long step = 0;
    double lr = 1e-2;
    double weight_decay = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    AdamState() = default;
    AdamState(const Mlp& net, double lr, double weight_decay);
};

// One Adam update with bias correction. Weight decay enters as lambda*theta in
// the gradient, on weights and biases alike.
void adam_step(Mlp& net, const Gradients& grads, AdamState& state);

// Multiplies the learning rate by `factor` once the best loss has not improved
// by a relative 1e-4 for `patience` consecutive epochs.
class PlateauSchedule {
public:
    PlateauSchedule(double factor = 0.5, int patience = 5, double floor = 1e-6, double threshold = 1e-4);

    // Returns the learning rate to use after observing `loss`.
    double update(double loss, double lr);
    double best() const { return best_; }

private:
    double factor_;
    int patience_;
    double floor_;
    double threshold_;
    double best_;
    int bad_epochs_ = 0;
};

// Replays a loss history through a fresh schedule starting from `lr`.
double lr_plateau(double lr, const std::vector<double>& loss_history, double factor, int patience,
                  double floor = 1e-6);

nlohmann::json to_json(const Mlp& net);
// Validates shapes layer to layer.
Mlp mlp_from_json(const nlohmann::json& j);

} // namespace chimatch

#endif // CHIMATCH_NEURAL_HPP

#ifndef CHIMATCH_CHIMERIC_HPP
#define CHIMATCH_CHIMERIC_HPP

#include "chimatch/core.hpp"
#include "chimatch/neural.hpp"
#include "chimatch/stats.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace chimatch {

struct ChimericConfig {
    int latent_dim = 5;
    // encoder hidden sizes; the decoder uses them reversed
    std::vector<int> hidden = {80, 40};
    double dropout = 0.5;
    Activation hidden_activation = Activation::tanh;
    // sigmoid for binarized data
    Activation latent_activation = Activation::linear;
    std::size_t batch_size = 64;
    int epochs = 40;
    double learning_rate = 1e-2;
    double weight_decay = 1e-5;
    double w_c = 1.0;
    double w_cy = 1.0;
    double w_o = 0.01;
    double plateau_factor = 0.5;
    int plateau_patience = 5;
    double lr_floor = 1e-6;
    double fdr_q = 0.05;
    std::uint64_t seed = 0;

    // Throws unless latent_dim < min(p_a, p_b) and every weight is >= 0.
    void validate(std::size_t p_a, std::size_t p_b) const;
};

nlohmann::json to_json(const ChimericConfig& cfg);
ChimericConfig chimeric_config_from_json(const nlohmann::json& j, ChimericConfig base = {});

struct EpochLoss {
    double ae_a = 0.0;
    double ae_b = 0.0;
    double ce_a = 0.0;
    double ce_b = 0.0;
    double cy_a = 0.0;
    double cy_b = 0.0;
    double ortho_a = 0.0;
    double ortho_b = 0.0;
    double total = 0.0;
    double lr = 0.0;
};

// Per-column centering and scaling applied inside the model.
struct ColumnScaler {
    RowVector center;
    RowVector scale;

    static ColumnScaler fit(const Matrix& x);
    Matrix forward(const Matrix& x) const;
    Matrix inverse(const Matrix& z) const;
};

enum class TranslateDirection { a_to_b, b_to_a };

class ChimericModel {
public:
    // Builds untrained networks. Both encoders share the latent dimension by
    // construction.
    ChimericModel(const ChimericConfig& cfg, std::vector<FeatureMeta> features_a,
                  std::vector<FeatureMeta> features_b, std::size_t mapped_count);

    const ChimericConfig& config() const { return cfg_; }
    std::size_t mapped_count() const { return mapped_count_; }
    const std::vector<FeatureMeta>& features_a() const { return features_a_; }
    const std::vector<FeatureMeta>& features_b() const { return features_b_; }
    const Mlp& encoder_a() const { return f_a_; }
    const Mlp& decoder_a() const { return g_a_; }
    const Mlp& encoder_b() const { return f_b_; }
    const Mlp& decoder_b() const { return g_b_; }
    const std::vector<EpochLoss>& trace() const { return trace_; }
    bool trained() const { return trained_; }

    // Eval-mode chimeric translation g^{other}(f^{this}(x)), in the other
    // dataset's column format and scale.
    Matrix translate(const Matrix& x, TranslateDirection dir) const;
    // Same, wrapped with the target dataset's feature metadata.
    Dataset translate(const Dataset& ds, TranslateDirection dir) const;
    // Eval-mode reconstruction g^i(f^i(x)).
    Matrix reconstruct(const Matrix& x, TranslateDirection from) const;

    nlohmann::json to_json() const;
    static ChimericModel from_json(const nlohmann::json& j);

private:
    friend ChimericModel train_chimeric(const Dataset&, const Dataset&, const ChimericConfig&);

    ChimericModel() = default;

    ChimericConfig cfg_;
    std::vector<FeatureMeta> features_a_;
    std::vector<FeatureMeta> features_b_;
    std::size_t mapped_count_ = 0;
    Mlp f_a_;
    Mlp g_a_;
    Mlp f_b_;
    Mlp g_b_;
    ColumnScaler scale_a_;
    ColumnScaler scale_b_;
    std::vector<EpochLoss> trace_;
    bool trained_ = false;
};

// Losses of one paired mini-batch, with gradients for all four networks.
struct BatchLoss {
    EpochLoss loss;
    Gradients f_a;
    Gradients g_a;
    Gradients f_b;
    Gradients g_b;
};

// One forward/backward pass over a pair of (already scaled) batches. `rng`
// drives dropout; null means eval mode.
BatchLoss chimeric_batch_loss(const Mlp& f_a, const Mlp& g_a, const Mlp& f_b, const Mlp& g_b,
                              const Matrix& x_a, const Matrix& x_b, std::size_t mapped_count,
                              const Vector& weights_a, const Vector& weights_b, const ChimericConfig& cfg,
                              Rng* rng);

// Trains the paired autoencoders. Both datasets carry the same K >= 1
// known-mapped columns first.
ChimericModel train_chimeric(const Dataset& a, const Dataset& b, const ChimericConfig& cfg);

enum class DependenceMeasure { pearson, mutual_information };

// Dependence between every column of `ds` (rows) and every column of the
// translation `z` (columns), computed over the shared rows.
SimilarityMatrix chimeric_dependence(const Dataset& ds, const Dataset& z,
                                     DependenceMeasure measure = DependenceMeasure::pearson, int bins = 8);

// Translated A rows for a B feature that A lacks.
Vector reconstruct_unshared(const ChimericModel& model, const Dataset& a, const std::string& feature_b);

void write_loss_trace(std::ostream& os, const std::vector<EpochLoss>& trace);

} // namespace chimatch

#endif // CHIMATCH_CHIMERIC_HPP

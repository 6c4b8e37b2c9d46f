#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "cardiofeat/feature_table.hpp"

namespace cardiofeat {

/// Fully connected ReLU network with a single sigmoid output.
/// Parameters live in one flat vector: for every layer W (out x in, row-major) then b.
class MlpModel {
public:
    struct Layer {
        int in = 0;
        int out = 0;
        std::size_t weight_offset = 0;
        std::size_t bias_offset = 0;
        friend bool operator==(const Layer &, const Layer &) = default;
    };

    MlpModel() = default;
    /// hidden_layers may be 0 (logistic regression); dropout in [0, 1).
    MlpModel(int input_dim, int hidden_layers, int hidden_units, double dropout);

    /// U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
    void initialize(std::uint64_t seed);

    int input_dim() const noexcept { return input_dim_; }
    int hidden_layers() const noexcept { return hidden_layers_; }
    int hidden_units() const noexcept { return hidden_units_; }
    double dropout() const noexcept { return dropout_; }
    const std::vector<Layer> &layers() const noexcept { return layers_; }
    std::vector<int> layer_sizes() const;

    std::vector<double> &parameters() noexcept { return params_; }
    const std::vector<double> &parameters() const noexcept { return params_; }
    double weight(int layer, int row, int col) const;
    double bias(int layer, int row) const;
    void set_weight(int layer, int row, int col, double v);
    void set_bias(int layer, int row, double v);

    /// Pre-sigmoid output. Dropout (inverted scaling) applies only when train_mode is set,
    /// in which case rng must be non-null. Throws DimensionMismatch.
    double logit(std::span<const double> x, bool train_mode = false, std::mt19937_64 *rng = nullptr) const;
    double forward(std::span<const double> x, bool train_mode = false, std::mt19937_64 *rng = nullptr) const;

    /// Mean BCE over the rows of x (row-major, n x input_dim) and its gradient
    /// w.r.t. parameters() written to grad. Dropout masks are drawn from rng in
    /// train mode.
    double loss_and_gradient(std::span<const double> x, std::span<const int> y, std::span<double> grad,
                             bool train_mode, std::mt19937_64 *rng) const;
    double loss(std::span<const double> x, std::span<const int> y) const;

    friend bool operator==(const MlpModel &, const MlpModel &) = default;

private:
    int input_dim_ = 0;
    int hidden_layers_ = 0;
    int hidden_units_ = 0;
    double dropout_ = 0.0;
    std::vector<Layer> layers_;
    std::vector<double> params_;
};

/// Numerically stable BCE on a logit: max(z,0) - z*y + log(1 + exp(-|z|)).
double bce_with_logit(double z, int y);
double sigmoid(double z);

/// AdamW with decoupled decay: theta *= (1 - lr*wd), then the bias-corrected Adam step.
class AdamW {
public:
    AdamW(std::size_t n, double learning_rate, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
          double eps = 1e-8);
    void step(std::span<double> params, std::span<const double> grad);
    long steps() const noexcept { return t_; }

private:
    double lr_, wd_, b1_, b2_, eps_;
    std::vector<double> m_, v_;
    long t_ = 0;
    double b1t_ = 1.0, b2t_ = 1.0;
};

struct TrainConfig {
    int hidden_layers = 2;
    int hidden_units = 64;
    double dropout = 0.1;
    double learning_rate = 1e-3;
    int epochs = 200;
    double weight_decay = 0.01;
    int batch_size = 0;  // 0 = full batch
    std::uint64_t seed = 0;
    int n_svd = 3;
    FeatureSet feature_set = FeatureSet::Combined;

    /// Range checks on L, H, p, lr, the epoch lattice and n_svd. Throws ConfigError.
    void validate() const;
    friend bool operator==(const TrainConfig &, const TrainConfig &) = default;
};

struct TrainResult {
    MlpModel model;
    std::vector<double> loss_curve;  // mean training loss per epoch
};

/// Full-batch (or mini-batch) AdamW on BCE. Table values must be finite
/// (standardized). Throws NonFiniteLoss naming the epoch.
TrainResult train(const FeatureTable &data, const TrainConfig &config);
/// Same, starting from a given model (architecture taken from it).
TrainResult train(MlpModel model, const FeatureTable &data, const TrainConfig &config);

struct Predictions {
    std::vector<double> probabilities;
    std::vector<int> labels;  // 1 iff p >= 0.5
};
Predictions predict(const MlpModel &model, const FeatureTable &table);

}  // namespace cardiofeat

#include "cardiofeat/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "cardiofeat/error.hpp"

namespace cardiofeat {
namespace {

// 53-bit uniform in [0,1); spelled out so streams do not depend on the library's distributions.
double unit_uniform(std::mt19937_64 &rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double bce_with_logit(double z, int y) { return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z))); }

MlpModel::MlpModel(int input_dim, int hidden_layers, int hidden_units, double dropout)
    : input_dim_(input_dim), hidden_layers_(hidden_layers), hidden_units_(hidden_units), dropout_(dropout) {
    if (input_dim < 1) throw Error(ErrorCode::InvalidArgument, "MLP input dimension must be >= 1");
    if (hidden_layers < 0 || (hidden_layers > 0 && hidden_units < 1)) {
        throw Error(ErrorCode::InvalidArgument, "bad MLP hidden shape");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(ErrorCode::InvalidArgument, "dropout must be in [0,1)");
    std::size_t offset = 0;
    int in = input_dim;
    for (int l = 0; l <= hidden_layers; ++l) {
        const int out = l == hidden_layers ? 1 : hidden_units;
        Layer layer{in, out, offset, offset + static_cast<std::size_t>(in) * static_cast<std::size_t>(out)};
        offset = layer.bias_offset + static_cast<std::size_t>(out);
        layers_.push_back(layer);
        in = out;
    }
    params_.assign(offset, 0.0);
}

void MlpModel::initialize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (const Layer &layer : layers_) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
        const std::size_t end = layer.bias_offset + static_cast<std::size_t>(layer.out);
        for (std::size_t i = layer.weight_offset; i < end; ++i) params_[i] = (2.0 * unit_uniform(rng) - 1.0) * bound;
    }
}

std::vector<int> MlpModel::layer_sizes() const {
    std::vector<int> out{input_dim_};
    for (const Layer &l : layers_) out.push_back(l.out);
    return out;
}

double MlpModel::weight(int layer, int row, int col) const {
    const Layer &l = layers_.at(static_cast<std::size_t>(layer));
    return params_[l.weight_offset + static_cast<std::size_t>(row) * static_cast<std::size_t>(l.in) + static_cast<std::size_t>(col)];
}
double MlpModel::bias(int layer, int row) const {
    return params_[layers_.at(static_cast<std::size_t>(layer)).bias_offset + static_cast<std::size_t>(row)];
}
void MlpModel::set_weight(int layer, int row, int col, double v) {
    const Layer &l = layers_.at(static_cast<std::size_t>(layer));
    params_[l.weight_offset + static_cast<std::size_t>(row) * static_cast<std::size_t>(l.in) + static_cast<std::size_t>(col)] = v;
}
void MlpModel::set_bias(int layer, int row, double v) {
    params_[layers_.at(static_cast<std::size_t>(layer)).bias_offset + static_cast<std::size_t>(row)] = v;
}

double MlpModel::logit(std::span<const double> x, bool train_mode, std::mt19937_64 *rng) const {
    if (x.size() != static_cast<std::size_t>(input_dim_)) {
        throw Error(ErrorCode::DimensionMismatch, "input has " + std::to_string(x.size()) + " features, model expects " +
                                                      std::to_string(input_dim_));
    }
    if (train_mode && dropout_ > 0.0 && rng == nullptr) {
        throw Error(ErrorCode::InvalidArgument, "train-mode forward needs an rng");
    }
    std::vector<double> a(x.begin(), x.end()), z;
    const double keep_scale = 1.0 / (1.0 - dropout_);
    for (std::size_t li = 0; li < layers_.size(); ++li) {
        const Layer &l = layers_[li];
        z.assign(static_cast<std::size_t>(l.out), 0.0);
        for (int o = 0; o < l.out; ++o) {
            const double *w = params_.data() + l.weight_offset + static_cast<std::size_t>(o) * static_cast<std::size_t>(l.in);
            double s = params_[l.bias_offset + static_cast<std::size_t>(o)];
            for (int i = 0; i < l.in; ++i) s += w[i] * a[static_cast<std::size_t>(i)];
            z[static_cast<std::size_t>(o)] = s;
        }
        if (li + 1 == layers_.size()) return z[0];
        for (double &v : z) {
            v = std::max(v, 0.0);
            if (train_mode && dropout_ > 0.0) v = unit_uniform(*rng) < dropout_ ? 0.0 : v * keep_scale;
        }
        a.swap(z);
    }
    return 0.0;
}

double MlpModel::forward(std::span<const double> x, bool train_mode, std::mt19937_64 *rng) const {
    // keep strictly inside (0,1) even for saturated logits
    return std::clamp(sigmoid(logit(x, train_mode, rng)), std::numeric_limits<double>::min(),
                      std::nextafter(1.0, 0.0));
}

double MlpModel::loss_and_gradient(std::span<const double> x, std::span<const int> y, std::span<double> grad,
                                   bool train_mode, std::mt19937_64 *rng) const {
    const std::size_t d = static_cast<std::size_t>(input_dim_);
    if (x.size() != y.size() * d) throw Error(ErrorCode::DimensionMismatch, "batch shape does not match model input");
    if (grad.size() != params_.size()) throw Error(ErrorCode::DimensionMismatch, "gradient buffer has wrong size");
    if (y.empty()) throw Error(ErrorCode::InsufficientData, "empty batch");
    const bool drop = train_mode && dropout_ > 0.0;
    if (drop && rng == nullptr) throw Error(ErrorCode::InvalidArgument, "train-mode loss needs an rng");

    std::fill(grad.begin(), grad.end(), 0.0);
    const std::size_t nl = layers_.size();
    const double keep_scale = 1.0 / (1.0 - dropout_);
    const double inv_n = 1.0 / static_cast<double>(y.size());
    // acts[l] = input to layer l; masks[l] = derivative factor of hidden layer l output
    std::vector<std::vector<double>> acts(nl), masks(nl);
    std::vector<double> delta, prev_delta;
    double total = 0.0;

    for (std::size_t n = 0; n < y.size(); ++n) {
        acts[0].assign(x.begin() + static_cast<std::ptrdiff_t>(n * d), x.begin() + static_cast<std::ptrdiff_t>((n + 1) * d));
        double out_z = 0.0;
        for (std::size_t li = 0; li < nl; ++li) {
            const Layer &l = layers_[li];
            const auto &a = acts[li];
            std::vector<double> z(static_cast<std::size_t>(l.out));
            for (int o = 0; o < l.out; ++o) {
                const double *w = params_.data() + l.weight_offset + static_cast<std::size_t>(o) * static_cast<std::size_t>(l.in);
                double s = params_[l.bias_offset + static_cast<std::size_t>(o)];
                for (int i = 0; i < l.in; ++i) s += w[i] * a[static_cast<std::size_t>(i)];
                z[static_cast<std::size_t>(o)] = s;
            }
            if (li + 1 == nl) {
                out_z = z[0];
                break;
            }
            auto &m = masks[li];
            m.assign(z.size(), 0.0);
            for (std::size_t o = 0; o < z.size(); ++o) {
                double f = z[o] > 0.0 ? 1.0 : 0.0;
                if (drop) f = unit_uniform(*rng) < dropout_ ? 0.0 : f * keep_scale;
                m[o] = f;
                z[o] = z[o] > 0.0 ? z[o] * f : 0.0;
            }
            acts[li + 1] = std::move(z);
        }
        total += bce_with_logit(out_z, y[n]);

        delta.assign(1, (sigmoid(out_z) - y[n]) * inv_n);
        for (std::size_t li = nl; li-- > 0;) {
            const Layer &l = layers_[li];
            const auto &a = acts[li];
            for (int o = 0; o < l.out; ++o) {
                const double g = delta[static_cast<std::size_t>(o)];
                if (g == 0.0) continue;
                double *gw = grad.data() + l.weight_offset + static_cast<std::size_t>(o) * static_cast<std::size_t>(l.in);
                for (int i = 0; i < l.in; ++i) gw[i] += g * a[static_cast<std::size_t>(i)];
                grad[l.bias_offset + static_cast<std::size_t>(o)] += g;
            }
            if (li == 0) break;
            prev_delta.assign(static_cast<std::size_t>(l.in), 0.0);
            for (int o = 0; o < l.out; ++o) {
                const double g = delta[static_cast<std::size_t>(o)];
                if (g == 0.0) continue;
                const double *w = params_.data() + l.weight_offset + static_cast<std::size_t>(o) * static_cast<std::size_t>(l.in);
                for (int i = 0; i < l.in; ++i) prev_delta[static_cast<std::size_t>(i)] += g * w[i];
            }
            const auto &m = masks[li - 1];
            for (std::size_t i = 0; i < prev_delta.size(); ++i) prev_delta[i] *= m[i];
            delta.swap(prev_delta);
        }
    }
    return total * inv_n;
}

double MlpModel::loss(std::span<const double> x, std::span<const int> y) const {
    const std::size_t d = static_cast<std::size_t>(input_dim_);
    if (x.size() != y.size() * d) throw Error(ErrorCode::DimensionMismatch, "batch shape does not match model input");
    double total = 0.0;
    for (std::size_t n = 0; n < y.size(); ++n) total += bce_with_logit(logit(x.subspan(n * d, d)), y[n]);
    return y.empty() ? 0.0 : total / static_cast<double>(y.size());
}

AdamW::AdamW(std::size_t n, double learning_rate, double weight_decay, double beta1, double beta2, double eps)
    : lr_(learning_rate), wd_(weight_decay), b1_(beta1), b2_(beta2), eps_(eps), m_(n, 0.0), v_(n, 0.0) {}

void AdamW::step(std::span<double> params, std::span<const double> grad) {
    if (params.size() != m_.size() || grad.size() != m_.size()) {
        throw Error(ErrorCode::DimensionMismatch, "AdamW parameter count changed");
    }
    ++t_;
    b1t_ *= b1_;
    b2t_ *= b2_;
    const double decay = 1.0 - lr_ * wd_;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grad[i];
        m_[i] = b1_ * m_[i] + (1.0 - b1_) * g;
        v_[i] = b2_ * v_[i] + (1.0 - b2_) * g * g;
        const double mhat = m_[i] / (1.0 - b1t_);
        const double vhat = v_[i] / (1.0 - b2t_);
        params[i] = params[i] * decay - lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
}

void TrainConfig::validate() const {
    auto fail = [](const std::string &msg) { throw Error(ErrorCode::ConfigError, msg); };
    if (hidden_layers < 1 || hidden_layers > 12) fail("hidden_layers must be in [1,12]");
    if (hidden_units < 8 || hidden_units > 512) fail("hidden_units must be in [8,512]");
    if (!(dropout >= 0.0 && dropout <= 0.5)) fail("dropout must be in [0,0.5]");
    if (!(learning_rate >= 1e-4 * (1 - 1e-12) && learning_rate <= 1e-2 * (1 + 1e-12))) {
        fail("learning_rate must be in [1e-4,1e-2]");
    }
    if (epochs < 100 || epochs > 400 || epochs % 25 != 0) fail("epochs must be one of 100,125,...,400");
    if (!(weight_decay >= 0.0)) fail("weight_decay must be >= 0");
    if (batch_size < 0) fail("batch_size must be >= 0");
    if (n_svd < 1 || n_svd > 3) fail("n_svd must be in [1,3]");
}

TrainResult train(const FeatureTable &data, const TrainConfig &config) {
    MlpModel model(static_cast<int>(std::max<std::size_t>(data.cols(), 1)), config.hidden_layers,
                   config.hidden_units, config.dropout);
    model.initialize(config.seed);
    return train(std::move(model), data, config);
}

TrainResult train(MlpModel model, const FeatureTable &data, const TrainConfig &config) {
    if (data.rows() == 0) throw Error(ErrorCode::InsufficientData, "training table is empty");
    if (data.cols() != static_cast<std::size_t>(model.input_dim())) {
        throw Error(ErrorCode::DimensionMismatch, "training table width does not match model input");
    }
    const std::size_t n = data.rows();
    const std::size_t d = data.cols();
    std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    AdamW opt(model.parameters().size(), config.learning_rate, config.weight_decay);
    std::vector<double> grad(model.parameters().size());
    const std::size_t batch = (config.batch_size <= 0 || static_cast<std::size_t>(config.batch_size) >= n)
                                  ? n
                                  : static_cast<std::size_t>(config.batch_size);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> bx;
    std::vector<int> by;

    TrainResult result;
    result.loss_curve.reserve(static_cast<std::size_t>(std::max(config.epochs, 0)));
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        if (batch < n) {
            for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng() % (i + 1)]);
        }
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t end = std::min(n, start + batch);
            std::span<const double> xs;
            std::span<const int> ys;
            if (batch == n) {
                xs = data.values();
                ys = data.labels();
            } else {
                bx.clear();
                by.clear();
                for (std::size_t k = start; k < end; ++k) {
                    const auto r = data.row(order[k]);
                    bx.insert(bx.end(), r.begin(), r.end());
                    by.push_back(data.labels()[order[k]]);
                }
                xs = std::span<const double>(bx.data(), (end - start) * d);
                ys = by;
            }
            const double l = model.loss_and_gradient(xs, ys, grad, true, &rng);
            if (!std::isfinite(l)) {
                throw Error(ErrorCode::NonFiniteLoss, "loss became non-finite at epoch " + std::to_string(epoch + 1) +
                                                          " (lr=" + std::to_string(config.learning_rate) + ")");
            }
            epoch_loss += l * static_cast<double>(end - start);
            opt.step(model.parameters(), grad);
        }
        result.loss_curve.push_back(epoch_loss / static_cast<double>(n));
    }
    result.model = std::move(model);
    return result;
}

Predictions predict(const MlpModel &model, const FeatureTable &table) {
    Predictions out;
    out.probabilities.reserve(table.rows());
    for (std::size_t r = 0; r < table.rows(); ++r) {
        const double p = model.forward(table.row(r));
        out.probabilities.push_back(p);
        out.labels.push_back(p >= 0.5 ? 1 : 0);
    }
    return out;
}

}  // namespace cardiofeat

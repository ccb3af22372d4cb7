#pragma once

#include "pigrid/neural.hpp"
#include "pigrid/telemetry.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace pigrid::piconvae {

struct ModelConfig {
    std::size_t window = 16;
    std::size_t channels = 6;
    std::array<std::size_t, 2> enc_filters{64, 32};
    std::array<std::size_t, 2> enc_kernels{5, 3};
    std::size_t bottleneck = 24;
    double dropout = 0.2;
    double leaky_slope = 0.2;
    double lambda_reg = 1e-4;  // L2 coefficient on weight (not bias) tensors
    double alpha_data = 1.0;   // data-driven loss weight
    double alpha_phys = 1.0;   // physics loss weight
    bool physics_enabled = true;
    bool alternating = true; // alternate encoder/decoder updates; false = joint step
    std::size_t epochs = 1000;
    std::size_t batch_size = 64;
    std::size_t patience = 20;
    double lr_initial = 0.001;
    double lr_decay = 0.95;
    std::size_t lr_interval = 10; // epochs per decay step
    std::uint64_t seed = 7;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

struct LossBreakdown {
    double total = 0.0;
    double ae = 0.0;  // mse + lambda * ||W||^2
    double mse = 0.0;
    double reg = 0.0;
    double phy_p = 0.0;
    double phy_q = 0.0;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_total = 0.0, train_ae = 0.0, train_phy_p = 0.0, train_phy_q = 0.0;
    double val_total = 0.0, val_ae = 0.0, val_phy_p = 0.0, val_phy_q = 0.0;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    std::size_t best_epoch = 0; // index into `epochs`
    double best_val_loss = 0.0;
    std::string stop_reason; // "patience" or "max_epochs"
};

// Convolutional autoencoder with the physics-augmented loss. With
// physics_enabled = false this is the plain ConvAE baseline: the total loss
// reduces bit-exactly to the data-driven term.
class Model {
public:
    explicit Model(const ModelConfig& cfg);

    const ModelConfig& config() const { return cfg_; }

    // MinMax constants captured from the training data; required before any
    // physics-loss evaluation (the power identities only hold in physical units)
    void set_normalization(const std::array<double, telemetry::kChannels>& ch_min,
                           const std::array<double, telemetry::kChannels>& ch_max);
    bool has_normalization() const { return has_norm_; }
    const std::array<double, telemetry::kChannels>& channel_min() const { return ch_min_; }
    const std::array<double, telemetry::kChannels>& channel_max() const { return ch_max_; }

    // batch (N, window, channels), values in the model's normalized space
    Tensor forward(const Tensor& batch, neural::Mode mode);
    // propagates dL/dxhat from the last forward, accumulating parameter grads
    void backward(const Tensor& grad_xhat);

    double mse(const Tensor& x, const Tensor& xhat) const;
    double weight_sq_norm() const;
    double loss_ae(const Tensor& x, const Tensor& xhat) const;
    std::pair<double, double> loss_physics(const Tensor& xhat) const;
    LossBreakdown loss_total(const Tensor& x, const Tensor& xhat) const;
    // dL/dxhat for the data + physics terms (the regularizer does not depend on xhat)
    Tensor loss_gradient(const Tensor& x, const Tensor& xhat) const;

    std::vector<neural::Param*> encoder_params();
    std::vector<neural::Param*> decoder_params();
    std::vector<neural::Param*> all_params();

    // deterministic-statistics mode for gradient checks
    void set_freeze_batchnorm(bool freeze);
    // run statistics exist (at least one training batch seen or checkpoint loaded)
    bool batchnorm_ready() const;

    TrainReport train(const Tensor& train_windows, const Tensor& val_windows);

    void save_checkpoint(const std::string& path) const;
    static Model load_checkpoint(const std::string& path);

    Rng& rng() { return rng_; }

private:
    struct Snapshot {
        std::vector<Tensor> values;
        std::vector<Tensor> bn_stats;
    };
    Snapshot take_snapshot();
    void restore_snapshot(const Snapshot& snap);
    LossBreakdown evaluate_batched(const Tensor& windows);
    std::vector<neural::BatchNorm*> batchnorms();
    std::vector<const neural::BatchNorm*> batchnorms() const;

    ModelConfig cfg_;
    Rng rng_;
    std::vector<std::unique_ptr<neural::Layer>> encoder_;
    std::vector<std::unique_ptr<neural::Layer>> decoder_;
    std::array<double, telemetry::kChannels> ch_min_{};
    std::array<double, telemetry::kChannels> ch_max_{};
    bool has_norm_ = false;
};

} // namespace pigrid::piconvae

#pragma once

#include "pigrid/rng.hpp"
#include "pigrid/tensor.hpp"

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace pigrid::neural {

enum class Mode { Train, Eval };

struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
    bool is_weight = true; // weights carry L2 regularization, biases/BN affine do not

    Param() = default;
    Param(std::string n, Tensor v, bool w = true)
        : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros_like(value)), is_weight(w) {}
};

// 1D convolution with "same" zero padding, odd kernel.
// x: (N, C_in, L), W: (C_out, C_in, K), b: (C_out) -> (N, C_out, L)
Tensor conv1d_forward(const Tensor& x, const Tensor& W, const Tensor& b);
// adjoint of conv1d_forward in its input: gy (N, C_out, L) -> gx (N, C_in, L)
Tensor conv1d_grad_input(const Tensor& gy, const Tensor& W);
// accumulates grad_W(f,c,k) = sum_{n,t} A[n,f,t] * Bpad[n,c,t+k]
void conv1d_cross_correlate(const Tensor& A, const Tensor& B, Tensor& grad_W);

class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x, Mode mode, Rng& rng) = 0;
    virtual Tensor backward(const Tensor& gy) = 0;
    virtual std::vector<Param*> params() { return {}; }
    virtual const char* kind() const = 0;
};

class Conv1D final : public Layer {
public:
    Conv1D(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, const std::string& name, Rng& rng);
    Tensor forward(const Tensor& x, Mode mode, Rng& rng) override;
    Tensor backward(const Tensor& gy) override;
    std::vector<Param*> params() override { return {&W, &b}; }
    const char* kind() const override { return "conv1d"; }

    Param W, b;

private:
    std::size_t in_ch_, out_ch_, kernel_;
    Tensor cache_x_;
};

// Adjoint of Conv1D: maps in_ch -> out_ch with weight shaped (in_ch, out_ch, K).
class TransposedConv1D final : public Layer {
public:
    TransposedConv1D(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, const std::string& name,
                     Rng& rng);
    Tensor forward(const Tensor& x, Mode mode, Rng& rng) override;
    Tensor backward(const Tensor& gy) override;
    std::vector<Param*> params() override { return {&W, &b}; }
    const char* kind() const override { return "tconv1d"; }

    Param W, b;

private:
    std::size_t in_ch_, out_ch_, kernel_;
    Tensor cache_x_;
};

class Dense final : public Layer {
public:
    Dense(std::size_t in, std::size_t out, const std::string& name, Rng& rng);
    Tensor forward(const Tensor& x, Mode mode, Rng& rng) override;
    Tensor backward(const Tensor& gy) override;
    std::vector<Param*> params() override { return {&W, &b}; }
    const char* kind() const override { return "dense"; }

    Param W, b;

private:
    std::size_t in_, out_;
    Tensor cache_x_;
};

class LeakyReLU final : public Layer {
public:
    explicit LeakyReLU(double slope) : slope_(slope) {}
    Tensor forward(const Tensor& x, Mode mode, Rng& rng) override;
    Tensor backward(const Tensor& gy) override;
    const char* kind() const override { return "leaky_relu"; }

private:
    double slope_;
    Tensor cache_x_;
};

class Dropout final : public Layer {
public:
    explicit Dropout(double rate);
    Tensor forward(const Tensor& x, Mode mode, Rng& rng) override;
    Tensor backward(const Tensor& gy) override;
    const char* kind() const override { return "dropout"; }

private:
    double rate_;
    bool identity_ = true;
    Tensor mask_;
};

// Per-feature normalization: rank-2 input (N, F) normalizes each feature over
// the batch, rank-3 input (N, C, L) normalizes each channel over batch and
// positions. Biased variance throughout (normalization and running stats).
class BatchNorm final : public Layer {
public:
    BatchNorm(std::size_t features, const std::string& name, double momentum = 0.9, double eps = 1e-5);
    Tensor forward(const Tensor& x, Mode mode, Rng& rng) override;
    Tensor backward(const Tensor& gy) override;
    std::vector<Param*> params() override { return {&gamma, &beta}; }
    const char* kind() const override { return "batchnorm"; }

    // train mode with frozen statistics: affine transform through running
    // stats, gamma/beta still trainable. Needed for deterministic grad checks.
    void set_freeze_stats(bool f) { freeze_stats_ = f; }
    bool has_stats() const { return has_stats_; }
    // used when running statistics are restored from a checkpoint
    void mark_stats_loaded() { has_stats_ = true; }

    Param gamma, beta;
    Tensor running_mean, running_var;

private:
    std::size_t features_;
    double momentum_, eps_;
    bool has_stats_ = false;
    bool freeze_stats_ = false;
    bool cache_batch_stats_ = false;
    Tensor cache_xhat_;
    std::vector<double> cache_inv_std_;
    std::vector<std::size_t> cache_shape_;
};

// Changes the per-sample shape; leading (batch) dimension preserved.
class Reshape final : public Layer {
public:
    explicit Reshape(std::vector<std::size_t> out_tail) : out_tail_(std::move(out_tail)) {}
    Tensor forward(const Tensor& x, Mode mode, Rng& rng) override;
    Tensor backward(const Tensor& gy) override;
    const char* kind() const override { return "reshape"; }

private:
    std::vector<std::size_t> out_tail_;
    std::vector<std::size_t> cache_in_shape_;
};

struct LrSchedule {
    double initial = 0.001;
    double decay = 0.95;
    std::size_t interval = 10; // schedule ticks (epochs) per decay step
};

class Adam {
public:
    Adam(std::vector<Param*> params, LrSchedule schedule, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8);

    void set_schedule_tick(std::size_t tick) { schedule_tick_ = tick; }
    double effective_lr() const;
    std::size_t step_count() const { return step_; }

    // adaptive-moment update with bias correction over params' grads
    void step();
    void zero_grad();

private:
    std::vector<Param*> params_;
    std::vector<Tensor> m_, v_;
    LrSchedule schedule_;
    double beta1_, beta2_, eps_;
    std::size_t step_ = 0;
    std::size_t schedule_tick_ = 0;
};

struct GradCheckBlock {
    std::string name;
    double max_rel_err = 0.0;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckBlock> blocks;
    double max_rel_err = 0.0;
    std::string worst_block;
};

// Central finite differences at step h against analytic gradients.
// loss_fn evaluates the loss at the current parameter values; compute_grads
// fills every param's grad for those values. Both must be deterministic.
GradCheckReport grad_check(const std::function<double()>& loss_fn,
                           const std::function<void()>& compute_grads,
                           const std::vector<Param*>& params, double h = 1e-5);

} // namespace pigrid::neural

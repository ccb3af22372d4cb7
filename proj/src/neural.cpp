#include "pigrid/neural.hpp"

#include "pigrid/errors.hpp"
#include "pigrid/kernels.hpp"

#include <cmath>

namespace pigrid::neural {

namespace {

// zero-pad the last dimension by p on both sides
Tensor pad_last(const Tensor& x, std::size_t p) {
    const std::size_t N = x.dim(0), C = x.dim(1), L = x.dim(2);
    Tensor out({N, C, L + 2 * p});
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t c = 0; c < C; ++c) {
            const double* src = x.row3(n, c);
            double* dst = out.row3(n, c) + p;
            for (std::size_t t = 0; t < L; ++t) dst[t] = src[t];
        }
    return out;
}

void check_odd_kernel(std::size_t k) {
    if (k % 2 == 0) throw UsageError("conv kernel size must be odd, got " + std::to_string(k));
}

double he_std(std::size_t fan_in) { return std::sqrt(2.0 / static_cast<double>(fan_in)); }

void init_normal(Tensor& t, Rng& rng, double stddev) {
    for (double& v : t.data) v = rng.normal(0.0, stddev);
}

} // namespace

Tensor conv1d_forward(const Tensor& x, const Tensor& W, const Tensor& b) {
    if (x.rank() != 3) throw UsageError("conv1d input must be rank 3, got " + x.shape_str());
    const std::size_t N = x.dim(0), C = x.dim(1), L = x.dim(2);
    const std::size_t F = W.dim(0), K = W.dim(2);
    check_odd_kernel(K);
    if (W.dim(1) != C)
        throw UsageError("conv1d channel mismatch: input has " + std::to_string(C) +
                         " channels, weight expects " + std::to_string(W.dim(1)));
    const std::size_t p = (K - 1) / 2;
    Tensor xpad = pad_last(x, p);
    Tensor y({N, F, L});
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t f = 0; f < F; ++f) {
            double* yrow = y.row3(n, f);
            for (std::size_t t = 0; t < L; ++t) yrow[t] = b[f];
            for (std::size_t c = 0; c < C; ++c) {
                const double* xrow = xpad.row3(n, c);
                for (std::size_t k = 0; k < K; ++k)
                    kernels::axpy(W.at3(f, c, k), xrow + k, yrow, L);
            }
        }
    return y;
}

Tensor conv1d_grad_input(const Tensor& gy, const Tensor& W) {
    const std::size_t N = gy.dim(0), F = gy.dim(1), L = gy.dim(2);
    const std::size_t C = W.dim(1), K = W.dim(2);
    if (gy.dim(1) != W.dim(0))
        throw UsageError("conv1d_grad_input channel mismatch: " + std::to_string(F) + " vs " +
                         std::to_string(W.dim(0)));
    const std::size_t p = (K - 1) / 2;
    Tensor gxpad({N, C, L + 2 * p});
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t f = 0; f < F; ++f) {
            const double* gyrow = gy.row3(n, f);
            for (std::size_t c = 0; c < C; ++c) {
                double* gxrow = gxpad.row3(n, c);
                for (std::size_t k = 0; k < K; ++k)
                    kernels::axpy(W.at3(f, c, k), gyrow, gxrow + k, L);
            }
        }
    Tensor gx({N, C, L});
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t c = 0; c < C; ++c) {
            const double* src = gxpad.row3(n, c) + p;
            double* dst = gx.row3(n, c);
            for (std::size_t t = 0; t < L; ++t) dst[t] = src[t];
        }
    return gx;
}

void conv1d_cross_correlate(const Tensor& A, const Tensor& B, Tensor& grad_W) {
    const std::size_t N = A.dim(0), F = A.dim(1), L = A.dim(2);
    const std::size_t C = B.dim(1), K = grad_W.dim(2);
    if (B.dim(0) != N || B.dim(2) != L)
        throw UsageError("conv1d_cross_correlate shape mismatch: " + A.shape_str() + " vs " +
                         B.shape_str());
    const std::size_t p = (K - 1) / 2;
    Tensor bpad = pad_last(B, p);
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t f = 0; f < F; ++f) {
            const double* arow = A.row3(n, f);
            for (std::size_t c = 0; c < C; ++c) {
                const double* brow = bpad.row3(n, c);
                for (std::size_t k = 0; k < K; ++k)
                    grad_W.at3(f, c, k) += kernels::dot(arow, brow + k, L);
            }
        }
}

// ---------------------------------------------------------------- Conv1D

Conv1D::Conv1D(std::size_t in_ch, std::size_t out_ch, std::size_t kernel, const std::string& name,
               Rng& rng)
    : W(name + ".W", Tensor({out_ch, in_ch, kernel})),
      b(name + ".b", Tensor({out_ch}), false),
      in_ch_(in_ch),
      out_ch_(out_ch),
      kernel_(kernel) {
    check_odd_kernel(kernel);
    init_normal(W.value, rng, he_std(in_ch * kernel));
}

Tensor Conv1D::forward(const Tensor& x, Mode, Rng&) {
    cache_x_ = x;
    Tensor y = conv1d_forward(x, W.value, b.value);
    y.check_finite("conv1d output (" + W.name + ")");
    return y;
}

Tensor Conv1D::backward(const Tensor& gy) {
    if (gy.shape != std::vector<std::size_t>{cache_x_.dim(0), out_ch_, cache_x_.dim(2)})
        throw UsageError("conv1d backward shape mismatch " + gy.shape_str());
    conv1d_cross_correlate(gy, cache_x_, W.grad);
    for (std::size_t n = 0; n < gy.dim(0); ++n)
        for (std::size_t f = 0; f < out_ch_; ++f) {
            const double* row = gy.row3(n, f);
            double s = 0.0;
            for (std::size_t t = 0; t < gy.dim(2); ++t) s += row[t];
            b.grad[f] += s;
        }
    return conv1d_grad_input(gy, W.value);
}

// ------------------------------------------------------- TransposedConv1D

TransposedConv1D::TransposedConv1D(std::size_t in_ch, std::size_t out_ch, std::size_t kernel,
                                   const std::string& name, Rng& rng)
    : W(name + ".W", Tensor({in_ch, out_ch, kernel})),
      b(name + ".b", Tensor({out_ch}), false),
      in_ch_(in_ch),
      out_ch_(out_ch),
      kernel_(kernel) {
    check_odd_kernel(kernel);
    init_normal(W.value, rng, he_std(in_ch * kernel));
}

Tensor TransposedConv1D::forward(const Tensor& x, Mode, Rng&) {
    if (x.dim(1) != in_ch_)
        throw UsageError("tconv1d channel mismatch: input has " + std::to_string(x.dim(1)) +
                         " channels, expected " + std::to_string(in_ch_));
    cache_x_ = x;
    Tensor y = conv1d_grad_input(x, W.value);
    for (std::size_t n = 0; n < y.dim(0); ++n)
        for (std::size_t c = 0; c < out_ch_; ++c) {
            double* row = y.row3(n, c);
            for (std::size_t t = 0; t < y.dim(2); ++t) row[t] += b.value[c];
        }
    y.check_finite("tconv1d output (" + W.name + ")");
    return y;
}

Tensor TransposedConv1D::backward(const Tensor& gy) {
    conv1d_cross_correlate(cache_x_, gy, W.grad);
    for (std::size_t n = 0; n < gy.dim(0); ++n)
        for (std::size_t c = 0; c < out_ch_; ++c) {
            const double* row = gy.row3(n, c);
            double s = 0.0;
            for (std::size_t t = 0; t < gy.dim(2); ++t) s += row[t];
            b.grad[c] += s;
        }
    Tensor zero_bias({in_ch_});
    return conv1d_forward(gy, W.value, zero_bias);
}

// ----------------------------------------------------------------- Dense

Dense::Dense(std::size_t in, std::size_t out, const std::string& name, Rng& rng)
    : W(name + ".W", Tensor({out, in})), b(name + ".b", Tensor({out}), false), in_(in), out_(out) {
    init_normal(W.value, rng, he_std(in));
}

Tensor Dense::forward(const Tensor& x, Mode, Rng&) {
    if (x.rank() != 2 || x.dim(1) != in_)
        throw UsageError("dense input shape " + x.shape_str() + ", expected (N," +
                         std::to_string(in_) + ")");
    cache_x_ = x;
    const std::size_t N = x.dim(0);
    Tensor y({N, out_});
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t o = 0; o < out_; ++o)
            y.at2(n, o) = b.value[o] + kernels::dot(W.value.row2(o), x.row2(n), in_);
    y.check_finite("dense output (" + W.name + ")");
    return y;
}

Tensor Dense::backward(const Tensor& gy) {
    const std::size_t N = cache_x_.dim(0);
    if (gy.rank() != 2 || gy.dim(0) != N || gy.dim(1) != out_)
        throw UsageError("dense backward shape mismatch " + gy.shape_str());
    Tensor gx({N, in_});
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t o = 0; o < out_; ++o) {
            const double g = gy.at2(n, o);
            kernels::axpy(g, W.value.row2(o), gx.row2(n), in_);
            kernels::axpy(g, cache_x_.row2(n), W.grad.row2(o), in_);
            b.grad[o] += g;
        }
    return gx;
}

// ------------------------------------------------------------- LeakyReLU

Tensor LeakyReLU::forward(const Tensor& x, Mode, Rng&) {
    cache_x_ = x;
    Tensor y = x;
    for (double& v : y.data)
        if (v < 0.0) v *= slope_;
    return y;
}

Tensor LeakyReLU::backward(const Tensor& gy) {
    Tensor gx = gy;
    for (std::size_t i = 0; i < gx.size(); ++i)
        if (cache_x_[i] < 0.0) gx[i] *= slope_;
    return gx;
}

// --------------------------------------------------------------- Dropout

Dropout::Dropout(double rate) : rate_(rate) {
    if (rate < 0.0 || rate >= 1.0)
        throw UsageError("dropout rate must be in [0,1), got " + std::to_string(rate));
}

Tensor Dropout::forward(const Tensor& x, Mode mode, Rng& rng) {
    if (mode == Mode::Eval || rate_ == 0.0) {
        identity_ = true;
        return x;
    }
    identity_ = false;
    mask_ = Tensor::zeros_like(x);
    const double keep_scale = 1.0 / (1.0 - rate_);
    Tensor y = x;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double m = rng.uniform() >= rate_ ? keep_scale : 0.0;
        mask_[i] = m;
        y[i] *= m;
    }
    return y;
}

Tensor Dropout::backward(const Tensor& gy) {
    if (identity_) return gy;
    Tensor gx = gy;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= mask_[i];
    return gx;
}

// ------------------------------------------------------------- BatchNorm

BatchNorm::BatchNorm(std::size_t features, const std::string& name, double momentum, double eps)
    : gamma(name + ".gamma", Tensor({features}, 1.0), false),
      beta(name + ".beta", Tensor({features}), false),
      running_mean(Tensor({features})),
      running_var(Tensor({features}, 1.0)),
      features_(features),
      momentum_(momentum),
      eps_(eps) {}

Tensor BatchNorm::forward(const Tensor& x, Mode mode, Rng&) {
    const bool rank3 = x.rank() == 3;
    if ((rank3 ? x.dim(1) : x.dim(1)) != features_)
        throw UsageError("batchnorm feature mismatch: input " + x.shape_str() + ", expected " +
                         std::to_string(features_) + " features");
    cache_shape_ = x.shape;
    const std::size_t N = x.dim(0);
    const std::size_t L = rank3 ? x.dim(2) : 1;
    const std::size_t M = N * L;

    const bool use_batch_stats = (mode == Mode::Train) && !freeze_stats_;
    cache_batch_stats_ = use_batch_stats;
    if (!use_batch_stats && !has_stats_)
        throw NumericError("batchnorm '" + gamma.name + "': no running statistics");

    std::vector<double> mean(features_), var(features_);
    if (use_batch_stats) {
        if (M < 2) throw UsageError("batchnorm needs at least 2 values per feature");
        for (std::size_t f = 0; f < features_; ++f) {
            double s = 0.0;
            for (std::size_t n = 0; n < N; ++n) {
                const double* row = rank3 ? x.row3(n, f) : &x.at2(n, f);
                for (std::size_t t = 0; t < L; ++t) s += row[t];
            }
            mean[f] = s / static_cast<double>(M);
            double sq = 0.0;
            for (std::size_t n = 0; n < N; ++n) {
                const double* row = rank3 ? x.row3(n, f) : &x.at2(n, f);
                for (std::size_t t = 0; t < L; ++t) {
                    const double d = row[t] - mean[f];
                    sq += d * d;
                }
            }
            var[f] = sq / static_cast<double>(M);
        }
        if (!has_stats_) {
            for (std::size_t f = 0; f < features_; ++f) {
                running_mean[f] = mean[f];
                running_var[f] = var[f];
            }
            has_stats_ = true;
        } else {
            for (std::size_t f = 0; f < features_; ++f) {
                running_mean[f] = momentum_ * running_mean[f] + (1.0 - momentum_) * mean[f];
                running_var[f] = momentum_ * running_var[f] + (1.0 - momentum_) * var[f];
            }
        }
    } else {
        for (std::size_t f = 0; f < features_; ++f) {
            mean[f] = running_mean[f];
            var[f] = running_var[f];
        }
    }

    cache_inv_std_.assign(features_, 0.0);
    for (std::size_t f = 0; f < features_; ++f) cache_inv_std_[f] = 1.0 / std::sqrt(var[f] + eps_);

    Tensor y = x;
    cache_xhat_ = Tensor::zeros_like(x);
    for (std::size_t f = 0; f < features_; ++f) {
        const double m = mean[f], is = cache_inv_std_[f];
        const double g = gamma.value[f], bt = beta.value[f];
        for (std::size_t n = 0; n < N; ++n) {
            const double* xr = rank3 ? x.row3(n, f) : &x.at2(n, f);
            double* hr = rank3 ? cache_xhat_.row3(n, f) : &cache_xhat_.at2(n, f);
            double* yr = rank3 ? y.row3(n, f) : &y.at2(n, f);
            for (std::size_t t = 0; t < L; ++t) {
                const double xh = (xr[t] - m) * is;
                hr[t] = xh;
                yr[t] = g * xh + bt;
            }
        }
    }
    y.check_finite("batchnorm output (" + gamma.name + ")");
    return y;
}

Tensor BatchNorm::backward(const Tensor& gy) {
    if (gy.shape != cache_shape_)
        throw UsageError("batchnorm backward shape mismatch " + gy.shape_str());
    const bool rank3 = gy.rank() == 3;
    const std::size_t N = gy.dim(0);
    const std::size_t L = rank3 ? gy.dim(2) : 1;
    const double M = static_cast<double>(N * L);

    Tensor gx = Tensor::zeros_like(gy);
    for (std::size_t f = 0; f < features_; ++f) {
        double sum_gy = 0.0, sum_gy_xhat = 0.0;
        for (std::size_t n = 0; n < N; ++n) {
            const double* gr = rank3 ? gy.row3(n, f) : &gy.at2(n, f);
            const double* hr = rank3 ? cache_xhat_.row3(n, f) : &cache_xhat_.at2(n, f);
            for (std::size_t t = 0; t < L; ++t) {
                sum_gy += gr[t];
                sum_gy_xhat += gr[t] * hr[t];
            }
        }
        gamma.grad[f] += sum_gy_xhat;
        beta.grad[f] += sum_gy;

        const double g = gamma.value[f], is = cache_inv_std_[f];
        for (std::size_t n = 0; n < N; ++n) {
            const double* gr = rank3 ? gy.row3(n, f) : &gy.at2(n, f);
            const double* hr = rank3 ? cache_xhat_.row3(n, f) : &cache_xhat_.at2(n, f);
            double* xr = rank3 ? gx.row3(n, f) : &gx.at2(n, f);
            if (cache_batch_stats_) {
                for (std::size_t t = 0; t < L; ++t)
                    xr[t] = g * is / M * (M * gr[t] - sum_gy - hr[t] * sum_gy_xhat);
            } else {
                // frozen/eval statistics: plain affine transform
                for (std::size_t t = 0; t < L; ++t) xr[t] = g * is * gr[t];
            }
        }
    }
    return gx;
}

// --------------------------------------------------------------- Reshape

Tensor Reshape::forward(const Tensor& x, Mode, Rng&) {
    cache_in_shape_ = x.shape;
    std::size_t tail = 1;
    for (std::size_t d : out_tail_) tail *= d;
    std::size_t in_tail = x.size() / x.dim(0);
    if (tail != in_tail)
        throw UsageError("reshape size mismatch: " + x.shape_str() + " per-sample " +
                         std::to_string(in_tail) + " vs " + std::to_string(tail));
    Tensor y = x;
    y.shape = {x.dim(0)};
    y.shape.insert(y.shape.end(), out_tail_.begin(), out_tail_.end());
    return y;
}

Tensor Reshape::backward(const Tensor& gy) {
    Tensor gx = gy;
    gx.shape = cache_in_shape_;
    return gx;
}

// ------------------------------------------------------------------ Adam

Adam::Adam(std::vector<Param*> params, LrSchedule schedule, double beta1, double beta2, double eps)
    : params_(std::move(params)), schedule_(schedule), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const Param* p : params_) {
        m_.push_back(Tensor::zeros_like(p->value));
        v_.push_back(Tensor::zeros_like(p->value));
    }
}

double Adam::effective_lr() const {
    return schedule_.initial * std::pow(schedule_.decay, static_cast<double>(schedule_tick_ / schedule_.interval));
}

void Adam::step() {
    ++step_;
    const double lr = effective_lr();
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Param& p = *params_[i];
        for (std::size_t j = 0; j < p.value.size(); ++j) {
            const double g = p.grad[j];
            if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter " + p.name);
            m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g;
            v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g * g;
            const double mhat = m_[i][j] / bc1;
            const double vhat = v_[i][j] / bc2;
            p.value[j] -= lr * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

void Adam::zero_grad() {
    for (Param* p : params_) p->grad.fill(0.0);
}

// ------------------------------------------------------------ grad_check

GradCheckReport grad_check(const std::function<double()>& loss_fn,
                           const std::function<void()>& compute_grads,
                           const std::vector<Param*>& params, double h) {
    compute_grads();
    std::vector<Tensor> analytic;
    analytic.reserve(params.size());
    for (const Param* p : params) analytic.push_back(p->grad);

    GradCheckReport report;
    for (std::size_t i = 0; i < params.size(); ++i) {
        Param& p = *params[i];
        GradCheckBlock block;
        block.name = p.name;
        for (std::size_t j = 0; j < p.value.size(); ++j) {
            const double saved = p.value[j];
            p.value[j] = saved + h;
            const double lp = loss_fn();
            p.value[j] = saved - h;
            const double lm = loss_fn();
            p.value[j] = saved;
            const double numeric = (lp - lm) / (2.0 * h);
            const double a = analytic[i][j];
            // unit floor: near-zero gradients are judged by absolute error,
            // where central differences only carry roundoff noise
            const double denom = std::max({std::abs(a), std::abs(numeric), 1.0});
            const double rel = std::abs(a - numeric) / denom;
            if (rel > block.max_rel_err) {
                block.max_rel_err = rel;
                block.worst_index = j;
                block.analytic = a;
                block.numeric = numeric;
            }
        }
        if (block.max_rel_err > report.max_rel_err) {
            report.max_rel_err = block.max_rel_err;
            report.worst_block = block.name;
        }
        report.blocks.push_back(block);
    }
    return report;
}

} // namespace pigrid::neural

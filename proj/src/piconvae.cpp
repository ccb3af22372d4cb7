#include "pigrid/piconvae.hpp"

#include "pigrid/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

namespace pigrid::piconvae {

using neural::Adam;
using neural::BatchNorm;
using neural::Conv1D;
using neural::Dense;
using neural::Dropout;
using neural::Layer;
using neural::LeakyReLU;
using neural::LrSchedule;
using neural::Mode;
using neural::Param;
using neural::Reshape;
using neural::TransposedConv1D;
using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'P', 'I', 'G', 'R', 'I', 'D', 'A', 'E'};
constexpr std::uint32_t kFormatVersion = 1;

// (N, W, C) -> (N, C, W)
Tensor to_channels_major(const Tensor& batch) {
    const std::size_t N = batch.dim(0), W = batch.dim(1), C = batch.dim(2);
    Tensor out({N, C, W});
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t w = 0; w < W; ++w)
            for (std::size_t c = 0; c < C; ++c) out.at3(n, c, w) = batch.at3(n, w, c);
    return out;
}

// (N, C, W) -> (N, W, C)
Tensor to_window_major(const Tensor& x) {
    const std::size_t N = x.dim(0), C = x.dim(1), W = x.dim(2);
    Tensor out({N, W, C});
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t w = 0; w < W; ++w) out.at3(n, w, c) = x.at3(n, c, w);
    return out;
}

} // namespace

void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"window", c.window},
                       {"channels", c.channels},
                       {"enc_filters", {c.enc_filters[0], c.enc_filters[1]}},
                       {"enc_kernels", {c.enc_kernels[0], c.enc_kernels[1]}},
                       {"bottleneck", c.bottleneck},
                       {"dropout", c.dropout},
                       {"leaky_slope", c.leaky_slope},
                       {"lambda_reg", c.lambda_reg},
                       {"alpha_data", c.alpha_data},
                       {"alpha_phys", c.alpha_phys},
                       {"physics_enabled", c.physics_enabled},
                       {"alternating", c.alternating},
                       {"epochs", c.epochs},
                       {"batch_size", c.batch_size},
                       {"patience", c.patience},
                       {"lr_initial", c.lr_initial},
                       {"lr_decay", c.lr_decay},
                       {"lr_interval", c.lr_interval},
                       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
    c.window = j.value("window", c.window);
    c.channels = j.value("channels", c.channels);
    if (j.contains("enc_filters")) c.enc_filters = {j.at("enc_filters")[0], j.at("enc_filters")[1]};
    if (j.contains("enc_kernels")) c.enc_kernels = {j.at("enc_kernels")[0], j.at("enc_kernels")[1]};
    c.bottleneck = j.value("bottleneck", c.bottleneck);
    c.dropout = j.value("dropout", c.dropout);
    c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
    c.lambda_reg = j.value("lambda_reg", c.lambda_reg);
    c.alpha_data = j.value("alpha_data", c.alpha_data);
    c.alpha_phys = j.value("alpha_phys", c.alpha_phys);
    c.physics_enabled = j.value("physics_enabled", c.physics_enabled);
    c.alternating = j.value("alternating", c.alternating);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.patience = j.value("patience", c.patience);
    c.lr_initial = j.value("lr_initial", c.lr_initial);
    c.lr_decay = j.value("lr_decay", c.lr_decay);
    c.lr_interval = j.value("lr_interval", c.lr_interval);
    c.seed = j.value("seed", c.seed);
}

Model::Model(const ModelConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {
    const std::size_t W = cfg.window, C = cfg.channels;
    const std::size_t f1 = cfg.enc_filters[0], f2 = cfg.enc_filters[1];
    const std::size_t k1 = cfg.enc_kernels[0], k2 = cfg.enc_kernels[1];
    if (cfg.bottleneck == 0) throw UsageError("bottleneck width must be positive");

    encoder_.push_back(std::make_unique<Conv1D>(C, f1, k1, "enc.conv1", rng_));
    encoder_.push_back(std::make_unique<BatchNorm>(f1, "enc.bn1"));
    encoder_.push_back(std::make_unique<LeakyReLU>(cfg.leaky_slope));
    encoder_.push_back(std::make_unique<Dropout>(cfg.dropout));
    encoder_.push_back(std::make_unique<Conv1D>(f1, f2, k2, "enc.conv2", rng_));
    encoder_.push_back(std::make_unique<BatchNorm>(f2, "enc.bn2"));
    encoder_.push_back(std::make_unique<LeakyReLU>(cfg.leaky_slope));
    encoder_.push_back(std::make_unique<Dropout>(cfg.dropout));
    encoder_.push_back(std::make_unique<Reshape>(std::vector<std::size_t>{f2 * W}));
    encoder_.push_back(std::make_unique<Dense>(f2 * W, cfg.bottleneck, "enc.fc", rng_));
    encoder_.push_back(std::make_unique<BatchNorm>(cfg.bottleneck, "enc.bn3"));
    encoder_.push_back(std::make_unique<LeakyReLU>(cfg.leaky_slope));

    decoder_.push_back(std::make_unique<Dense>(cfg.bottleneck, f2 * W, "dec.fc", rng_));
    decoder_.push_back(std::make_unique<BatchNorm>(f2 * W, "dec.bn1"));
    decoder_.push_back(std::make_unique<LeakyReLU>(cfg.leaky_slope));
    decoder_.push_back(std::make_unique<Reshape>(std::vector<std::size_t>{f2, W}));
    decoder_.push_back(std::make_unique<TransposedConv1D>(f2, f2, k2, "dec.tconv1", rng_));
    decoder_.push_back(std::make_unique<BatchNorm>(f2, "dec.bn2"));
    decoder_.push_back(std::make_unique<LeakyReLU>(cfg.leaky_slope));
    decoder_.push_back(std::make_unique<Dropout>(cfg.dropout));
    decoder_.push_back(std::make_unique<TransposedConv1D>(f2, f1, k1, "dec.tconv2", rng_));
    decoder_.push_back(std::make_unique<BatchNorm>(f1, "dec.bn3"));
    decoder_.push_back(std::make_unique<LeakyReLU>(cfg.leaky_slope));
    decoder_.push_back(std::make_unique<Dropout>(cfg.dropout));
    // per-position linear head back to the measurement channels
    decoder_.push_back(std::make_unique<Conv1D>(f1, C, 1, "dec.head", rng_));
}

void Model::set_normalization(const std::array<double, telemetry::kChannels>& ch_min,
                              const std::array<double, telemetry::kChannels>& ch_max) {
    for (std::size_t c = 0; c < telemetry::kChannels; ++c)
        if (!(ch_max[c] > ch_min[c]))
            throw DataError("normalization constants degenerate for channel " + std::to_string(c));
    ch_min_ = ch_min;
    ch_max_ = ch_max;
    has_norm_ = true;
}

Tensor Model::forward(const Tensor& batch, Mode mode) {
    if (batch.rank() != 3 || batch.dim(1) != cfg_.window || batch.dim(2) != cfg_.channels)
        throw UsageError("model input must be (N," + std::to_string(cfg_.window) + "," +
                         std::to_string(cfg_.channels) + "), got " + batch.shape_str());
    Tensor x = to_channels_major(batch);
    for (auto& layer : encoder_) x = layer->forward(x, mode, rng_);
    for (auto& layer : decoder_) x = layer->forward(x, mode, rng_);
    return to_window_major(x);
}

void Model::backward(const Tensor& grad_xhat) {
    Tensor g = to_channels_major(grad_xhat);
    for (auto it = decoder_.rbegin(); it != decoder_.rend(); ++it) g = (*it)->backward(g);
    for (auto it = encoder_.rbegin(); it != encoder_.rend(); ++it) g = (*it)->backward(g);
}

double Model::mse(const Tensor& x, const Tensor& xhat) const {
    if (!x.same_shape(xhat))
        throw UsageError("loss shape mismatch " + x.shape_str() + " vs " + xhat.shape_str());
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = xhat[i] - x[i];
        s += d * d;
    }
    return s / static_cast<double>(x.size());
}

double Model::weight_sq_norm() const {
    double s = 0.0;
    auto accumulate = [&s](const std::vector<std::unique_ptr<Layer>>& layers) {
        for (const auto& layer : layers)
            for (const Param* p : const_cast<Layer&>(*layer).params())
                if (p->is_weight)
                    for (double v : p->value.data) s += v * v;
    };
    accumulate(encoder_);
    accumulate(decoder_);
    return s;
}

double Model::loss_ae(const Tensor& x, const Tensor& xhat) const {
    return mse(x, xhat) + cfg_.lambda_reg * weight_sq_norm();
}

std::pair<double, double> Model::loss_physics(const Tensor& xhat) const {
    if (!has_norm_) throw UsageError("physics loss requires normalization constants");
    const std::size_t N = xhat.dim(0), W = xhat.dim(1);
    const double M = static_cast<double>(N * W);
    double lp = 0.0, lq = 0.0;
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t w = 0; w < W; ++w) {
            double z[telemetry::kChannels];
            for (std::size_t c = 0; c < telemetry::kChannels; ++c)
                z[c] = xhat.at3(n, w, c) * (ch_max_[c] - ch_min_[c]) + ch_min_[c];
            const double ang = z[2] - z[3];
            const double rp = z[4] - z[0] * z[1] * std::cos(ang);
            const double rq = z[5] - z[0] * z[1] * std::sin(ang);
            lp += rp * rp;
            lq += rq * rq;
        }
    return {lp / M, lq / M};
}

LossBreakdown Model::loss_total(const Tensor& x, const Tensor& xhat) const {
    LossBreakdown out;
    out.mse = mse(x, xhat);
    out.reg = cfg_.lambda_reg * weight_sq_norm();
    out.ae = out.mse + out.reg;
    if (cfg_.physics_enabled) {
        auto [lp, lq] = loss_physics(xhat);
        out.phy_p = lp;
        out.phy_q = lq;
        out.total = cfg_.alpha_data * out.ae + cfg_.alpha_phys * (lp + lq);
    } else {
        out.total = cfg_.alpha_data * out.ae;
    }
    return out;
}

Tensor Model::loss_gradient(const Tensor& x, const Tensor& xhat) const {
    if (!x.same_shape(xhat))
        throw UsageError("loss shape mismatch " + x.shape_str() + " vs " + xhat.shape_str());
    const std::size_t N = xhat.dim(0), W = xhat.dim(1);
    Tensor g = Tensor::zeros_like(xhat);
    const double inv_size = 1.0 / static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        g[i] = cfg_.alpha_data * 2.0 * (xhat[i] - x[i]) * inv_size;

    if (cfg_.physics_enabled) {
        if (!has_norm_) throw UsageError("physics loss requires normalization constants");
        const double inv_m = 1.0 / static_cast<double>(N * W);
        for (std::size_t n = 0; n < N; ++n)
            for (std::size_t w = 0; w < W; ++w) {
                double z[telemetry::kChannels];
                double scale[telemetry::kChannels];
                for (std::size_t c = 0; c < telemetry::kChannels; ++c) {
                    scale[c] = ch_max_[c] - ch_min_[c];
                    z[c] = xhat.at3(n, w, c) * scale[c] + ch_min_[c];
                }
                const double V = z[0], I = z[1];
                const double ang = z[2] - z[3];
                const double cs = std::cos(ang), sn = std::sin(ang);
                const double rp = z[4] - V * I * cs;
                const double rq = z[5] - V * I * sn;
                const double wp = cfg_.alpha_phys * 2.0 * rp * inv_m;
                const double wq = cfg_.alpha_phys * 2.0 * rq * inv_m;
                double dz[telemetry::kChannels];
                dz[0] = wp * (-I * cs) + wq * (-I * sn);
                dz[1] = wp * (-V * cs) + wq * (-V * sn);
                dz[2] = wp * (V * I * sn) + wq * (-V * I * cs);
                dz[3] = wp * (-V * I * sn) + wq * (V * I * cs);
                dz[4] = wp;
                dz[5] = wq;
                for (std::size_t c = 0; c < telemetry::kChannels; ++c)
                    g.at3(n, w, c) += dz[c] * scale[c];
            }
    }
    return g;
}

std::vector<Param*> Model::encoder_params() {
    std::vector<Param*> out;
    for (auto& layer : encoder_)
        for (Param* p : layer->params()) out.push_back(p);
    return out;
}

std::vector<Param*> Model::decoder_params() {
    std::vector<Param*> out;
    for (auto& layer : decoder_)
        for (Param* p : layer->params()) out.push_back(p);
    return out;
}

std::vector<Param*> Model::all_params() {
    std::vector<Param*> out = encoder_params();
    for (Param* p : decoder_params()) out.push_back(p);
    return out;
}

std::vector<BatchNorm*> Model::batchnorms() {
    std::vector<BatchNorm*> out;
    for (auto& layer : encoder_)
        if (auto* bn = dynamic_cast<BatchNorm*>(layer.get())) out.push_back(bn);
    for (auto& layer : decoder_)
        if (auto* bn = dynamic_cast<BatchNorm*>(layer.get())) out.push_back(bn);
    return out;
}

std::vector<const BatchNorm*> Model::batchnorms() const {
    std::vector<const BatchNorm*> out;
    for (const auto& layer : encoder_)
        if (const auto* bn = dynamic_cast<const BatchNorm*>(layer.get())) out.push_back(bn);
    for (const auto& layer : decoder_)
        if (const auto* bn = dynamic_cast<const BatchNorm*>(layer.get())) out.push_back(bn);
    return out;
}

void Model::set_freeze_batchnorm(bool freeze) {
    for (BatchNorm* bn : batchnorms()) bn->set_freeze_stats(freeze);
}

bool Model::batchnorm_ready() const {
    for (const BatchNorm* bn : batchnorms())
        if (!bn->has_stats()) return false;
    return true;
}

Model::Snapshot Model::take_snapshot() {
    Snapshot snap;
    for (Param* p : all_params()) snap.values.push_back(p->value);
    for (BatchNorm* bn : batchnorms()) {
        snap.bn_stats.push_back(bn->running_mean);
        snap.bn_stats.push_back(bn->running_var);
    }
    return snap;
}

void Model::restore_snapshot(const Snapshot& snap) {
    auto params = all_params();
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = snap.values[i];
    auto bns = batchnorms();
    for (std::size_t i = 0; i < bns.size(); ++i) {
        bns[i]->running_mean = snap.bn_stats[2 * i];
        bns[i]->running_var = snap.bn_stats[2 * i + 1];
    }
}

LossBreakdown Model::evaluate_batched(const Tensor& windows) {
    const std::size_t count = windows.dim(0);
    const std::size_t W = windows.dim(1), C = windows.dim(2);
    LossBreakdown acc;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < count; start += cfg_.batch_size) {
        const std::size_t n = std::min(cfg_.batch_size, count - start);
        Tensor batch({n, W, C});
        std::copy_n(windows.data.begin() + static_cast<std::ptrdiff_t>(start * W * C), n * W * C,
                    batch.data.begin());
        Tensor xhat = forward(batch, Mode::Eval);
        LossBreakdown b = loss_total(batch, xhat);
        const double wgt = static_cast<double>(n);
        acc.total += b.total * wgt;
        acc.ae += b.ae * wgt;
        acc.mse += b.mse * wgt;
        acc.reg += b.reg * wgt;
        acc.phy_p += b.phy_p * wgt;
        acc.phy_q += b.phy_q * wgt;
        seen += n;
    }
    const double inv = seen ? 1.0 / static_cast<double>(seen) : 0.0;
    acc.total *= inv;
    acc.ae *= inv;
    acc.mse *= inv;
    acc.reg *= inv;
    acc.phy_p *= inv;
    acc.phy_q *= inv;
    return acc;
}

TrainReport Model::train(const Tensor& train_windows, const Tensor& val_windows) {
    if (train_windows.size() == 0 || train_windows.dim(0) == 0)
        throw DataError("empty training set");
    if (cfg_.physics_enabled && !has_norm_)
        throw UsageError("physics-enabled training requires normalization constants");
    const std::size_t count = train_windows.dim(0);
    const std::size_t W = train_windows.dim(1), C = train_windows.dim(2);

    LrSchedule sched{cfg_.lr_initial, cfg_.lr_decay, cfg_.lr_interval};
    Adam enc_adam(encoder_params(), sched);
    Adam dec_adam(decoder_params(), sched);
    Adam joint_adam(all_params(), sched);

    TrainReport report;
    report.stop_reason = "max_epochs";
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    Snapshot best_snapshot;

    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), 0);

    auto gather = [&](std::size_t start, std::size_t n) {
        Tensor batch({n, W, C});
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t src = order[start + i];
            std::copy_n(train_windows.data.begin() + static_cast<std::ptrdiff_t>(src * W * C), W * C,
                        batch.data.begin() + static_cast<std::ptrdiff_t>(i * W * C));
        }
        return batch;
    };

    // one optimization phase: forward, loss, backprop, L2 on stepped weights, step
    auto run_phase = [&](const Tensor& batch, Adam& adam, std::vector<Param*> stepped,
                         std::size_t epoch) {
        adam.set_schedule_tick(epoch);
        adam.zero_grad();
        Tensor xhat = forward(batch, Mode::Train);
        LossBreakdown loss = loss_total(batch, xhat);
        if (!std::isfinite(loss.total))
            throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
        backward(loss_gradient(batch, xhat));
        for (Param* p : stepped)
            if (p->is_weight)
                for (std::size_t j = 0; j < p->value.size(); ++j)
                    p->grad[j] += cfg_.alpha_data * 2.0 * cfg_.lambda_reg * p->value[j];
        adam.step();
        return loss;
    };

    for (std::size_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
        rng_.shuffle(order);
        EpochRecord rec;
        rec.epoch = epoch;
        double seen = 0.0;
        for (std::size_t start = 0; start < count; start += cfg_.batch_size) {
            const std::size_t n = std::min(cfg_.batch_size, count - start);
            if (n < 2) continue; // batch statistics need at least two samples
            Tensor batch = gather(start, n);
            LossBreakdown loss;
            if (cfg_.alternating) {
                loss = run_phase(batch, enc_adam, encoder_params(), epoch);
                run_phase(batch, dec_adam, decoder_params(), epoch);
            } else {
                loss = run_phase(batch, joint_adam, all_params(), epoch);
            }
            const double wgt = static_cast<double>(n);
            rec.train_total += loss.total * wgt;
            rec.train_ae += loss.ae * wgt;
            rec.train_phy_p += loss.phy_p * wgt;
            rec.train_phy_q += loss.phy_q * wgt;
            seen += wgt;
        }
        if (seen > 0.0) {
            rec.train_total /= seen;
            rec.train_ae /= seen;
            rec.train_phy_p /= seen;
            rec.train_phy_q /= seen;
        }

        LossBreakdown val = evaluate_batched(val_windows);
        rec.val_total = val.total;
        rec.val_ae = val.ae;
        rec.val_phy_p = val.phy_p;
        rec.val_phy_q = val.phy_q;
        report.epochs.push_back(rec);

        if (val.total < best_val) {
            best_val = val.total;
            report.best_epoch = epoch;
            since_best = 0;
            best_snapshot = take_snapshot();
        } else {
            ++since_best;
            if (since_best >= cfg_.patience) {
                report.stop_reason = "patience";
                break;
            }
        }
    }

    if (!report.epochs.empty()) {
        report.best_val_loss = best_val;
        restore_snapshot(best_snapshot);
    }
    return report;
}

// --------------------------------------------------------------- checkpoint

namespace {

void write_bytes(std::ofstream& out, const void* data, std::size_t n) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

template <typename T>
void write_pod(std::ofstream& out, T v) {
    write_bytes(out, &v, sizeof(T));
}

void write_string(std::ofstream& out, const std::string& s) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    write_bytes(out, s.data(), s.size());
}

void write_tensor(std::ofstream& out, const std::string& name, const Tensor& t) {
    write_string(out, name);
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape) write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(d));
    write_bytes(out, t.data.data(), t.data.size() * sizeof(double));
}

void read_bytes(std::ifstream& in, void* data, std::size_t n) {
    in.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) throw DataError("checkpoint truncated");
}

template <typename T>
T read_pod(std::ifstream& in) {
    T v;
    read_bytes(in, &v, sizeof(T));
    return v;
}

std::string read_string(std::ifstream& in) {
    const std::uint32_t len = read_pod<std::uint32_t>(in);
    if (len > (1u << 20)) throw DataError("checkpoint corrupt: oversized string");
    std::string s(len, '\0');
    read_bytes(in, s.data(), len);
    return s;
}

Tensor read_tensor(std::ifstream& in, std::string& name) {
    name = read_string(in);
    const std::uint32_t rank = read_pod<std::uint32_t>(in);
    if (rank > 8) throw DataError("checkpoint corrupt: tensor rank " + std::to_string(rank));
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(read_pod<std::uint64_t>(in));
    Tensor t(shape);
    read_bytes(in, t.data.data(), t.data.size() * sizeof(double));
    return t;
}

} // namespace

void Model::save_checkpoint(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint '" + path + "'");
    write_bytes(out, kMagic, sizeof(kMagic));
    write_pod<std::uint32_t>(out, kFormatVersion);

    json meta;
    meta["config"] = cfg_;
    meta["has_normalization"] = has_norm_;
    meta["channel_min"] = ch_min_;
    meta["channel_max"] = ch_max_;
    std::vector<bool> bn_ready;
    for (const BatchNorm* bn : batchnorms()) bn_ready.push_back(bn->has_stats());
    meta["bn_ready"] = bn_ready;
    write_string(out, meta.dump());

    auto& self = const_cast<Model&>(*this);
    auto params = self.all_params();
    auto bns = self.batchnorms();
    write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(params.size() + 2 * bns.size()));
    for (const Param* p : params) write_tensor(out, p->name, p->value);
    for (const BatchNorm* bn : bns) {
        write_tensor(out, bn->gamma.name + ".running_mean", bn->running_mean);
        write_tensor(out, bn->gamma.name + ".running_var", bn->running_var);
    }
    if (!out) throw DataError("write failed for checkpoint '" + path + "'");
}

Model Model::load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint '" + path + "'");
    char magic[8];
    read_bytes(in, magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw DataError("bad format: '" + path + "' is not a checkpoint");
    const std::uint32_t version = read_pod<std::uint32_t>(in);
    if (version != kFormatVersion)
        throw DataError("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                        std::to_string(kFormatVersion) + ")");

    json meta = json::parse(read_string(in));
    Model model(meta.at("config").get<ModelConfig>());
    if (meta.at("has_normalization").get<bool>()) {
        std::array<double, telemetry::kChannels> mn{}, mx{};
        for (std::size_t c = 0; c < telemetry::kChannels; ++c) {
            mn[c] = meta.at("channel_min")[c];
            mx[c] = meta.at("channel_max")[c];
        }
        model.set_normalization(mn, mx);
    }

    const std::uint64_t tensor_count = read_pod<std::uint64_t>(in);
    std::vector<std::pair<std::string, Tensor>> tensors;
    tensors.reserve(tensor_count);
    for (std::uint64_t i = 0; i < tensor_count; ++i) {
        std::string name;
        Tensor t = read_tensor(in, name);
        tensors.emplace_back(std::move(name), std::move(t));
    }

    auto find = [&tensors, &path](const std::string& name) -> Tensor& {
        for (auto& [n, t] : tensors)
            if (n == name) return t;
        throw DataError("checkpoint '" + path + "' missing tensor '" + name + "'");
    };
    for (Param* p : model.all_params()) {
        Tensor& t = find(p->name);
        if (t.shape != p->value.shape)
            throw DataError("checkpoint tensor '" + p->name + "' shape mismatch: file " +
                            t.shape_str() + " vs model " + p->value.shape_str());
        p->value = t;
        p->grad = Tensor::zeros_like(t);
    }
    auto bns = model.batchnorms();
    const auto& bn_ready = meta.at("bn_ready");
    for (std::size_t i = 0; i < bns.size(); ++i) {
        bns[i]->running_mean = find(bns[i]->gamma.name + ".running_mean");
        bns[i]->running_var = find(bns[i]->gamma.name + ".running_var");
        if (bn_ready[i].get<bool>()) bns[i]->mark_stats_loaded();
    }
    return model;
}

} // namespace pigrid::piconvae

#include "pigrid/scoring.hpp"

#include "pigrid/errors.hpp"

#include <algorithm>
#include <cmath>

namespace pigrid::scoring {

using telemetry::kChannels;

namespace {
constexpr double kDenominatorGuard = 1e-6;
constexpr double kTwoPi = 6.283185307179586476925286766559;

double wrap_angle(double a) { return std::remainder(a, kTwoPi); }
} // namespace

Tensor aggregate_windows(const Tensor& windows_hat, const std::vector<std::size_t>& origin,
                         std::size_t series_len, Aggregation agg) {
    const std::size_t count = windows_hat.dim(0);
    const std::size_t W = windows_hat.dim(1), C = windows_hat.dim(2);
    if (origin.size() != count) throw UsageError("aggregate_windows: origin count mismatch");

    Tensor out({series_len, C});
    if (agg == Aggregation::Mean) {
        std::vector<std::size_t> cover(series_len, 0);
        for (std::size_t k = 0; k < count; ++k) {
            for (std::size_t w = 0; w < W; ++w) {
                const std::size_t t = origin[k] + w;
                if (t >= series_len) throw UsageError("aggregate_windows: window exceeds series");
                ++cover[t];
                for (std::size_t c = 0; c < C; ++c) out.at2(t, c) += windows_hat.at3(k, w, c);
            }
        }
        for (std::size_t t = 0; t < series_len; ++t) {
            if (cover[t] == 0)
                throw UsageError("aggregate_windows: timestep " + std::to_string(t) + " uncovered");
            for (std::size_t c = 0; c < C; ++c) out.at2(t, c) /= static_cast<double>(cover[t]);
        }
        return out;
    }

    std::vector<std::vector<double>> values(series_len * C);
    for (std::size_t k = 0; k < count; ++k)
        for (std::size_t w = 0; w < W; ++w) {
            const std::size_t t = origin[k] + w;
            if (t >= series_len) throw UsageError("aggregate_windows: window exceeds series");
            for (std::size_t c = 0; c < C; ++c) values[t * C + c].push_back(windows_hat.at3(k, w, c));
        }
    for (std::size_t t = 0; t < series_len; ++t)
        for (std::size_t c = 0; c < C; ++c) {
            auto& v = values[t * C + c];
            if (v.empty())
                throw UsageError("aggregate_windows: timestep " + std::to_string(t) + " uncovered");
            std::sort(v.begin(), v.end());
            const std::size_t n = v.size();
            out.at2(t, c) = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
        }
    return out;
}

Tensor pointwise_scores(const Tensor& x, const Tensor& xhat) {
    if (!x.same_shape(xhat))
        throw UsageError("pointwise_scores length mismatch: " + x.shape_str() + " vs " +
                         xhat.shape_str());
    Tensor out = Tensor::zeros_like(x);
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::abs(x[i] - xhat[i]);
    return out;
}

Tensor physics_scores(const std::vector<telemetry::MeasurementFrame>& frames) {
    Tensor out({frames.size(), kChannels});
    for (std::size_t t = 0; t < frames.size(); ++t) {
        const auto& f = frames[t];
        const double ang = f.theta - f.delta;
        const double cs = std::cos(ang), sn = std::sin(ang);

        double v_score = 0.0;
        if (std::abs(f.i * cs) >= kDenominatorGuard) {
            const double d = f.v - f.p / (f.i * cs);
            v_score += d * d;
        }
        if (std::abs(f.i * sn) >= kDenominatorGuard) {
            const double d = f.v - f.q / (f.i * sn);
            v_score += d * d;
        }
        out.at2(t, 0) = v_score;

        double i_score = 0.0;
        if (std::abs(f.v * cs) >= kDenominatorGuard) {
            const double d = f.i - f.p / (f.v * cs);
            i_score += d * d;
        }
        if (std::abs(f.v * sn) >= kDenominatorGuard) {
            const double d = f.i - f.q / (f.v * sn);
            i_score += d * d;
        }
        out.at2(t, 1) = i_score;

        // angle channels: the identities pin theta - delta to atan2(Q, P)
        if (std::hypot(f.p, f.q) >= kDenominatorGuard) {
            const double solved = std::atan2(f.q, f.p);
            const double dt = wrap_angle(f.theta - (f.delta + solved));
            const double dd = wrap_angle(f.delta - (f.theta - solved));
            out.at2(t, 2) = dt * dt;
            out.at2(t, 3) = dd * dd;
        }

        const double rp = f.active_power_residual();
        const double rq = f.reactive_power_residual();
        out.at2(t, 4) = rp * rp;
        out.at2(t, 5) = rq * rq;
    }
    return out;
}

std::vector<double> aggregate_scores(const Tensor& pointwise, const Tensor& physics,
                                     double physics_weight) {
    if (!pointwise.same_shape(physics))
        throw UsageError("aggregate_scores shape mismatch: " + pointwise.shape_str() + " vs " +
                         physics.shape_str());
    const std::size_t len = pointwise.dim(0), C = pointwise.dim(1);
    std::vector<double> out(len);
    for (std::size_t t = 0; t < len; ++t) {
        double best = 0.0;
        for (std::size_t c = 0; c < C; ++c)
            best = std::max(best, pointwise.at2(t, c) + physics_weight * physics.at2(t, c));
        out[t] = best;
    }
    return out;
}

double threshold_from_validation(std::vector<double> scores, double quantile) {
    if (scores.empty()) throw UsageError("threshold_from_validation: empty score set");
    if (quantile < 0.0 || quantile > 1.0) throw UsageError("quantile must be in [0,1]");
    std::sort(scores.begin(), scores.end());
    const double h = static_cast<double>(scores.size() - 1) * quantile;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const double frac = h - static_cast<double>(lo);
    if (lo + 1 >= scores.size()) return scores.back();
    return scores[lo] + frac * (scores[lo + 1] - scores[lo]);
}

std::vector<bool> apply_threshold(const std::vector<double>& scores, double threshold) {
    std::vector<bool> verdicts(scores.size());
    for (std::size_t t = 0; t < scores.size(); ++t) verdicts[t] = scores[t] > threshold;
    return verdicts;
}

Metrics evaluate(const std::vector<bool>& verdicts, const std::vector<bool>& labels) {
    if (verdicts.size() != labels.size())
        throw UsageError("evaluate: verdicts length " + std::to_string(verdicts.size()) +
                         " vs labels length " + std::to_string(labels.size()));
    Metrics m;
    for (std::size_t t = 0; t < verdicts.size(); ++t) {
        if (labels[t])
            verdicts[t] ? ++m.tp : ++m.fn;
        else
            verdicts[t] ? ++m.fp : ++m.tn;
    }
    const std::size_t total = m.tp + m.tn + m.fp + m.fn;
    m.acc = total ? static_cast<double>(m.tp + m.tn) / static_cast<double>(total) : 0.0;

    if (m.tp + m.fp == 0) {
        m.prec_defined = false;
        m.prec = 1.0; // reported as undefined/1.0 flagged
    } else {
        m.prec = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
    }
    if (m.tp + m.fn == 0) {
        m.rec_defined = false;
        m.rec = 1.0;
    } else {
        m.rec = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
    }
    if (!m.prec_defined || !m.rec_defined) {
        m.f1_defined = false;
        m.f1 = 0.0;
    } else if (m.prec + m.rec == 0.0) {
        m.f1 = 0.0;
    } else {
        m.f1 = 2.0 * m.prec * m.rec / (m.prec + m.rec);
    }
    return m;
}

} // namespace pigrid::scoring

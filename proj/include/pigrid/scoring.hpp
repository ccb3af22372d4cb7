#pragma once

#include "pigrid/telemetry.hpp"
#include "pigrid/tensor.hpp"

#include <vector>

namespace pigrid::scoring {

enum class Aggregation { Mean, Median };

// Collapses overlapping-window reconstructions (count, W, 6) to one value per
// timestep per channel (series_len, 6). Every timestep must be covered by at
// least one window.
Tensor aggregate_windows(const Tensor& windows_hat, const std::vector<std::size_t>& origin,
                         std::size_t series_len, Aggregation agg = Aggregation::Mean);

// per-timestep per-channel |x - xhat|, both (len, 6) in normalized space
Tensor pointwise_scores(const Tensor& x, const Tensor& xhat);

// Per-channel Kirchhoff mismatch on physical-unit frames: each channel's
// score compares its value against the one solved from the other channels.
// Terms whose denominator magnitude falls below 1e-6 are dropped.
Tensor physics_scores(const std::vector<telemetry::MeasurementFrame>& frames);

// Per-timestep aggregate: max over channels of (pointwise + w * physics).
// The physics residuals are squared physical-unit mismatches, orders of
// magnitude below the normalized pointwise errors on realistic attacks, so
// they enter with a weight; on consistent data they are ~0 at any weight.
std::vector<double> aggregate_scores(const Tensor& pointwise, const Tensor& physics,
                                     double physics_weight = 1.0);

// order-statistic quantile (linear interpolation) of clean validation scores
double threshold_from_validation(std::vector<double> scores, double quantile);

std::vector<bool> apply_threshold(const std::vector<double>& scores, double threshold);

struct Metrics {
    std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
    double acc = 0.0, prec = 0.0, rec = 0.0, f1 = 0.0;
    bool prec_defined = true, rec_defined = true, f1_defined = true;
};

Metrics evaluate(const std::vector<bool>& verdicts, const std::vector<bool>& labels);

} // namespace pigrid::scoring

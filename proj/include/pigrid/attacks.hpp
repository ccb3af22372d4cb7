#pragma once

#include "pigrid/telemetry.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace pigrid::attacks {

enum class AttackKind { Additive, Deductive, Combined };

const char* kind_name(AttackKind k);
AttackKind kind_from_name(const std::string& name);

enum class TargetMode { Random, Contiguous };

// Multiplicative false-data injection: Z_comp(t) = (1 + alpha(t)) * Z_act(t)
// on one channel of the test region, in physical units. alpha magnitudes are
// drawn in [alpha_min, alpha_max]; sign depends on kind (Combined uses both
// signs in equal proportions). fixed_magnitude >= 0 pins |alpha| to one value
// for sensitivity sweeps.
struct AttackCampaign {
    AttackKind kind = AttackKind::Combined;
    double alpha_min = 0.01;
    double alpha_max = 0.05;
    telemetry::Channel channel = telemetry::Channel::I;
    std::vector<std::size_t> target_indices; // absolute sample indices, inside the test split
    std::uint64_t seed = 1;
    double fixed_magnitude = -1.0; // < 0: draw magnitudes uniformly
};

struct InjectionResult {
    telemetry::SeriesSet series;
    std::vector<bool> labels;         // one per test sample
    std::vector<double> drawn_alphas; // one per target, same order as target_indices
};

InjectionResult inject(const telemetry::SeriesSet& s, const AttackCampaign& campaign);

// distinct sorted indices inside [offset, offset + test_len)
std::vector<std::size_t> schedule_targets(std::size_t test_len, std::size_t count, std::uint64_t seed,
                                          TargetMode mode, std::size_t offset = 0);

// evenly spaced |alpha| levels for sensitivity sweeps
std::vector<double> magnitude_grid(double lo, double hi, std::size_t steps);

} // namespace pigrid::attacks

#include "pigrid/attacks.hpp"

#include "pigrid/errors.hpp"
#include "pigrid/rng.hpp"

#include <algorithm>
#include <numeric>

namespace pigrid::attacks {

const char* kind_name(AttackKind k) {
    switch (k) {
        case AttackKind::Additive: return "additive";
        case AttackKind::Deductive: return "deductive";
        case AttackKind::Combined: return "combined";
    }
    return "?";
}

AttackKind kind_from_name(const std::string& name) {
    if (name == "additive") return AttackKind::Additive;
    if (name == "deductive") return AttackKind::Deductive;
    if (name == "combined") return AttackKind::Combined;
    throw UsageError("unknown attack kind '" + name + "' (expected additive, deductive, combined)");
}

InjectionResult inject(const telemetry::SeriesSet& s, const AttackCampaign& campaign) {
    if (!(campaign.alpha_min > 0.0) || campaign.alpha_min > campaign.alpha_max)
        throw UsageError("attack magnitude bounds must satisfy 0 < alpha_min <= alpha_max");
    if (campaign.fixed_magnitude == 0.0)
        throw UsageError("fixed attack magnitude must be non-zero (alpha = 0 is not an attack)");
    const std::size_t n = s.size();
    for (std::size_t idx : campaign.target_indices)
        if (idx < s.val_end || idx >= n)
            throw UsageError("attack target " + std::to_string(idx) +
                             " outside the test split [" + std::to_string(s.val_end) + "," +
                             std::to_string(n) + "); training data must stay clean");

    const std::size_t count = campaign.target_indices.size();
    Rng rng(campaign.seed);

    // sign per target: Combined is a permuted half/half split (counts differ
    // by at most one when the target count is odd)
    std::vector<double> signs(count, 1.0);
    switch (campaign.kind) {
        case AttackKind::Additive: break;
        case AttackKind::Deductive:
            std::fill(signs.begin(), signs.end(), -1.0);
            break;
        case AttackKind::Combined:
            for (std::size_t i = count / 2; i < count; ++i) signs[i] = -1.0;
            rng.shuffle(signs);
            break;
    }

    InjectionResult result;
    result.series = s;
    result.labels.assign(s.test_len(), false);
    result.drawn_alphas.reserve(count);
    const std::size_t c = static_cast<std::size_t>(campaign.channel);
    for (std::size_t i = 0; i < count; ++i) {
        const double magnitude = campaign.fixed_magnitude > 0.0
                                     ? campaign.fixed_magnitude
                                     : rng.uniform(campaign.alpha_min, campaign.alpha_max);
        const double alpha = signs[i] * magnitude;
        const std::size_t t = campaign.target_indices[i];
        telemetry::MeasurementFrame& f = result.series.frames[t];
        f.set(c, (1.0 + alpha) * f.get(c));
        result.labels[t - s.val_end] = true;
        result.drawn_alphas.push_back(alpha);
    }
    return result;
}

std::vector<std::size_t> schedule_targets(std::size_t test_len, std::size_t count, std::uint64_t seed,
                                          TargetMode mode, std::size_t offset) {
    if (count > test_len)
        throw UsageError("cannot schedule " + std::to_string(count) + " targets in a test region of " +
                         std::to_string(test_len) + " samples");
    std::vector<std::size_t> targets;
    if (count == 0) return targets;
    Rng rng(seed);
    if (mode == TargetMode::Contiguous) {
        const std::size_t start = rng.uniform_index(test_len - count + 1);
        targets.resize(count);
        std::iota(targets.begin(), targets.end(), offset + start);
        return targets;
    }
    // uniform without replacement: partial Fisher-Yates
    std::vector<std::size_t> pool(test_len);
    std::iota(pool.begin(), pool.end(), offset);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + rng.uniform_index(test_len - i);
        std::swap(pool[i], pool[j]);
    }
    targets.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(count));
    std::sort(targets.begin(), targets.end());
    return targets;
}

std::vector<double> magnitude_grid(double lo, double hi, std::size_t steps) {
    if (lo <= 0.0) throw UsageError("magnitude grid lower bound must be positive (alpha = 0 is not an attack)");
    if (hi < lo) throw UsageError("magnitude grid upper bound below lower bound");
    if (steps < 1) throw UsageError("magnitude grid needs at least one step");
    if (steps == 1) {
        if (lo != hi) throw UsageError("single-step magnitude grid requires lo == hi");
        return {lo};
    }
    std::vector<double> grid(steps);
    for (std::size_t k = 0; k < steps; ++k)
        grid[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(steps - 1);
    return grid;
}

} // namespace pigrid::attacks

#pragma once

#include "pigrid/tensor.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace pigrid::telemetry {

inline constexpr std::size_t kChannels = 6;

// channel order matches the CSV schema: t,v,i,theta,delta,p,q
enum class Channel : std::size_t { V = 0, I = 1, Theta = 2, Delta = 3, P = 4, Q = 5 };

const char* channel_name(Channel c);
Channel channel_from_name(const std::string& name);

// One timestamp of one monitored bus, physical (per-unit) values.
struct MeasurementFrame {
    std::int64_t t = 0;
    double v = 0.0;     // voltage magnitude
    double i = 0.0;     // current magnitude
    double theta = 0.0; // voltage angle, radians
    double delta = 0.0; // current angle, radians
    double p = 0.0;     // active power
    double q = 0.0;     // reactive power

    double get(std::size_t c) const;
    void set(std::size_t c, double value);

    double active_power_residual() const;   // p - v*i*cos(theta-delta)
    double reactive_power_residual() const; // q - v*i*sin(theta-delta)
};

struct SeriesSet {
    std::vector<MeasurementFrame> frames;
    std::array<double, kChannels> channel_min{};
    std::array<double, kChannels> channel_max{};
    bool minmax_fitted = false;
    std::size_t train_end = 0; // frames [0, train_end) are training data
    std::size_t val_end = 0;   // frames [train_end, val_end) validation, rest test

    std::size_t size() const { return frames.size(); }
    std::size_t test_len() const { return frames.size() - val_end; }

    // default 75% / 10% / 15%
    void assign_split(double train_frac = 0.75, double val_frac = 0.10);
};

struct LoadProfile {
    double base = 1.5;            // mean consumption, per-unit
    double daily_amplitude = 0.5; // day/night swing
    double phase_minutes = 480.0; // daily peak offset
    double noise_rho = 0.95;      // AR(1) coefficient
    double noise_std = 0.005;
};

struct PvProfile {
    double peak = 0.5;
    double center_hour = 12.5;
    double width_hours = 3.0;
    double noise_std = 0.003;
};

struct WindProfile {
    double mean = 0.3;
    double smoothing = 0.98;
    double noise_std = 0.005;
};

struct GeneratorConfig {
    std::size_t length = 10080; // 1-minute cadence, 7 days
    std::uint64_t seed = 7;
    LoadProfile load;
    PvProfile pv;
    WindProfile wind;
    double base_voltage = 1.0;
};

void to_json(nlohmann::json& j, const GeneratorConfig& c);
void from_json(const nlohmann::json& j, GeneratorConfig& c);

// Synthetic Kirchhoff-consistent telemetry: P and Q are computed from
// V, I, theta, delta, never sampled, so the power identities hold exactly.
SeriesSet generate_synthetic(const GeneratorConfig& cfg);

// Reads the CSV schema `t,v,i,theta,delta,p,q`. Frames whose power identity
// is off by more than 1e-3 are accepted with a warning (real exports carry
// measurement noise); structural problems are hard errors naming row/column.
SeriesSet ingest_csv(const std::string& path, std::vector<std::string>* warnings = nullptr);

void export_csv(const SeriesSet& s, const std::string& path);

// MinMax state is fitted over frames [begin, end); intended use is the
// training split only so test-era statistics never leak into normalization.
void fit_minmax(SeriesSet& s, std::size_t begin, std::size_t end);

SeriesSet apply_minmax(const SeriesSet& s);
SeriesSet invert_minmax(const SeriesSet& s);

struct WindowBatch {
    Tensor windows;                  // (count, window_len, 6)
    std::vector<std::size_t> origin; // start index of each window
    std::size_t window_len = 0;
    std::size_t step = 1;
};

WindowBatch windowize(const SeriesSet& s, std::size_t window_len, std::size_t step);

} // namespace pigrid::telemetry

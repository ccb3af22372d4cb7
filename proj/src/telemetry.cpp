#include "pigrid/telemetry.hpp"

#include "pigrid/errors.hpp"
#include "pigrid/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace pigrid::telemetry {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr std::size_t kMinLength = 16; // shortest usable series (one window)
constexpr double kIngestTolerance = 1e-3;
const char* const kCsvHeader = "t,v,i,theta,delta,p,q";
} // namespace

const char* channel_name(Channel c) {
    switch (c) {
        case Channel::V: return "v";
        case Channel::I: return "i";
        case Channel::Theta: return "theta";
        case Channel::Delta: return "delta";
        case Channel::P: return "p";
        case Channel::Q: return "q";
    }
    return "?";
}

Channel channel_from_name(const std::string& name) {
    for (std::size_t c = 0; c < kChannels; ++c)
        if (name == channel_name(static_cast<Channel>(c))) return static_cast<Channel>(c);
    throw UsageError("unknown channel '" + name + "' (expected v,i,theta,delta,p,q)");
}

double MeasurementFrame::get(std::size_t c) const {
    switch (static_cast<Channel>(c)) {
        case Channel::V: return v;
        case Channel::I: return i;
        case Channel::Theta: return theta;
        case Channel::Delta: return delta;
        case Channel::P: return p;
        case Channel::Q: return q;
    }
    throw UsageError("channel index out of range");
}

void MeasurementFrame::set(std::size_t c, double value) {
    switch (static_cast<Channel>(c)) {
        case Channel::V: v = value; return;
        case Channel::I: i = value; return;
        case Channel::Theta: theta = value; return;
        case Channel::Delta: delta = value; return;
        case Channel::P: p = value; return;
        case Channel::Q: q = value; return;
    }
    throw UsageError("channel index out of range");
}

double MeasurementFrame::active_power_residual() const {
    return p - v * i * std::cos(theta - delta);
}

double MeasurementFrame::reactive_power_residual() const {
    return q - v * i * std::sin(theta - delta);
}

void SeriesSet::assign_split(double train_frac, double val_frac) {
    const std::size_t n = frames.size();
    train_end = static_cast<std::size_t>(std::floor(static_cast<double>(n) * train_frac));
    val_end = static_cast<std::size_t>(std::floor(static_cast<double>(n) * (train_frac + val_frac)));
    if (!(train_end > 0 && train_end < val_end && val_end < n))
        throw DataError("series too short for split: length " + std::to_string(n));
}

void to_json(nlohmann::json& j, const GeneratorConfig& c) {
    j = nlohmann::json{{"length", c.length},
                       {"seed", c.seed},
                       {"base_voltage", c.base_voltage},
                       {"load",
                        {{"base", c.load.base},
                         {"daily_amplitude", c.load.daily_amplitude},
                         {"phase_minutes", c.load.phase_minutes},
                         {"noise_rho", c.load.noise_rho},
                         {"noise_std", c.load.noise_std}}},
                       {"pv",
                        {{"peak", c.pv.peak},
                         {"center_hour", c.pv.center_hour},
                         {"width_hours", c.pv.width_hours},
                         {"noise_std", c.pv.noise_std}}},
                       {"wind",
                        {{"mean", c.wind.mean},
                         {"smoothing", c.wind.smoothing},
                         {"noise_std", c.wind.noise_std}}}};
}

void from_json(const nlohmann::json& j, GeneratorConfig& c) {
    c.length = j.value("length", c.length);
    c.seed = j.value("seed", c.seed);
    c.base_voltage = j.value("base_voltage", c.base_voltage);
    if (j.contains("load")) {
        const auto& l = j.at("load");
        c.load.base = l.value("base", c.load.base);
        c.load.daily_amplitude = l.value("daily_amplitude", c.load.daily_amplitude);
        c.load.phase_minutes = l.value("phase_minutes", c.load.phase_minutes);
        c.load.noise_rho = l.value("noise_rho", c.load.noise_rho);
        c.load.noise_std = l.value("noise_std", c.load.noise_std);
    }
    if (j.contains("pv")) {
        const auto& p = j.at("pv");
        c.pv.peak = p.value("peak", c.pv.peak);
        c.pv.center_hour = p.value("center_hour", c.pv.center_hour);
        c.pv.width_hours = p.value("width_hours", c.pv.width_hours);
        c.pv.noise_std = p.value("noise_std", c.pv.noise_std);
    }
    if (j.contains("wind")) {
        const auto& w = j.at("wind");
        c.wind.mean = w.value("mean", c.wind.mean);
        c.wind.smoothing = w.value("smoothing", c.wind.smoothing);
        c.wind.noise_std = w.value("noise_std", c.wind.noise_std);
    }
}

SeriesSet generate_synthetic(const GeneratorConfig& cfg) {
    if (cfg.length < kMinLength)
        throw UsageError("generator length must be at least " + std::to_string(kMinLength) +
                         ", got " + std::to_string(cfg.length));
    if (cfg.base_voltage <= 0.0) throw UsageError("base_voltage must be positive");
    if (cfg.load.daily_amplitude < 0 || cfg.pv.peak < 0 || cfg.wind.mean < 0)
        throw UsageError("profile amplitudes must be non-negative");

    Rng rng(cfg.seed);
    SeriesSet s;
    s.frames.resize(cfg.length);

    double load_noise = 0.0;
    double wind = cfg.wind.mean;
    for (std::size_t t = 0; t < cfg.length; ++t) {
        const double minute_of_day = static_cast<double>(t % 1440);
        const double hour = minute_of_day / 60.0;

        load_noise = cfg.load.noise_rho * load_noise + cfg.load.noise_std * rng.normal();
        const double load = cfg.load.base +
                            cfg.load.daily_amplitude *
                                std::sin(kTwoPi * (minute_of_day - cfg.load.phase_minutes) / 1440.0) +
                            load_noise;

        const double bell = (hour - cfg.pv.center_hour) / cfg.pv.width_hours;
        double pv = cfg.pv.peak * std::exp(-0.5 * bell * bell) + cfg.pv.noise_std * rng.normal();
        pv = std::max(pv, 0.0);

        wind = cfg.wind.smoothing * wind + (1.0 - cfg.wind.smoothing) * cfg.wind.mean +
               cfg.wind.noise_std * rng.normal();
        wind = std::max(wind, 0.0);

        // net consumption seen by the feeder; kept away from zero so the
        // current magnitude stays positive
        const double net = std::max(load - pv - wind, 0.05);

        // voltage dips linearly with net load around nominal
        const double v = cfg.base_voltage * (1.0 - 0.04 * (net - cfg.load.base) / cfg.load.base);
        // slow voltage-angle swing plus a lagging power-factor angle
        const double theta = 0.05 * std::sin(kTwoPi * minute_of_day / 1440.0 + 0.7);
        const double pf_angle = 0.30 + 0.06 * std::sin(kTwoPi * minute_of_day / 1440.0 + 2.1);
        const double delta = theta - pf_angle;
        const double i = net / (v * std::cos(pf_angle));

        MeasurementFrame& f = s.frames[t];
        f.t = static_cast<std::int64_t>(t);
        f.v = v;
        f.i = i;
        f.theta = theta;
        f.delta = delta;
        // derived, never sampled: the power identities hold exactly
        f.p = v * i * std::cos(theta - delta);
        f.q = v * i * std::sin(theta - delta);
    }
    s.assign_split();
    return s;
}

SeriesSet ingest_csv(const std::string& path, std::vector<std::string>* warnings) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw DataError("'" + path + "': empty file");
    // tolerate trailing carriage return from foreign exports
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kCsvHeader)
        throw DataError("'" + path + "': bad header '" + line + "', expected '" + kCsvHeader + "'");

    static const char* const kColumns[] = {"t", "v", "i", "theta", "delta", "p", "q"};
    SeriesSet s;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        double values[7];
        for (std::size_t col = 0; col < 7; ++col) {
            if (!std::getline(ss, cell, ','))
                throw DataError("'" + path + "' row " + std::to_string(row) + ": missing column '" +
                                kColumns[col] + "'");
            try {
                std::size_t consumed = 0;
                values[col] = std::stod(cell, &consumed);
                while (consumed < cell.size() && std::isspace(static_cast<unsigned char>(cell[consumed])))
                    ++consumed;
                if (consumed != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw DataError("'" + path + "' row " + std::to_string(row) + " column '" +
                                kColumns[col] + "': non-numeric cell '" + cell + "'");
            }
        }
        MeasurementFrame f;
        f.t = static_cast<std::int64_t>(values[0]);
        f.v = values[1];
        f.i = values[2];
        f.theta = values[3];
        f.delta = values[4];
        f.p = values[5];
        f.q = values[6];
        if (warnings) {
            const double rp = std::abs(f.active_power_residual());
            const double rq = std::abs(f.reactive_power_residual());
            if (rp > kIngestTolerance)
                warnings->push_back("row " + std::to_string(row) + ": active power inconsistent by " +
                                    std::to_string(rp));
            if (rq > kIngestTolerance)
                warnings->push_back("row " + std::to_string(row) +
                                    ": reactive power inconsistent by " + std::to_string(rq));
        }
        s.frames.push_back(f);
    }
    if (s.frames.empty()) throw DataError("'" + path + "': no data rows");
    if (s.frames.size() >= kMinLength) s.assign_split();
    return s;
}

void export_csv(const SeriesSet& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << kCsvHeader << "\n";
    char buf[256];
    for (const MeasurementFrame& f : s.frames) {
        // %.17g round-trips doubles exactly
        std::snprintf(buf, sizeof(buf), "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      static_cast<long long>(f.t), f.v, f.i, f.theta, f.delta, f.p, f.q);
        out << buf;
    }
    if (!out) throw DataError("write failed for '" + path + "'");
}

void fit_minmax(SeriesSet& s, std::size_t begin, std::size_t end) {
    if (begin >= end || end > s.frames.size())
        throw UsageError("fit_minmax: empty or out-of-bounds range [" + std::to_string(begin) + "," +
                         std::to_string(end) + ")");
    for (std::size_t c = 0; c < kChannels; ++c) {
        double lo = s.frames[begin].get(c), hi = lo;
        for (std::size_t t = begin + 1; t < end; ++t) {
            const double v = s.frames[t].get(c);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (!(hi > lo))
            throw DataError(std::string("degenerate channel '") +
                            channel_name(static_cast<Channel>(c)) + "': max equals min");
        s.channel_min[c] = lo;
        s.channel_max[c] = hi;
    }
    s.minmax_fitted = true;
}

SeriesSet apply_minmax(const SeriesSet& s) {
    if (!s.minmax_fitted) throw UsageError("apply_minmax: minmax not fitted");
    SeriesSet out = s;
    for (MeasurementFrame& f : out.frames)
        for (std::size_t c = 0; c < kChannels; ++c)
            f.set(c, (f.get(c) - s.channel_min[c]) / (s.channel_max[c] - s.channel_min[c]));
    return out;
}

SeriesSet invert_minmax(const SeriesSet& s) {
    if (!s.minmax_fitted) throw UsageError("invert_minmax: minmax not fitted");
    SeriesSet out = s;
    for (MeasurementFrame& f : out.frames)
        for (std::size_t c = 0; c < kChannels; ++c)
            f.set(c, f.get(c) * (s.channel_max[c] - s.channel_min[c]) + s.channel_min[c]);
    return out;
}

WindowBatch windowize(const SeriesSet& s, std::size_t window_len, std::size_t step) {
    const std::size_t n = s.frames.size();
    if (window_len == 0 || window_len > n)
        throw UsageError("window length " + std::to_string(window_len) +
                         " invalid for series of length " + std::to_string(n));
    if (step < 1) throw UsageError("window step must be >= 1");
    const std::size_t count = (n - window_len) / step + 1;
    WindowBatch batch;
    batch.window_len = window_len;
    batch.step = step;
    batch.windows = Tensor({count, window_len, kChannels});
    batch.origin.resize(count);
    for (std::size_t k = 0; k < count; ++k) {
        const std::size_t start = k * step;
        batch.origin[k] = start;
        for (std::size_t w = 0; w < window_len; ++w)
            for (std::size_t c = 0; c < kChannels; ++c)
                batch.windows.at3(k, w, c) = s.frames[start + w].get(c);
    }
    return batch;
}

} // namespace pigrid::telemetry

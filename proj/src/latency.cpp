#include "rlsim/latency.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace rlsim {

const char* to_string(LatencyKind k) noexcept {
    switch (k) {
        case LatencyKind::constant: return "constant";
        case LatencyKind::truncated_gaussian: return "truncated-gaussian";
        case LatencyKind::lognormal: return "lognormal";
        case LatencyKind::empirical: return "empirical";
    }
    return "unknown";
}

LatencyKind latency_kind_from_string(const std::string& s) {
    if (s == "constant") return LatencyKind::constant;
    if (s == "truncated-gaussian") return LatencyKind::truncated_gaussian;
    if (s == "lognormal") return LatencyKind::lognormal;
    if (s == "empirical") return LatencyKind::empirical;
    throw std::invalid_argument("unknown latency kind: " + s);
}

LatencyModel LatencyModel::make_constant(double value) {
    LatencyModel m;
    m.kind = LatencyKind::constant;
    m.mean = value;
    m.upper = value;
    m.validate();
    return m;
}

LatencyModel LatencyModel::make_truncated_gaussian(double mean, double stddev, double upper) {
    LatencyModel m;
    m.kind = LatencyKind::truncated_gaussian;
    m.mean = mean;
    m.stddev = stddev;
    m.upper = upper;
    m.validate();
    return m;
}

LatencyModel LatencyModel::make_lognormal(double log_mean, double log_stddev, double upper) {
    LatencyModel m;
    m.kind = LatencyKind::lognormal;
    m.mean = log_mean;
    m.stddev = log_stddev;
    m.upper = upper;
    m.validate();
    return m;
}

LatencyModel LatencyModel::make_empirical(std::vector<double> samples) {
    LatencyModel m;
    m.kind = LatencyKind::empirical;
    m.samples = std::move(samples);
    m.upper = m.samples.empty() ? 0.0 : *std::max_element(m.samples.begin(), m.samples.end());
    m.validate();
    return m;
}

void LatencyModel::validate() const {
    switch (kind) {
        case LatencyKind::constant:
            if (mean < 0.0) throw std::invalid_argument("constant latency must be >= 0");
            break;
        case LatencyKind::truncated_gaussian:
            if (stddev < 0.0) throw std::invalid_argument("latency stddev must be >= 0");
            if (upper <= 0.0) throw std::invalid_argument("latency upper bound must be > 0");
            break;
        case LatencyKind::lognormal:
            if (stddev < 0.0) throw std::invalid_argument("latency stddev must be >= 0");
            if (upper <= 0.0) throw std::invalid_argument("latency upper bound must be > 0");
            break;
        case LatencyKind::empirical:
            if (samples.empty()) throw std::invalid_argument("empirical latency model needs at least one sample");
            for (double v : samples) {
                if (!(v >= 0.0) || !std::isfinite(v)) {
                    throw std::invalid_argument("empirical latency samples must be finite and >= 0");
                }
            }
            break;
    }
}

LatencyModel load_empirical_latencies(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open latency file: " + path);
    std::vector<double> vals;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        vals.push_back(std::stod(line));
    }
    return LatencyModel::make_empirical(std::move(vals));
}

namespace {

// Draw from `raw` until the value lands in [0, upper]; clamp after 100 tries.
template <typename F>
Time bounded_draw(double upper, F&& raw) {
    double v = 0.0;
    for (int i = 0; i < 100; ++i) {
        v = raw();
        if (v >= 0.0 && v <= upper) return v;
    }
    return std::clamp(v, 0.0, upper);
}

}  // namespace

Time sample_latency(const LatencyModel& model, RngStream& rng) {
    model.validate();
    switch (model.kind) {
        case LatencyKind::constant:
            return model.mean;
        case LatencyKind::truncated_gaussian:
            if (model.stddev == 0.0) return std::clamp(model.mean, 0.0, model.upper);
            return bounded_draw(model.upper, [&] { return rng.normal(model.mean, model.stddev); });
        case LatencyKind::lognormal:
            if (model.stddev == 0.0) return std::clamp(std::exp(model.mean), 0.0, model.upper);
            return bounded_draw(model.upper, [&] { return std::exp(rng.normal(model.mean, model.stddev)); });
        case LatencyKind::empirical:
            return model.samples[rng.below(model.samples.size())];
    }
    throw std::logic_error("unreachable latency kind");
}

}  // namespace rlsim

#pragma once

#include <string>
#include <vector>

#include "rlsim/engine.hpp"
#include "rlsim/rng.hpp"

namespace rlsim {

enum class LatencyKind : std::uint8_t {
    constant,
    truncated_gaussian,
    lognormal,
    empirical,
};

const char* to_string(LatencyKind k) noexcept;
LatencyKind latency_kind_from_string(const std::string& s);

// Parametric service-time distribution. Every draw lies in [0, upper].
//
// For truncated_gaussian, (mean, stddev) are the pre-truncation normal
// parameters; the realized mean after truncation is higher when mass below 0
// is cut. For lognormal, (mean, stddev) parametrize the underlying normal in
// log space, so the median is exp(mean).
struct LatencyModel {
    LatencyKind kind = LatencyKind::constant;
    double mean = 0.0;
    double stddev = 0.0;
    double upper = 0.0;                 // hard bound L; draws never exceed it
    std::vector<double> samples;        // empirical only

    static LatencyModel make_constant(double value);
    static LatencyModel make_truncated_gaussian(double mean, double stddev, double upper);
    static LatencyModel make_lognormal(double log_mean, double log_stddev, double upper);
    static LatencyModel make_empirical(std::vector<double> samples);

    // Throws std::invalid_argument describing the offending parameter.
    void validate() const;
};

// Loads one latency value per line (blank lines ignored).
LatencyModel load_empirical_latencies(const std::string& path);

// One draw from the model. Bounded distributions use rejection sampling with
// a cap of 100 attempts, then clamp into [0, upper].
Time sample_latency(const LatencyModel& model, RngStream& rng);

}  // namespace rlsim

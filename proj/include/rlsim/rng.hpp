#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace rlsim {

// Identifies one independent random stream: (seed, stream) pairs that differ
// in either field produce unrelated draw sequences.
struct SeedState {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
};

// splitmix64 finalizer; used for seed mixing and sub-stream derivation.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t mix64(std::uint64_t a, std::uint64_t b) noexcept {
    return mix64(mix64(a) ^ b);
}

constexpr std::uint64_t mix64(std::uint64_t a, std::uint64_t b, std::uint64_t c) noexcept {
    return mix64(mix64(a, b) ^ c);
}

// FNV-1a, for naming streams after components ("gen-task", "env", ...).
constexpr std::uint64_t stream_id(std::string_view name) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char ch : name) {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Deterministic draw source for one stream. All distributions are implemented
// on top of the raw 64-bit output so replays are bit-identical everywhere.
class RngStream {
public:
    RngStream() : RngStream(SeedState{}) {}
    explicit RngStream(SeedState s) : state_(s), gen_(mix64(s.seed, s.stream)) {}
    RngStream(std::uint64_t seed, std::uint64_t stream) : RngStream(SeedState{seed, stream}) {}
    RngStream(std::uint64_t seed, std::string_view name) : RngStream(SeedState{seed, stream_id(name)}) {}

    const SeedState& state() const noexcept { return state_; }

    // Derive an independent child stream, e.g. one per task index.
    RngStream substream(std::uint64_t idx) const {
        return RngStream(SeedState{state_.seed, mix64(state_.stream, idx)});
    }
    RngStream substream(std::string_view name, std::uint64_t idx) const {
        return RngStream(SeedState{state_.seed, mix64(state_.stream, stream_id(name), idx)});
    }

    std::uint64_t next_u64() { return gen_(); }

    // Uniform on [0, 1) with 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1]; safe as a log() argument.
    double uniform01_open_low() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Standard normal via Box-Muller. Consumes two uniforms per draw and keeps
    // no cached state, so draw sequences are position-independent.
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    bool bernoulli(double p) { return uniform01() < p; }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

private:
    SeedState state_;
    std::mt19937_64 gen_;
};

}  // namespace rlsim

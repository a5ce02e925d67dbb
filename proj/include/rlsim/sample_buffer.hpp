#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <vector>

#include "rlsim/engine.hpp"

namespace rlsim {

using PolicyVersion = std::int64_t;

// One completed trajectory as the trainer sees it.
struct Sample {
    std::uint64_t id = 0;
    std::uint64_t prompt = 0;
    PolicyVersion init_version = 0;    // policy that initiated generation
    PolicyVersion finish_version = 0;  // policy current when generation ended
    double reward = 0.0;
    std::vector<int> tokens;
    Time generation_latency = 0.0;
};

// FIFO staleness-bounded sample queue. Capacity is floor((1+alpha)*B) counting
// both held samples and in-flight generations; the version gap allowed at
// consumption is ceil(alpha).
class SampleBuffer {
public:
    SampleBuffer(std::uint64_t batch_size, double async_ratio);

    std::uint64_t capacity() const noexcept { return capacity_; }
    std::uint64_t size() const noexcept { return held_.size(); }
    PolicyVersion version_gap() const noexcept { return version_gap_; }

    // Admission gate: a producer may start a new generation only while held
    // plus in-flight samples stay below capacity.
    bool admit_allowed(std::uint64_t in_flight) const noexcept {
        return held_.size() + in_flight < capacity_;
    }

    // Enqueue a finished sample; returns false (and drops it) when the sample
    // is already staler than the gap allows.
    bool put(Sample s, PolicyVersion current_version);

    bool can_get(std::uint64_t batch) const noexcept { return held_.size() >= batch; }

    // Oldest-first batch; records the staleness of every consumed sample.
    std::vector<Sample> get_batch(std::uint64_t batch, PolicyVersion consumer_version);

    // Removes samples whose initiating version fell behind current - gap.
    // Returns the evicted samples so the caller can account the waste.
    std::vector<Sample> evict_stale(PolicyVersion current_version);

    // Bookkeeping for the run-level invariants.
    std::uint64_t occupancy_high_water() const noexcept { return high_water_; }
    std::uint64_t staleness_violations() const noexcept { return violations_; }
    std::uint64_t dropped_on_put() const noexcept { return dropped_; }
    const std::map<PolicyVersion, std::uint64_t>& staleness_histogram() const noexcept {
        return staleness_hist_;
    }

private:
    std::uint64_t capacity_;
    PolicyVersion version_gap_;
    std::deque<Sample> held_;
    std::uint64_t high_water_ = 0;
    std::uint64_t violations_ = 0;
    std::uint64_t dropped_ = 0;
    std::map<PolicyVersion, std::uint64_t> staleness_hist_;
};

}  // namespace rlsim

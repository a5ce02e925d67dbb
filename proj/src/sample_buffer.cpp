#include "rlsim/sample_buffer.hpp"

#include <cmath>
#include <stdexcept>

namespace rlsim {

SampleBuffer::SampleBuffer(std::uint64_t batch_size, double async_ratio) {
    if (batch_size == 0) throw std::invalid_argument("SampleBuffer: batch_size must be >= 1");
    if (async_ratio < 0.0) throw std::invalid_argument("SampleBuffer: async_ratio must be >= 0");
    capacity_ = static_cast<std::uint64_t>(std::floor((1.0 + async_ratio) * static_cast<double>(batch_size)));
    version_gap_ = static_cast<PolicyVersion>(std::ceil(async_ratio));
}

bool SampleBuffer::put(Sample s, PolicyVersion current_version) {
    if (current_version - s.init_version > version_gap_) {
        ++dropped_;
        return false;
    }
    held_.push_back(std::move(s));
    if (held_.size() > capacity_) ++violations_;
    high_water_ = std::max<std::uint64_t>(high_water_, held_.size());
    return true;
}

std::vector<Sample> SampleBuffer::get_batch(std::uint64_t batch, PolicyVersion consumer_version) {
    if (held_.size() < batch) {
        throw std::logic_error("SampleBuffer::get_batch: fewer samples than requested");
    }
    std::vector<Sample> out;
    out.reserve(batch);
    for (std::uint64_t i = 0; i < batch; ++i) {
        Sample s = std::move(held_.front());
        held_.pop_front();
        const PolicyVersion staleness = consumer_version - s.init_version;
        ++staleness_hist_[staleness];
        if (staleness > version_gap_ || staleness < 0) ++violations_;
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<Sample> SampleBuffer::evict_stale(PolicyVersion current_version) {
    std::vector<Sample> evicted;
    // FIFO order means stale samples sit at the front, but a conservative
    // full scan keeps the contract independent of insertion discipline.
    std::deque<Sample> kept;
    for (auto& s : held_) {
        if (current_version - s.init_version > version_gap_) {
            evicted.push_back(std::move(s));
        } else {
            kept.push_back(std::move(s));
        }
    }
    held_ = std::move(kept);
    return evicted;
}

}  // namespace rlsim

#pragma once

#include "rlsim/trace.hpp"
#include "rlsim/workload.hpp"

namespace rlsim {

// Over-provisioned environment rollout: more episodes are admitted than the
// batch needs, and collection stops at the target trajectory count.
struct RedundancyPlan {
    std::uint32_t num_env_groups = 1;
    std::uint32_t group_size = 1;
    std::uint64_t rollout_batch_size = 1;  // trajectories to collect (B)

    std::uint64_t total_slots() const noexcept {
        return static_cast<std::uint64_t>(num_env_groups) * group_size;
    }
    void validate() const;
};

struct AdmissionSchedule {
    std::uint64_t episodes = 0;   // admitted up front, one per environment slot
    std::uint64_t target = 0;     // stop once this many trajectories exist
    std::uint64_t surplus = 0;    // episodes beyond the target (abortable)
};

// Validates the plan and lays out the admissions. Throws when the plan cannot
// cover the batch.
AdmissionSchedule plan_redundant_envs(const RedundancyPlan& plan);

struct RedundancyResult {
    Time makespan = 0.0;                  // when the B-th trajectory landed
    std::uint64_t collected = 0;
    std::uint64_t failed_episodes = 0;    // fail-stops observed
    std::uint64_t aborted_episodes = 0;   // still running at the stop
    std::uint64_t completed_episodes = 0; // finished, collected or not
    bool incomplete = false;
};

// Runs the plan: every slot cycles episodes back to back (fail-stopped
// episodes burn their timeout and restart), first-completed trajectories are
// collected, and everything still running at the target is aborted.
// `think_time` charges an optional per-step action-generation latency.
RedundancyResult run_redundant_rollout(const RedundancyPlan& plan, const EnvProfile& env,
                                       const RngStream& rng,
                                       const LatencyModel& think_time = LatencyModel::make_constant(0.0));

}  // namespace rlsim

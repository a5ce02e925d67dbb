#pragma once

#include <cstdint>
#include <vector>

#include "rlsim/latency.hpp"

namespace rlsim {

using PromptId = std::uint64_t;
using TaskId = std::uint64_t;

enum class TaskState : std::uint8_t { pending, running, aborted, done };

// One unit of generation work: a single response for one prompt replica.
struct RolloutTask {
    TaskId id = 0;
    PromptId prompt = 0;
    std::uint32_t replica = 0;          // k of n
    std::int64_t init_version = 0;      // policy version at admission
    Time service_time = 0.0;            // drawn once, at admission
    TaskState state = TaskState::pending;
    double completed_fraction = 0.0;    // of service_time, for resumed aborts
};

// Expands each prompt into `replicas` independent single-response tasks.
// Service times come from a per-prompt substream, so reordering the prompt
// list never changes which values a given prompt receives.
std::vector<RolloutTask> make_tasks(const std::vector<PromptId>& prompts, std::uint32_t replicas,
                                    std::int64_t version, const LatencyModel& model, const RngStream& rng);

// Stochastic environment behaviour for agentic rollouts.
struct EnvProfile {
    LatencyModel step_latency;
    std::uint32_t max_steps = 1;
    double terminal_prob = 0.0;         // per-step chance of early natural termination
    double fail_slow_prob = 0.0;        // per-step
    double fail_slow_multiplier = 1.0;
    double fail_stop_prob = 0.0;        // per-episode, decided at the first step
    Time fail_stop_timeout = 0.0;

    void validate() const;
};

struct EpisodeState {
    std::uint32_t steps_taken = 0;
    bool done = false;
    bool failed = false;
};

struct EnvStepResult {
    Time latency = 0.0;
    bool done = false;
    bool failed = false;
};

// Advances one environment interaction. A fail-stop fires only on the first
// step and consumes the timeout without ever producing a trajectory.
EnvStepResult env_step(const EnvProfile& env, EpisodeState& episode, RngStream& rng);

}  // namespace rlsim

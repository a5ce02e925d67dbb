#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rlsim/workload.hpp"

namespace rlsim {

// Final status of one task in a rollout trace.
enum class TaskOutcome : std::uint8_t { accepted, rejected, aborted, pending };

const char* to_string(TaskOutcome s) noexcept;

struct TaskRecord {
    TaskId task = 0;
    PromptId prompt = 0;
    std::uint32_t replica = 0;
    Time start = 0.0;
    Time finish = 0.0;           // generation finish (or abort time)
    int worker = -1;             // flat slot index; -1 if never started
    TaskOutcome outcome = TaskOutcome::pending;
};

// Everything a rollout-stage simulation reports.
struct RolloutTrace {
    Time makespan = 0.0;
    std::vector<TaskRecord> tasks;
    double idle_fraction = 0.0;          // of slot-seconds over [0, makespan]
    std::uint64_t accepted_groups = 0;
    std::uint64_t rejected_groups = 0;
    std::uint64_t accepted_samples = 0;
    std::uint64_t wasted_samples = 0;    // started but aborted or rejected
    Time wasted_seconds = 0.0;           // generation seconds outside accepted groups
    Time reward_overlap_seconds = 0.0;   // reward time overlapping generation
    bool incomplete = false;             // target unreachable

    // Realized service-time moments of the admitted tasks; the inputs to the
    // realized-moment completion bound.
    double realized_mean = 0.0;
    double realized_max = 0.0;
    std::uint64_t admitted_tasks = 0;

    // One row per task: task, prompt, replica, start, finish, worker, status.
    std::string to_dsv(char delim = ',') const;
};

}  // namespace rlsim

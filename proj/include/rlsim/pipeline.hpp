#pragma once

#include <map>
#include <optional>
#include <string>

#include "rlsim/sample_buffer.hpp"
#include "rlsim/workload.hpp"

namespace rlsim {

// Configuration of one end-to-end training run (sync or async).
struct PipelineConfig {
    int workers = 2;                 // K, total budget
    int slots_per_worker = 1;        // generation-side slots per worker
    bool sync_mode = false;          // all K workers serve both phases sequentially
    double train_share = 0.5;        // beta: fraction of K that trains (async)
    double async_ratio = 0.0;        // alpha
    std::uint64_t batch_size = 1;    // B, samples per training step
    std::uint32_t reuse = 1;         // E, passes per sample
    std::uint64_t num_steps = 1;     // training steps to simulate

    LatencyModel generation = LatencyModel::make_constant(1.0);
    LatencyModel train_cost = LatencyModel::make_constant(0.0);  // per sample-pass
    Time model_update_cost = 0.0;

    // Staleness handling beyond admission throttling: abort stale in-flight
    // generations at each update, optionally resuming the unfinished part
    // under the new version.
    bool abort_in_flight_on_update = false;
    bool resume_partial_rollouts = false;

    // Agentic mode: producers run environment episodes instead of one-shot
    // generations. env_level_async releases a generation slot during env
    // waits; otherwise the slot is held for the whole episode.
    std::optional<EnvProfile> env;
    LatencyModel think_time = LatencyModel::make_constant(0.0);  // per-action gen latency
    std::uint32_t num_envs = 0;      // concurrent environments; 0 -> batch_size
    bool env_level_async = true;

    std::uint64_t seed = 0;

    void validate() const;
};

struct StepRecord {
    std::uint64_t step = 0;
    Time step_time = 0.0;        // update-complete to update-complete
    Time gen_span = 0.0;         // sync: rollout makespan; async: batch wait
    Time train_span = 0.0;       // training compute + model update
    double infer_idle_fraction = 0.0;  // of generation slot-seconds this step
    double train_idle_fraction = 0.0;
    double staleness_mean = 0.0;
    PolicyVersion staleness_max = 0;
};

struct RunMetrics {
    std::vector<StepRecord> steps;
    Time total_time = 0.0;
    double throughput = 0.0;            // consumed samples per second
    double infer_idle_fraction = 0.0;
    double train_idle_fraction = 0.0;
    std::map<PolicyVersion, std::uint64_t> staleness_histogram;
    Time wasted_generation_seconds = 0.0;
    std::uint64_t wasted_samples = 0;
    std::uint64_t consumed_samples = 0;
    std::uint64_t generated_samples = 0;

    // Invariant bookkeeping (expected: zero violations, occupancy <= capacity).
    std::uint64_t buffer_capacity = 0;
    std::uint64_t buffer_high_water = 0;
    std::uint64_t staleness_violations = 0;

    // Realized generation-time moments, for the realized-moment bounds.
    double realized_gen_mean = 0.0;
    double realized_gen_max = 0.0;

    double mean_step_time() const;
    // Mean over steps after a short warmup; steady-state comparisons use this.
    double steady_step_time() const;

    // One JSON object per training step, stable field order.
    std::string steps_jsonl() const;
    std::string summary_json() const;
};

// Synchronous baseline: per step, a full queue-scheduled rollout of B samples
// on all K workers, then E passes of training on all K workers, no overlap.
// Computed directly (no event engine); the async engine must reproduce it
// exactly when run with sync_mode set.
RunMetrics run_sync(const PipelineConfig& config);

// Decoupled pipeline: (1-beta)K workers generate continuously under the
// buffer admission rule while beta*K workers train. With sync_mode set, the
// same engine emulates the synchronous schedule (merged pools, alpha = 0,
// producers suspended from get_batch to update completion).
RunMetrics run_async(const PipelineConfig& config);

// Standalone rollout-stage comparison for agentic workloads.
enum class EnvRolloutMode : std::uint8_t {
    turn_barrier,  // all episodes advance in lock-step turns (batched rollout)
    slot_hold,     // an episode holds its generation slot across env waits
    env_async,     // slots are released during env waits (fine-grained)
};

struct EnvAsyncConfig {
    std::uint64_t batch = 1;        // trajectories per step
    std::uint32_t num_envs = 0;     // concurrent environments; 0 -> batch
    int gen_slots = 1;
    LatencyModel think_time = LatencyModel::make_constant(0.0);
    EnvProfile env;
    EnvRolloutMode mode = EnvRolloutMode::env_async;
    // env_async streams episodes; the step time is measured over a window
    // after a warmup, both in units of `batch` trajectories.
    std::uint64_t warm_batches = 1;
    std::uint64_t measure_batches = 1;
    std::uint64_t seed = 0;
};

struct EnvAsyncResult {
    Time step_time = 0.0;             // time to collect one batch of trajectories
    std::uint64_t trajectories = 0;
    std::uint64_t failed_episodes = 0;
    double gen_slot_utilization = 0.0;
};

EnvAsyncResult run_env_rollout(const EnvAsyncConfig& config);

}  // namespace rlsim

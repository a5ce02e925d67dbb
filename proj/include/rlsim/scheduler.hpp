#pragma once

#include <optional>

#include "rlsim/trace.hpp"

namespace rlsim {

enum class WorkerRole : std::uint8_t { infer, train };

// A pool of identical workers; each worker exposes `slots` independent
// execution slots (slots > 1 approximates continuous batching).
struct WorkerPool {
    WorkerRole role = WorkerRole::infer;
    int count = 1;
    int slots = 1;

    int total_slots() const noexcept { return count * slots; }
    void validate() const;
};

enum class FilterPredicate : std::uint8_t { none, zero_variance_reject };

// Group acceptance policy for queue scheduling with dynamic filtering.
struct FilterRule {
    std::uint32_t group_size = 1;                  // responses per prompt (G)
    FilterPredicate predicate = FilterPredicate::none;
    std::uint64_t target_groups = 1;               // accepted groups needed (B)
    std::uint64_t max_additional_running_prompts = 0;

    void validate() const;
};

// Synthetic reward values, used only by the zero-variance filter.
struct RewardValueModel {
    enum class Kind : std::uint8_t {
        constant,                    // every response scores `value`
        bernoulli_fixed,             // success with probability `value`
        bernoulli_uniform_difficulty // per-prompt success rate drawn U(0,1)
    };
    Kind kind = Kind::bernoulli_uniform_difficulty;
    double value = 0.5;
    int workers = 0;                 // reward-worker pool size; 0 = unbounded
};

// Batched rollout baseline: tasks run greedily on idle slots, but reward
// evaluation for the whole batch starts only after the last generation
// finishes. The straggler gates everything.
RolloutTrace run_batch_rollout(const std::vector<RolloutTask>& tasks, const WorkerPool& pool,
                               const LatencyModel& reward_latency, const RngStream& rng,
                               const RewardValueModel& rewards = {});

// Queue scheduling over prompt groups with dynamic filtering: every response
// is an independent task, rewards overlap generation, additional prompt
// groups beyond the target are admitted while acceptances are short, and the
// rollout stops the instant `target_groups` groups are accepted.
RolloutTrace run_queue_scheduling(const std::vector<PromptId>& prompts, const FilterRule& rule,
                                  const WorkerPool& pool, const LatencyModel& gen_model,
                                  const LatencyModel& reward_latency, const RngStream& rng,
                                  const RewardValueModel& rewards = {});

// Same scheduler over pre-built tasks (service times already drawn); used by
// tests that need exact control over the task multiset.
RolloutTrace run_queue_scheduling_tasks(std::vector<RolloutTask> tasks, const FilterRule& rule,
                                        const WorkerPool& pool, const LatencyModel& reward_latency,
                                        const RngStream& rng, const RewardValueModel& rewards = {});

// Baseline without prompt replication: all `replicas` responses of a prompt
// decode together on a single worker, which is held until the slowest one
// finishes. Prompt replication is modelled by expanding the same prompts into
// independent tasks and running them through run_batch_rollout instead.
RolloutTrace run_grouped_rollout(const std::vector<PromptId>& prompts, std::uint32_t replicas,
                                 const WorkerPool& pool, const LatencyModel& gen_model,
                                 const RngStream& rng);

}  // namespace rlsim

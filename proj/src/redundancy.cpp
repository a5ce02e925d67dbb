#include "rlsim/redundancy.hpp"

#include <stdexcept>

#include "rlsim/engine.hpp"

namespace rlsim {

void RedundancyPlan::validate() const {
    if (num_env_groups == 0 || group_size == 0) {
        throw std::invalid_argument("RedundancyPlan: num_env_groups and group_size must be >= 1");
    }
    if (rollout_batch_size == 0) {
        throw std::invalid_argument("RedundancyPlan: rollout_batch_size must be >= 1");
    }
    if (total_slots() < rollout_batch_size) {
        throw std::invalid_argument(
            "RedundancyPlan: num_env_groups * group_size must be >= rollout_batch_size");
    }
}

AdmissionSchedule plan_redundant_envs(const RedundancyPlan& plan) {
    plan.validate();
    AdmissionSchedule s;
    s.episodes = plan.total_slots();
    s.target = plan.rollout_batch_size;
    s.surplus = s.episodes - s.target;
    return s;
}

namespace {

struct EpisodeDraw {
    Time duration = 0.0;
    bool failed = false;
};

// Episode durations are drawn whole when the episode launches; nothing
// interacts with a running episode. The rng substream is keyed by the slot's
// stable (group, member) identity and the episode ordinal on that slot, so
// growing either plan axis never perturbs existing slots.
EpisodeDraw draw_episode(const EnvProfile& env, const LatencyModel& think_time,
                         const RngStream& rng, std::uint64_t slot_key, std::uint64_t ordinal) {
    RngStream er = rng.substream("episode", mix64(slot_key, ordinal));
    EpisodeDraw d;
    EpisodeState ep;
    while (!ep.done && !ep.failed) {
        d.duration += sample_latency(think_time, er);
        const EnvStepResult step = env_step(env, ep, er);
        d.duration += step.latency;
        d.failed = step.failed;
    }
    return d;
}

}  // namespace

RedundancyResult run_redundant_rollout(const RedundancyPlan& plan, const EnvProfile& env,
                                       const RngStream& rng, const LatencyModel& think_time) {
    const AdmissionSchedule schedule = plan_redundant_envs(plan);
    env.validate();

    Engine engine;
    RedundancyResult res;
    std::uint64_t running = 0;

    struct Slot {
        std::uint64_t key = 0;
        std::uint64_t ordinal = 0;
    };
    std::vector<Slot> slots;
    slots.reserve(schedule.episodes);
    for (std::uint32_t g = 0; g < plan.num_env_groups; ++g) {
        for (std::uint32_t m = 0; m < plan.group_size; ++m) {
            slots.push_back(Slot{mix64(g, m), 0});
        }
    }

    // One episode per slot; a fail-stopped episode burns its timeout and the
    // slot retries with a fresh one. Successful slots idle after delivering
    // their trajectory. The per-slot cap bounds the run when every episode
    // fail-stops.
    constexpr std::uint64_t kMaxEpisodesPerSlot = 1000;
    std::function<void(std::size_t)> launch = [&](std::size_t idx) {
        Slot& slot = slots[idx];
        if (slot.ordinal >= kMaxEpisodesPerSlot) return;
        const EpisodeDraw d = draw_episode(env, think_time, rng, slot.key, slot.ordinal++);
        ++running;
        engine.schedule(engine.now() + d.duration, EventKind::env_step_finish, idx, [&, idx, d] {
            --running;
            if (d.failed) {
                ++res.failed_episodes;
                launch(idx);  // retry
                return;
            }
            ++res.completed_episodes;
            if (res.collected < schedule.target) ++res.collected;
        });
    };
    for (std::size_t i = 0; i < slots.size(); ++i) launch(i);

    engine.run_until(StopCondition::when([&] { return res.collected >= schedule.target; }));
    res.makespan = engine.now();
    res.aborted_episodes = running;
    res.incomplete = res.collected < schedule.target;
    return res;
}

}  // namespace rlsim

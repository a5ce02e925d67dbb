#include "rlsim/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <queue>
#include <set>
#include <stdexcept>

#include "rlsim/engine.hpp"

namespace rlsim {

void WorkerPool::validate() const {
    if (count < 1) throw std::invalid_argument("WorkerPool: count must be >= 1");
    if (slots < 1) throw std::invalid_argument("WorkerPool: slots must be >= 1");
}

void FilterRule::validate() const {
    if (group_size == 0) throw std::invalid_argument("FilterRule: group_size must be >= 1");
    if (target_groups == 0) throw std::invalid_argument("FilterRule: target_groups must be >= 1");
}

namespace {

double reward_value(const RewardValueModel& model, PromptId prompt, std::uint32_t replica,
                    const RngStream& rng) {
    switch (model.kind) {
        case RewardValueModel::Kind::constant:
            return model.value;
        case RewardValueModel::Kind::bernoulli_fixed: {
            RngStream r = rng.substream("reward-value", mix64(prompt, replica));
            return r.bernoulli(model.value) ? 1.0 : 0.0;
        }
        case RewardValueModel::Kind::bernoulli_uniform_difficulty: {
            RngStream d = rng.substream("difficulty", prompt);
            const double p = d.uniform01();
            RngStream r = rng.substream("reward-value", mix64(prompt, replica));
            return r.bernoulli(p) ? 1.0 : 0.0;
        }
    }
    return 0.0;
}

bool group_has_variance(const std::vector<double>& rewards) {
    for (std::size_t i = 1; i < rewards.size(); ++i) {
        if (rewards[i] != rewards[0]) return true;
    }
    return false;
}

}  // namespace

RolloutTrace run_batch_rollout(const std::vector<RolloutTask>& tasks, const WorkerPool& pool,
                               const LatencyModel& reward_latency, const RngStream& rng,
                               const RewardValueModel& rewards) {
    pool.validate();
    RolloutTrace trace;
    if (tasks.empty()) return trace;

    const int slots = pool.total_slots();
    // Greedy list assignment: each task goes to the slot that frees first.
    using SlotTime = std::pair<Time, int>;  // (free-at, slot)
    std::priority_queue<SlotTime, std::vector<SlotTime>, std::greater<>> free_at;
    for (int s = 0; s < slots; ++s) free_at.push({0.0, s});

    Time last_gen = 0.0;
    double busy = 0.0;
    double sum = 0.0, mx = 0.0;
    trace.tasks.reserve(tasks.size());
    for (const auto& task : tasks) {
        auto [t, slot] = free_at.top();
        free_at.pop();
        TaskRecord rec;
        rec.task = task.id;
        rec.prompt = task.prompt;
        rec.replica = task.replica;
        rec.start = t;
        rec.finish = t + task.service_time;
        rec.worker = slot;
        rec.outcome = TaskOutcome::accepted;
        free_at.push({rec.finish, slot});
        last_gen = std::max(last_gen, rec.finish);
        busy += task.service_time;
        sum += task.service_time;
        mx = std::max(mx, task.service_time);
        trace.tasks.push_back(rec);
    }

    // Reward for the whole batch starts only after the final generation. With
    // an unbounded reward pool the phase lasts as long as its slowest draw;
    // with a finite pool the draws are list-scheduled over the reward workers.
    std::vector<Time> reward_times;
    reward_times.reserve(tasks.size());
    for (const auto& task : tasks) {
        RngStream rrng = rng.substream("reward-latency", mix64(task.prompt, task.replica));
        reward_times.push_back(sample_latency(reward_latency, rrng));
    }
    Time reward_done = last_gen;
    if (rewards.workers <= 0) {
        for (Time t : reward_times) reward_done = std::max(reward_done, last_gen + t);
    } else {
        std::priority_queue<Time, std::vector<Time>, std::greater<>> rfree;
        for (int s = 0; s < rewards.workers; ++s) rfree.push(last_gen);
        for (Time t : reward_times) {
            const Time start = rfree.top();
            rfree.pop();
            rfree.push(start + t);
            reward_done = std::max(reward_done, start + t);
        }
    }

    trace.makespan = reward_done;
    trace.accepted_samples = tasks.size();
    trace.accepted_groups = tasks.size();  // batch mode has no group structure
    trace.idle_fraction =
        trace.makespan > 0.0 ? 1.0 - busy / (static_cast<double>(slots) * trace.makespan) : 0.0;
    trace.admitted_tasks = tasks.size();
    trace.realized_mean = sum / static_cast<double>(tasks.size());
    trace.realized_max = mx;
    return trace;
}

namespace {

// Event-driven queue scheduler shared by the prompt-based and task-based
// entry points. Groups of `rule.group_size` tasks share a prompt; a group is
// decided when its last reward lands.
class QueueScheduler {
public:
    QueueScheduler(const FilterRule& rule, const WorkerPool& pool, const LatencyModel& reward_latency,
                   const RngStream& rng, const RewardValueModel& rewards)
        : rule_(rule), pool_(pool), reward_latency_(reward_latency), rng_(rng), reward_model_(rewards) {
        rule_.validate();
        pool_.validate();
        for (int s = 0; s < pool_.total_slots(); ++s) free_slots_.insert(s);
    }

    // Prompt universe mode: groups are admitted on demand from `prompts`.
    RolloutTrace run(const std::vector<PromptId>& prompts, const LatencyModel& gen_model) {
        prompts_ = &prompts;
        gen_model_ = &gen_model;
        pump();
        return finish();
    }

    // Pre-built task mode: one fixed set of tasks, grouped by prompt id.
    RolloutTrace run_tasks(std::vector<RolloutTask> tasks) {
        for (auto& t : tasks) {
            t.id = tasks_.size();
            group_of(t.prompt).total = rule_.group_size;
            tasks_.push_back(t);
            pending_.push_back(tasks_.size() - 1);
        }
        for (auto& [prompt, g] : groups_) {
            (void)prompt;
            ++open_groups_;
            (void)g;
        }
        pump();
        return finish();
    }

private:
    struct GroupState {
        std::uint32_t total = 0;
        std::uint32_t rewards_done = 0;
        std::vector<double> rewards;
        bool decided = false;
        bool accepted = false;
    };

    GroupState& group_of(PromptId p) { return groups_[p]; }

    std::uint64_t open_cap() const {
        const std::uint64_t needed =
            rule_.target_groups > accepted_ ? rule_.target_groups - accepted_ : 0;
        return needed + rule_.max_additional_running_prompts;
    }

    void admit_groups() {
        if (!prompts_) return;  // fixed-task mode admits everything up front
        while (!stopped_ && next_prompt_ < prompts_->size() && open_groups_ < open_cap()) {
            const PromptId prompt = (*prompts_)[next_prompt_++];
            RngStream prompt_rng = rng_.substream("prompt", prompt);
            GroupState& g = group_of(prompt);
            g.total = rule_.group_size;
            for (std::uint32_t k = 0; k < rule_.group_size; ++k) {
                RolloutTask t;
                t.id = tasks_.size();
                t.prompt = prompt;
                t.replica = k;
                t.service_time = sample_latency(*gen_model_, prompt_rng);
                tasks_.push_back(t);
                pending_.push_back(t.id);
            }
            ++open_groups_;
        }
    }

    void dispatch() {
        while (!stopped_ && !pending_.empty() && !free_slots_.empty()) {
            const std::size_t idx = pending_.front();
            pending_.pop_front();
            const int slot = *free_slots_.begin();
            free_slots_.erase(free_slots_.begin());
            RolloutTask& t = tasks_[idx];
            t.state = TaskState::running;
            starts_[idx] = engine_.now();
            slot_of_[idx] = slot;
            engine_.schedule(engine_.now() + t.service_time, EventKind::task_finish, idx,
                             [this, idx, slot] { on_task_finish(idx, slot); });
        }
    }

    void pump() {
        admit_groups();
        dispatch();
        engine_.run_until(StopCondition::when([this] { return stopped_; }));
    }

    void on_task_finish(std::size_t idx, int slot) {
        RolloutTask& t = tasks_[idx];
        t.state = TaskState::done;
        finishes_[idx] = engine_.now();
        last_gen_finish_ = std::max(last_gen_finish_, engine_.now());
        free_slots_.insert(slot);

        // The response immediately enters reward evaluation, overlapping the
        // remaining generation (queued if the reward pool is finite).
        reward_queue_.push_back(idx);
        pump_rewards();

        admit_groups();
        dispatch();
    }

    void pump_rewards() {
        while (!reward_queue_.empty() &&
               (reward_model_.workers <= 0 || reward_busy_ < reward_model_.workers)) {
            const std::size_t idx = reward_queue_.front();
            reward_queue_.pop_front();
            const RolloutTask& t = tasks_[idx];
            RngStream rrng = rng_.substream("reward-latency", mix64(t.prompt, t.replica));
            const Time rl = sample_latency(reward_latency_, rrng);
            ++reward_busy_;
            reward_intervals_.push_back({engine_.now(), engine_.now() + rl});
            engine_.schedule(engine_.now() + rl, EventKind::reward_finish, idx, [this, idx] {
                --reward_busy_;
                pump_rewards();
                on_reward_finish(idx);
            });
        }
    }

    void on_reward_finish(std::size_t idx) {
        RolloutTask& t = tasks_[idx];
        GroupState& g = group_of(t.prompt);
        g.rewards.push_back(reward_value(reward_model_, t.prompt, t.replica, rng_));
        ++g.rewards_done;
        if (g.rewards_done < g.total) return;

        // Last reward of the group: decide acceptance.
        g.decided = true;
        --open_groups_;
        const bool accept =
            rule_.predicate == FilterPredicate::none || group_has_variance(g.rewards);
        if (accept) {
            g.accepted = true;
            ++accepted_;
            if (accepted_ >= rule_.target_groups) {
                stopped_ = true;
                stop_time_ = engine_.now();
                return;
            }
        } else {
            ++rejected_;
        }
        admit_groups();
        dispatch();
    }

    RolloutTrace finish() {
        RolloutTrace trace;
        if (!stopped_) {
            // Queue drained before reaching the target: unreachable.
            stop_time_ = engine_.now();
            trace.incomplete = accepted_ < rule_.target_groups;
        }
        trace.makespan = stop_time_;
        trace.accepted_groups = accepted_;
        trace.rejected_groups = rejected_;

        double busy = 0.0;
        double sum = 0.0, mx = 0.0;
        trace.tasks.reserve(tasks_.size());
        for (std::size_t i = 0; i < tasks_.size(); ++i) {
            const RolloutTask& t = tasks_[i];
            TaskRecord rec;
            rec.task = t.id;
            rec.prompt = t.prompt;
            rec.replica = t.replica;
            sum += t.service_time;
            mx = std::max(mx, t.service_time);

            auto sit = starts_.find(i);
            if (sit == starts_.end()) {
                rec.worker = -1;
                rec.outcome = TaskOutcome::pending;
                trace.tasks.push_back(rec);
                continue;
            }
            rec.start = sit->second;
            rec.worker = slot_of_.at(i);
            auto fit = finishes_.find(i);
            const bool finished = fit != finishes_.end();
            rec.finish = finished ? fit->second : stop_time_;
            busy += rec.finish - rec.start;

            const GroupState& g = groups_.at(t.prompt);
            if (g.accepted) {
                rec.outcome = TaskOutcome::accepted;
                ++trace.accepted_samples;
            } else if (g.decided) {
                rec.outcome = TaskOutcome::rejected;
                ++trace.wasted_samples;
                trace.wasted_seconds += rec.finish - rec.start;
            } else {
                rec.outcome = TaskOutcome::aborted;
                ++trace.wasted_samples;
                trace.wasted_seconds += rec.finish - rec.start;
            }
            trace.tasks.push_back(rec);
        }

        const double capacity = static_cast<double>(pool_.total_slots()) * trace.makespan;
        trace.idle_fraction = capacity > 0.0 ? 1.0 - busy / capacity : 0.0;
        for (const auto& [rs, re] : reward_intervals_) {
            const double hi = std::min({re, stop_time_, last_gen_finish_});
            if (hi > rs) trace.reward_overlap_seconds += hi - rs;
        }
        trace.admitted_tasks = tasks_.size();
        trace.realized_mean = tasks_.empty() ? 0.0 : sum / static_cast<double>(tasks_.size());
        trace.realized_max = mx;
        return trace;
    }

    FilterRule rule_;
    WorkerPool pool_;
    LatencyModel reward_latency_;
    RngStream rng_;
    RewardValueModel reward_model_;

    const std::vector<PromptId>* prompts_ = nullptr;
    const LatencyModel* gen_model_ = nullptr;
    std::size_t next_prompt_ = 0;

    Engine engine_;
    std::vector<RolloutTask> tasks_;
    std::deque<std::size_t> pending_;
    std::deque<std::size_t> reward_queue_;
    int reward_busy_ = 0;
    std::set<int> free_slots_;
    std::map<PromptId, GroupState> groups_;
    std::map<std::size_t, Time> starts_;
    std::map<std::size_t, Time> finishes_;
    std::map<std::size_t, int> slot_of_;
    std::vector<std::pair<Time, Time>> reward_intervals_;

    std::uint64_t open_groups_ = 0;
    std::uint64_t accepted_ = 0;
    std::uint64_t rejected_ = 0;
    Time last_gen_finish_ = 0.0;
    Time stop_time_ = 0.0;
    bool stopped_ = false;
};

}  // namespace

RolloutTrace run_queue_scheduling(const std::vector<PromptId>& prompts, const FilterRule& rule,
                                  const WorkerPool& pool, const LatencyModel& gen_model,
                                  const LatencyModel& reward_latency, const RngStream& rng,
                                  const RewardValueModel& rewards) {
    QueueScheduler sched(rule, pool, reward_latency, rng, rewards);
    return sched.run(prompts, gen_model);
}

RolloutTrace run_queue_scheduling_tasks(std::vector<RolloutTask> tasks, const FilterRule& rule,
                                        const WorkerPool& pool, const LatencyModel& reward_latency,
                                        const RngStream& rng, const RewardValueModel& rewards) {
    QueueScheduler sched(rule, pool, reward_latency, rng, rewards);
    return sched.run_tasks(std::move(tasks));
}

RolloutTrace run_grouped_rollout(const std::vector<PromptId>& prompts, std::uint32_t replicas,
                                 const WorkerPool& pool, const LatencyModel& gen_model,
                                 const RngStream& rng) {
    pool.validate();
    if (replicas == 0) throw std::invalid_argument("run_grouped_rollout: replicas must be >= 1");
    RolloutTrace trace;
    if (prompts.empty()) return trace;

    // Whole groups are pinned to one worker each; the worker is held until
    // its slowest response finishes.
    using SlotTime = std::pair<Time, int>;
    std::priority_queue<SlotTime, std::vector<SlotTime>, std::greater<>> free_at;
    for (int w = 0; w < pool.count; ++w) free_at.push({0.0, w});

    double busy = 0.0;
    double sum = 0.0, mx = 0.0;
    TaskId next_id = 0;
    for (PromptId prompt : prompts) {
        RngStream prompt_rng = rng.substream("prompt", prompt);
        std::vector<double> times(replicas);
        for (auto& v : times) v = sample_latency(gen_model, prompt_rng);

        auto [t, worker] = free_at.top();
        free_at.pop();
        Time group_end = t;
        for (std::uint32_t k = 0; k < replicas; ++k) {
            TaskRecord rec;
            rec.task = next_id++;
            rec.prompt = prompt;
            rec.replica = k;
            rec.start = t;
            rec.finish = t + times[k];
            rec.worker = worker;
            rec.outcome = TaskOutcome::accepted;
            group_end = std::max(group_end, rec.finish);
            sum += times[k];
            mx = std::max(mx, times[k]);
            trace.tasks.push_back(rec);
        }
        busy += group_end - t;
        free_at.push({group_end, worker});
        trace.makespan = std::max(trace.makespan, group_end);
    }

    trace.accepted_groups = prompts.size();
    trace.accepted_samples = trace.tasks.size();
    trace.idle_fraction = trace.makespan > 0.0
                              ? 1.0 - busy / (static_cast<double>(pool.count) * trace.makespan)
                              : 0.0;
    trace.admitted_tasks = trace.tasks.size();
    trace.realized_mean = sum / static_cast<double>(trace.tasks.size());
    trace.realized_max = mx;
    return trace;
}

}  // namespace rlsim

#include "rlsim/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <queue>
#include <set>
#include <stdexcept>

#include "rlsim/bounds.hpp"

namespace rlsim {

void PipelineConfig::validate() const {
    if (workers < 1) throw std::invalid_argument("PipelineConfig: workers must be >= 1");
    if (slots_per_worker < 1) throw std::invalid_argument("PipelineConfig: slots_per_worker must be >= 1");
    if (batch_size == 0) throw std::invalid_argument("PipelineConfig: batch_size must be >= 1");
    if (num_steps == 0) throw std::invalid_argument("PipelineConfig: num_steps must be >= 1");
    if (async_ratio < 0.0) throw std::invalid_argument("PipelineConfig: async_ratio must be >= 0");
    if (!sync_mode) {
        if (!(train_share > 0.0 && train_share < 1.0)) {
            throw std::invalid_argument("PipelineConfig: train_share must lie in (0,1) in async mode");
        }
        if (workers < 2) throw std::invalid_argument("PipelineConfig: async mode needs at least 2 workers");
    }
    if (model_update_cost < 0.0) throw std::invalid_argument("PipelineConfig: model_update_cost must be >= 0");
    generation.validate();
    train_cost.validate();
    if (env) {
        env->validate();
        think_time.validate();
    }
}

double RunMetrics::mean_step_time() const {
    if (steps.empty()) return 0.0;
    double s = 0.0;
    for (const auto& r : steps) s += r.step_time;
    return s / static_cast<double>(steps.size());
}

double RunMetrics::steady_step_time() const {
    if (steps.empty()) return 0.0;
    const std::size_t warm = std::min<std::size_t>(steps.size() - 1, std::max<std::size_t>(1, steps.size() / 4));
    double s = 0.0;
    for (std::size_t i = warm; i < steps.size(); ++i) s += steps[i].step_time;
    return s / static_cast<double>(steps.size() - warm);
}

std::string RunMetrics::steps_jsonl() const {
    std::string out;
    for (const auto& r : steps) {
        out += "{\"step\":" + std::to_string(r.step);
        out += ",\"step_time\":" + format_number(r.step_time);
        out += ",\"gen_span\":" + format_number(r.gen_span);
        out += ",\"train_span\":" + format_number(r.train_span);
        out += ",\"infer_idle_fraction\":" + format_number(r.infer_idle_fraction);
        out += ",\"train_idle_fraction\":" + format_number(r.train_idle_fraction);
        out += ",\"staleness_mean\":" + format_number(r.staleness_mean);
        out += ",\"staleness_max\":" + std::to_string(r.staleness_max);
        out += "}\n";
    }
    return out;
}

std::string RunMetrics::summary_json() const {
    std::string out = "{";
    out += "\"total_time\":" + format_number(total_time);
    out += ",\"steps\":" + std::to_string(steps.size());
    out += ",\"mean_step_time\":" + format_number(mean_step_time());
    out += ",\"steady_step_time\":" + format_number(steady_step_time());
    out += ",\"throughput\":" + format_number(throughput);
    out += ",\"infer_idle_fraction\":" + format_number(infer_idle_fraction);
    out += ",\"train_idle_fraction\":" + format_number(train_idle_fraction);
    out += ",\"wasted_generation_seconds\":" + format_number(wasted_generation_seconds);
    out += ",\"wasted_samples\":" + std::to_string(wasted_samples);
    out += ",\"consumed_samples\":" + std::to_string(consumed_samples);
    out += ",\"generated_samples\":" + std::to_string(generated_samples);
    out += ",\"buffer_capacity\":" + std::to_string(buffer_capacity);
    out += ",\"buffer_high_water\":" + std::to_string(buffer_high_water);
    out += ",\"staleness_violations\":" + std::to_string(staleness_violations);
    out += ",\"realized_gen_mean\":" + format_number(realized_gen_mean);
    out += ",\"realized_gen_max\":" + format_number(realized_gen_max);
    out += ",\"staleness_histogram\":{";
    bool first = true;
    for (const auto& [k, v] : staleness_histogram) {
        if (!first) out += ',';
        first = false;
        out += "\"" + std::to_string(k) + "\":" + std::to_string(v);
    }
    out += "}}";
    return out;
}

namespace {

// Greedy list schedule of `times` (in order) starting every slot at `base`;
// returns the last finish time. Start times depend only on the multiset of
// earlier finishes, so this matches the event-driven schedule bit for bit.
Time greedy_makespan(const std::vector<Time>& times, int slots, Time base) {
    std::priority_queue<Time, std::vector<Time>, std::greater<>> free_at;
    for (int s = 0; s < slots; ++s) free_at.push(base);
    Time makespan = base;
    for (Time t : times) {
        const Time start = free_at.top();
        free_at.pop();
        const Time fin = start + t;
        free_at.push(fin);
        makespan = std::max(makespan, fin);
    }
    return makespan;
}

double train_pass_seconds(const PipelineConfig& cfg, const RngStream& root, std::uint64_t step,
                          int train_workers) {
    double total = 0.0;
    const std::uint64_t passes = static_cast<std::uint64_t>(cfg.reuse) * cfg.batch_size;
    for (std::uint64_t j = 0; j < passes; ++j) {
        RngStream r = root.substream("train", step * passes + j);
        total += sample_latency(cfg.train_cost, r);
    }
    return total / static_cast<double>(train_workers);
}

}  // namespace

RunMetrics run_sync(const PipelineConfig& config) {
    PipelineConfig cfg = config;
    cfg.sync_mode = true;
    cfg.validate();
    if (cfg.env) {
        throw std::invalid_argument("run_sync: agentic mode runs through run_async or run_env_rollout");
    }

    const RngStream root(cfg.seed, "pipeline");
    const int gen_slots = cfg.workers * cfg.slots_per_worker;

    RunMetrics m;
    m.buffer_capacity = cfg.batch_size;
    double busy_gen = 0.0;
    double busy_train = 0.0;
    double sum = 0.0, mx = 0.0;
    Time clock = 0.0;

    for (std::uint64_t step = 0; step < cfg.num_steps; ++step) {
        std::vector<Time> times(cfg.batch_size);
        for (std::uint64_t i = 0; i < cfg.batch_size; ++i) {
            RngStream r = root.substream("gen", step * cfg.batch_size + i);
            times[i] = sample_latency(cfg.generation, r);
            busy_gen += times[i];
            sum += times[i];
            mx = std::max(mx, times[i]);
        }
        const Time gen_done = greedy_makespan(times, gen_slots, clock);
        const double train_span = train_pass_seconds(cfg, root, step, cfg.workers);
        const Time update_done = gen_done + train_span + cfg.model_update_cost;

        StepRecord rec;
        rec.step = step;
        rec.step_time = update_done - clock;
        rec.gen_span = gen_done - clock;
        rec.train_span = train_span + cfg.model_update_cost;
        double step_work = 0.0;
        for (Time t : times) step_work += t;
        rec.infer_idle_fraction =
            rec.step_time > 0.0
                ? 1.0 - step_work / (static_cast<double>(gen_slots) * rec.step_time)
                : 0.0;
        rec.train_idle_fraction = rec.step_time > 0.0 ? 1.0 - rec.train_span / rec.step_time : 0.0;
        rec.staleness_mean = 0.0;
        rec.staleness_max = 0;
        m.steps.push_back(rec);

        busy_train += train_span + cfg.model_update_cost;
        clock = update_done;
    }

    m.total_time = clock;
    m.consumed_samples = cfg.num_steps * cfg.batch_size;
    m.generated_samples = m.consumed_samples;
    m.staleness_histogram[0] = m.consumed_samples;
    m.throughput = m.total_time > 0.0 ? static_cast<double>(m.consumed_samples) / m.total_time : 0.0;
    m.infer_idle_fraction =
        m.total_time > 0.0 ? 1.0 - busy_gen / (static_cast<double>(gen_slots) * m.total_time) : 0.0;
    m.train_idle_fraction = m.total_time > 0.0 ? 1.0 - busy_train / m.total_time : 0.0;
    m.realized_gen_mean = m.generated_samples > 0 ? sum / static_cast<double>(m.generated_samples) : 0.0;
    m.realized_gen_max = mx;
    return m;
}

namespace {

// Event-driven producer/consumer pipeline. Producers admit work through the
// sample buffer's capacity gate, a single trainer entity consumes batches,
// and the controller suspends generation around each model update.
class PipelineRunner {
public:
    explicit PipelineRunner(const PipelineConfig& cfg)
        : cfg_(cfg),
          root_(cfg.seed, "pipeline"),
          buffer_(cfg.batch_size, cfg.sync_mode ? 0.0 : cfg.async_ratio) {
        cfg_.validate();
        if (cfg_.sync_mode) {
            train_workers_ = cfg_.workers;
            gen_slots_ = cfg_.workers * cfg_.slots_per_worker;
        } else {
            const WorkerSplit split = split_workers(cfg_.workers, cfg_.train_share);
            train_workers_ = split.train;
            gen_slots_ = split.infer * cfg_.slots_per_worker;
        }
    }

    RunMetrics run() {
        for (int s = 0; s < gen_slots_; ++s) idle_slots_.insert(s);
        trainer_waiting_ = true;
        wait_start_ = 0.0;
        if (cfg_.env) {
            envs_.resize(num_envs());
            for (std::uint32_t e = 0; e < num_envs(); ++e) envs_[e].id = e;
        }
        pump_producers();

        const RunResult rr = engine_.run_until(StopCondition::when([this] { return done_; }));
        if (!done_) {
            throw std::runtime_error(
                "pipeline deadlock: queue drained after " + std::to_string(steps_done_) + "/" +
                std::to_string(cfg_.num_steps) + " steps (buffer=" + std::to_string(buffer_.size()) +
                ", in_flight=" + std::to_string(in_flight_) + ", drained=" +
                (rr.queue_drained ? "yes" : "no") + ")");
        }
        return finish();
    }

private:
    // ---- producers: plain generation tasks (RLVR mode) ----

    struct Task {
        std::uint64_t ordinal = 0;
        PolicyVersion init_version = 0;
        Time service = 0.0;
        Time start = 0.0;
        int slot = -1;
        EventId finish_event = 0;
    };

    void pump_producers() {
        if (done_ || suspended_) return;
        if (cfg_.env) {
            pump_envs();
            return;
        }
        while (!idle_slots_.empty() && buffer_.admit_allowed(in_flight_)) {
            const int slot = *idle_slots_.begin();
            idle_slots_.erase(idle_slots_.begin());
            start_task(slot);
        }
    }

    void start_task(int slot) {
        Task t;
        t.ordinal = admitted_++;
        t.init_version = version_;
        RngStream r = root_.substream("gen", t.ordinal);
        t.service = sample_latency(cfg_.generation, r);
        t.start = engine_.now();
        t.slot = slot;
        ++in_flight_;
        const std::uint64_t key = t.ordinal;
        t.finish_event = engine_.schedule(engine_.now() + t.service, EventKind::task_finish, key,
                                          [this, key] { on_task_finish(key); });
        running_tasks_.emplace(key, t);
    }

    void on_task_finish(std::uint64_t key) {
        auto it = running_tasks_.find(key);
        if (it == running_tasks_.end()) return;
        Task t = it->second;
        running_tasks_.erase(it);
        --in_flight_;
        busy_gen_ += t.service;
        note_gen_time(t.service);

        Sample s;
        s.id = t.ordinal;
        s.init_version = t.init_version;
        s.finish_version = version_;
        s.generation_latency = t.service;
        ++generated_;
        if (!buffer_.put(std::move(s), version_)) {
            // Stale on arrival; the admission gate frees up instead.
            wasted_seconds_ += t.service;
            ++wasted_samples_;
        }
        idle_slots_.insert(t.slot);
        maybe_consume();
        pump_producers();
    }

    // ---- producers: environment episode loops (agentic mode) ----

    struct EnvMgr {
        std::uint32_t id = 0;
        bool in_episode = false;
        std::uint64_t ordinal = 0;        // admission ordinal of current episode
        PolicyVersion init_version = 0;
        EpisodeState ep;
        RngStream rng;                    // per-episode stream
        Time think_total = 0.0;
        int held_slot = -1;               // slot_hold mode
        EventId pending_event = 0;
        bool thinking = false;
        Time phase_start = 0.0;
        std::uint64_t episodes_launched = 0;
    };

    std::uint32_t num_envs() const {
        return cfg_.num_envs > 0 ? cfg_.num_envs : static_cast<std::uint32_t>(cfg_.batch_size);
    }

    void pump_envs() {
        for (auto& env : envs_) {
            if (done_ || suspended_) break;
            if (env.in_episode) continue;
            if (!buffer_.admit_allowed(in_flight_)) break;
            if (env.episodes_launched >= kMaxEpisodesPerEnv) continue;
            start_episode(env);
        }
        // Queued generation requests belong to already-admitted episodes, so
        // they are served even while new admissions are blocked.
        if (!done_ && !suspended_) pump_gen_queue();
    }

    void start_episode(EnvMgr& env) {
        env.in_episode = true;
        env.ordinal = admitted_++;
        env.init_version = version_;
        env.ep = EpisodeState{};
        env.rng = root_.substream("episode", env.ordinal);
        env.think_total = 0.0;
        env.held_slot = -1;
        ++env.episodes_launched;
        ++in_flight_;
        request_gen(env);
    }

    void request_gen(EnvMgr& env) {
        if (env.held_slot >= 0) {
            begin_think(env, env.held_slot);
            return;
        }
        gen_queue_.push_back(env.id);
        pump_gen_queue();
    }

    void pump_gen_queue() {
        while (!gen_queue_.empty() && !idle_slots_.empty()) {
            const std::uint32_t eid = gen_queue_.front();
            gen_queue_.pop_front();
            const int slot = *idle_slots_.begin();
            idle_slots_.erase(idle_slots_.begin());
            begin_think(envs_[eid], slot);
        }
    }

    void begin_think(EnvMgr& env, int slot) {
        const Time g = sample_latency(cfg_.think_time, env.rng);
        env.thinking = true;
        env.phase_start = engine_.now();
        env.held_slot = slot;
        const std::uint32_t eid = env.id;
        env.pending_event = engine_.schedule(engine_.now() + g, EventKind::task_finish, eid,
                                             [this, eid, g, slot] { on_think_done(eid, g, slot); });
    }

    void on_think_done(std::uint32_t eid, Time g, int slot) {
        EnvMgr& env = envs_[eid];
        env.thinking = false;
        env.think_total += g;
        busy_gen_ += g;
        if (cfg_.env_level_async) {
            // Fine-grained mode: the slot serves someone else during the wait.
            env.held_slot = -1;
            idle_slots_.insert(slot);
            pump_gen_queue();
        }
        const EnvStepResult step = env_step(*cfg_.env, env.ep, env.rng);
        env.phase_start = engine_.now();
        env.pending_event = engine_.schedule(engine_.now() + step.latency, EventKind::env_step_finish, eid,
                                             [this, eid, step] { on_env_done(eid, step); });
    }

    void on_env_done(std::uint32_t eid, EnvStepResult step) {
        EnvMgr& env = envs_[eid];
        env.pending_event = 0;
        if (!step.done && !step.failed) {
            request_gen(env);
            return;
        }
        // Episode over: release everything, deliver the trajectory if any.
        if (env.held_slot >= 0) {
            idle_slots_.insert(env.held_slot);
            env.held_slot = -1;
        }
        env.in_episode = false;
        --in_flight_;
        if (step.failed) {
            wasted_seconds_ += env.think_total;
            ++failed_episodes_;
        } else {
            Sample s;
            s.id = env.ordinal;
            s.init_version = env.init_version;
            s.finish_version = version_;
            s.generation_latency = env.think_total;
            ++generated_;
            note_gen_time(env.think_total);
            if (!buffer_.put(std::move(s), version_)) {
                wasted_seconds_ += env.think_total;
                ++wasted_samples_;
            }
        }
        maybe_consume();
        pump_producers();
    }

    // ---- trainer ----

    void maybe_consume() {
        if (done_ || !trainer_waiting_ || !buffer_.can_get(cfg_.batch_size)) return;
        trainer_waiting_ = false;
        const Time wait = engine_.now() - wait_start_;
        std::vector<Sample> batch = buffer_.get_batch(cfg_.batch_size, version_);

        StepRecord rec;
        rec.step = steps_done_;
        rec.gen_span = wait;
        double stale_sum = 0.0;
        PolicyVersion stale_max = 0;
        for (const auto& s : batch) {
            const PolicyVersion st = version_ - s.init_version;
            stale_sum += static_cast<double>(st);
            stale_max = std::max(stale_max, st);
        }
        rec.staleness_mean = stale_sum / static_cast<double>(batch.size());
        rec.staleness_max = stale_max;
        pending_step_ = rec;

        if (cfg_.sync_mode) suspended_ = true;  // suspend right after get_batch

        const double span = train_pass_seconds(cfg_, root_, steps_done_, train_workers_);
        pending_step_.train_span = span + cfg_.model_update_cost;
        busy_train_ += span + cfg_.model_update_cost;
        engine_.schedule(engine_.now() + span, EventKind::buffer_get, steps_done_,
                         [this] { on_train_done(); });
        // Capacity freed by the consumption: producers may admit again.
        pump_producers();
    }

    void on_train_done() {
        ++version_;
        suspended_ = true;
        engine_.schedule(engine_.now() + cfg_.model_update_cost, EventKind::model_update,
                         static_cast<std::uint64_t>(version_), [this] { on_update_done(); });
    }

    void on_update_done() {
        // Evict buffered samples that fell out of the freshness window.
        for (auto& s : buffer_.evict_stale(version_)) {
            wasted_seconds_ += s.generation_latency;
            ++wasted_samples_;
        }
        if (cfg_.abort_in_flight_on_update) abort_stale_in_flight();

        pending_step_.step_time = engine_.now() - last_step_end_;
        // Busy time is attributed to the step where a task finishes, so the
        // per-step fractions are clamped; the run-level fractions are exact.
        pending_step_.infer_idle_fraction =
            pending_step_.step_time > 0.0
                ? std::clamp(1.0 - (busy_gen_ - step_busy_gen_mark_) /
                                       (static_cast<double>(gen_slots_) * pending_step_.step_time),
                             0.0, 1.0)
                : 0.0;
        pending_step_.train_idle_fraction =
            pending_step_.step_time > 0.0
                ? std::clamp(1.0 - (busy_train_ - step_busy_train_mark_) / pending_step_.step_time,
                             0.0, 1.0)
                : 0.0;
        step_busy_gen_mark_ = busy_gen_;
        step_busy_train_mark_ = busy_train_;
        last_step_end_ = engine_.now();
        metrics_.steps.push_back(pending_step_);
        ++steps_done_;

        if (steps_done_ >= cfg_.num_steps) {
            done_ = true;
            return;
        }
        trainer_waiting_ = true;
        wait_start_ = engine_.now();
        suspended_ = false;
        pump_producers();
        maybe_consume();
    }

    void abort_stale_in_flight() {
        const PolicyVersion gap = buffer_.version_gap();
        if (cfg_.env) {
            for (auto& env : envs_) {
                if (!env.in_episode || version_ - env.init_version <= gap) continue;
                if (cfg_.resume_partial_rollouts) {
                    // Prefix recomputation under the new policy is charged as
                    // free; only the version stamp changes.
                    env.init_version = version_;
                    continue;
                }
                if (env.pending_event != 0) engine_.cancel(env.pending_event);
                env.pending_event = 0;
                if (env.thinking) {
                    busy_gen_ += engine_.now() - env.phase_start;
                    env.think_total += engine_.now() - env.phase_start;
                }
                if (env.held_slot >= 0) {
                    idle_slots_.insert(env.held_slot);
                    env.held_slot = -1;
                }
                gen_queue_.erase(std::remove(gen_queue_.begin(), gen_queue_.end(), env.id),
                                 gen_queue_.end());
                env.in_episode = false;
                env.thinking = false;
                --in_flight_;
                wasted_seconds_ += env.think_total;
                ++aborted_tasks_;
            }
            return;
        }
        std::vector<std::uint64_t> stale;
        for (const auto& [key, t] : running_tasks_) {
            if (version_ - t.init_version > gap) stale.push_back(key);
        }
        for (std::uint64_t key : stale) {
            Task t = running_tasks_.at(key);
            if (cfg_.resume_partial_rollouts) {
                // Completed fraction is retained; the task finishes on its
                // original schedule under the new version stamp.
                running_tasks_.at(key).init_version = version_;
                continue;
            }
            engine_.cancel(t.finish_event);
            running_tasks_.erase(key);
            --in_flight_;
            const Time elapsed = engine_.now() - t.start;
            busy_gen_ += elapsed;
            wasted_seconds_ += elapsed;
            ++aborted_tasks_;
            idle_slots_.insert(t.slot);
        }
    }

    RunMetrics finish() {
        metrics_.total_time = engine_.now();
        metrics_.consumed_samples = steps_done_ * cfg_.batch_size;
        metrics_.generated_samples = generated_;
        metrics_.wasted_generation_seconds = wasted_seconds_;
        metrics_.wasted_samples = wasted_samples_ + aborted_tasks_;
        metrics_.staleness_histogram = buffer_.staleness_histogram();
        metrics_.buffer_capacity = buffer_.capacity();
        metrics_.buffer_high_water = buffer_.occupancy_high_water();
        metrics_.staleness_violations = buffer_.staleness_violations();
        metrics_.throughput = metrics_.total_time > 0.0
                                  ? static_cast<double>(metrics_.consumed_samples) / metrics_.total_time
                                  : 0.0;
        metrics_.infer_idle_fraction =
            metrics_.total_time > 0.0
                ? 1.0 - busy_gen_ / (static_cast<double>(gen_slots_) * metrics_.total_time)
                : 0.0;
        metrics_.train_idle_fraction =
            metrics_.total_time > 0.0 ? 1.0 - busy_train_ / metrics_.total_time : 0.0;
        metrics_.realized_gen_mean = gen_count_ > 0 ? gen_sum_ / static_cast<double>(gen_count_) : 0.0;
        metrics_.realized_gen_max = gen_max_;
        return metrics_;
    }

    void note_gen_time(Time t) {
        gen_sum_ += t;
        gen_max_ = std::max(gen_max_, t);
        ++gen_count_;
    }

    static constexpr std::uint64_t kMaxEpisodesPerEnv = 100000;

    PipelineConfig cfg_;
    RngStream root_;
    Engine engine_;
    SampleBuffer buffer_;
    int train_workers_ = 1;
    int gen_slots_ = 1;

    PolicyVersion version_ = 0;
    std::uint64_t admitted_ = 0;
    std::uint64_t in_flight_ = 0;
    std::uint64_t generated_ = 0;
    std::uint64_t steps_done_ = 0;
    bool trainer_waiting_ = false;
    bool suspended_ = false;
    bool done_ = false;
    Time wait_start_ = 0.0;
    Time last_step_end_ = 0.0;

    std::set<int> idle_slots_;
    std::map<std::uint64_t, Task> running_tasks_;
    std::vector<EnvMgr> envs_;
    std::deque<std::uint32_t> gen_queue_;

    StepRecord pending_step_;
    RunMetrics metrics_;
    double busy_gen_ = 0.0;
    double busy_train_ = 0.0;
    double step_busy_gen_mark_ = 0.0;
    double step_busy_train_mark_ = 0.0;
    Time wasted_seconds_ = 0.0;
    std::uint64_t wasted_samples_ = 0;
    std::uint64_t aborted_tasks_ = 0;
    std::uint64_t failed_episodes_ = 0;
    double gen_sum_ = 0.0, gen_max_ = 0.0;
    std::uint64_t gen_count_ = 0;
};

}  // namespace

RunMetrics run_async(const PipelineConfig& config) {
    PipelineRunner runner(config);
    return runner.run();
}

// ---------------------------------------------------------------------------
// Standalone agentic rollout comparison.
// ---------------------------------------------------------------------------

namespace {

struct EpisodeCursor {
    RngStream rng;
    EpisodeState ep;
};

}  // namespace

EnvAsyncResult run_env_rollout(const EnvAsyncConfig& config) {
    config.env.validate();
    config.think_time.validate();
    if (config.batch == 0) throw std::invalid_argument("EnvAsyncConfig: batch must be >= 1");
    if (config.gen_slots < 1) throw std::invalid_argument("EnvAsyncConfig: gen_slots must be >= 1");

    const RngStream root(config.seed, "env-rollout");
    const std::uint32_t envs = config.num_envs > 0 ? config.num_envs : static_cast<std::uint32_t>(config.batch);
    EnvAsyncResult res;

    if (config.mode == EnvRolloutMode::turn_barrier) {
        // Lock-step batched rollout: per turn, every live episode generates an
        // action (list-scheduled on the slots), then every environment steps;
        // the slowest step gates the turn.
        std::vector<EpisodeCursor> eps;
        std::uint64_t next_index = 0;
        for (std::uint64_t i = 0; i < config.batch; ++i) {
            eps.push_back(EpisodeCursor{root.substream("episode", next_index++), EpisodeState{}});
        }
        Time t = 0.0;
        double think_busy = 0.0;
        while (res.trajectories < config.batch) {
            std::vector<Time> thinks(eps.size());
            for (std::size_t i = 0; i < eps.size(); ++i) {
                thinks[i] = sample_latency(config.think_time, eps[i].rng);
                think_busy += thinks[i];
            }
            const Time gen_done = greedy_makespan(thinks, config.gen_slots, t);
            Time env_wave = 0.0;
            std::vector<EpisodeCursor> live;
            for (auto& cur : eps) {
                const EnvStepResult step = env_step(config.env, cur.ep, cur.rng);
                env_wave = std::max(env_wave, step.latency);
                if (step.failed) {
                    ++res.failed_episodes;
                    // A replacement episode joins the next wave.
                    live.push_back(EpisodeCursor{root.substream("episode", next_index++), EpisodeState{}});
                } else if (step.done) {
                    ++res.trajectories;
                } else {
                    live.push_back(std::move(cur));
                }
            }
            t = gen_done + env_wave;
            eps = std::move(live);
        }
        res.step_time = t;
        res.gen_slot_utilization =
            t > 0.0 ? think_busy / (static_cast<double>(config.gen_slots) * t) : 0.0;
        return res;
    }

    if (config.mode == EnvRolloutMode::slot_hold) {
        // Each episode occupies one generation slot for its entire duration,
        // environment waits included.
        std::priority_queue<Time, std::vector<Time>, std::greater<>> free_at;
        for (int s = 0; s < config.gen_slots; ++s) free_at.push(0.0);
        std::uint64_t next_index = 0;
        double think_busy = 0.0;
        Time finish_time = 0.0;
        while (res.trajectories < config.batch) {
            const Time start = free_at.top();
            free_at.pop();
            EpisodeCursor cur{root.substream("episode", next_index++), EpisodeState{}};
            Time dur = 0.0;
            bool failed = false;
            while (!cur.ep.done && !cur.ep.failed) {
                const Time g = sample_latency(config.think_time, cur.rng);
                dur += g;
                think_busy += g;
                const EnvStepResult step = env_step(config.env, cur.ep, cur.rng);
                dur += step.latency;
                failed = step.failed;
            }
            const Time end = start + dur;
            free_at.push(end);
            if (failed) {
                ++res.failed_episodes;
            } else {
                ++res.trajectories;
                finish_time = std::max(finish_time, end);
            }
        }
        // The step ends when the last collected trajectory lands. Slots may
        // have run past it speculatively; that work is outside the window.
        res.step_time = finish_time;
        res.gen_slot_utilization = finish_time > 0.0
                                       ? think_busy / (static_cast<double>(config.gen_slots) * finish_time)
                                       : 0.0;
        return res;
    }

    // env_async: episodes stream continuously across the environment pool and
    // only occupy a slot while generating. Steady-state cost per batch is
    // measured over a window after a warmup.
    Engine engine;
    std::set<int> idle_slots;
    for (int s = 0; s < config.gen_slots; ++s) idle_slots.insert(s);
    std::deque<std::uint32_t> gen_queue;

    struct EnvLoop {
        EpisodeCursor cur{RngStream{}, EpisodeState{}};
        bool live = false;
    };
    std::vector<EnvLoop> pool(envs);
    std::uint64_t next_index = 0;
    const std::uint64_t target = (config.warm_batches + config.measure_batches) * config.batch;
    std::vector<Time> collect_times;
    collect_times.reserve(target);
    double think_busy = 0.0;

    // std::function for mutual recursion between the loop stages.
    std::function<void()> pump_slots;
    std::function<void(std::uint32_t)> start_episode;
    std::function<void(std::uint32_t)> request_gen;

    pump_slots = [&] {
        while (!gen_queue.empty() && !idle_slots.empty()) {
            const std::uint32_t eid = gen_queue.front();
            gen_queue.pop_front();
            const int slot = *idle_slots.begin();
            idle_slots.erase(idle_slots.begin());
            EnvLoop& env = pool[eid];
            const Time g = sample_latency(config.think_time, env.cur.rng);
            engine.schedule(engine.now() + g, EventKind::task_finish, eid, [&, eid, g, slot] {
                think_busy += g;
                idle_slots.insert(slot);
                pump_slots();
                EnvLoop& e = pool[eid];
                const EnvStepResult step = env_step(config.env, e.cur.ep, e.cur.rng);
                engine.schedule(engine.now() + step.latency, EventKind::env_step_finish, eid,
                                [&, eid, step] {
                                    if (step.failed) {
                                        ++res.failed_episodes;
                                        start_episode(eid);
                                    } else if (step.done) {
                                        collect_times.push_back(engine.now());
                                        ++res.trajectories;
                                        if (collect_times.size() < target) start_episode(eid);
                                    } else {
                                        request_gen(eid);
                                    }
                                });
            });
        }
    };

    request_gen = [&](std::uint32_t eid) {
        gen_queue.push_back(eid);
        pump_slots();
    };

    start_episode = [&](std::uint32_t eid) {
        EnvLoop& env = pool[eid];
        env.cur = EpisodeCursor{root.substream("episode", next_index++), EpisodeState{}};
        env.live = true;
        request_gen(eid);
    };

    for (std::uint32_t e = 0; e < envs; ++e) start_episode(e);
    engine.run_until(StopCondition::when([&] { return collect_times.size() >= target; }));

    if (collect_times.size() < target) {
        throw std::runtime_error("run_env_rollout: stream stalled before the measurement window closed");
    }
    const Time window_start = collect_times[config.warm_batches * config.batch - 1];
    const Time window_end = collect_times[target - 1];
    res.step_time = (window_end - window_start) / static_cast<double>(config.measure_batches);
    res.gen_slot_utilization =
        window_end > 0.0 ? think_busy / (static_cast<double>(config.gen_slots) * window_end) : 0.0;
    return res;
}

}  // namespace rlsim

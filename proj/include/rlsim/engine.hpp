#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <string>
#include <unordered_set>
#include <vector>

namespace rlsim {

// Simulation time in seconds.
using Time = double;

using EventId = std::uint64_t;

enum class EventKind : std::uint8_t {
    task_start,
    task_finish,
    env_step_finish,
    reward_finish,
    model_update,
    buffer_put,
    buffer_get,
    abort,
};

const char* to_string(EventKind k) noexcept;

struct Event {
    EventKind kind = EventKind::task_start;
    std::uint64_t entity = 0;          // task/episode/step id, for the log
    std::function<void()> action;      // runs when the event fires
};

// Run-loop termination condition. Fields combine: the first one satisfied
// stops the run. Default-constructed: run until the queue drains.
struct StopCondition {
    std::optional<std::uint64_t> max_events;
    std::optional<Time> clock_limit;                // halt before clock would reach this
    std::function<bool()> predicate;                // checked after each processed event

    static StopCondition queue_empty() { return {}; }
    static StopCondition after_events(std::uint64_t n) {
        StopCondition s;
        s.max_events = n;
        return s;
    }
    static StopCondition at_clock(Time t) {
        StopCondition s;
        s.clock_limit = t;
        return s;
    }
    static StopCondition when(std::function<bool()> pred) {
        StopCondition s;
        s.predicate = std::move(pred);
        return s;
    }
};

struct RunResult {
    Time clock = 0.0;
    std::uint64_t processed = 0;
    bool queue_drained = false;        // true if the run ended because no events remained
};

// One processed-event record, when logging is enabled.
struct EventLogEntry {
    Time at = 0.0;
    EventKind kind = EventKind::task_start;
    std::uint64_t entity = 0;
};

// Deterministic single-threaded event engine. Events fire in (time, id)
// order; the id is the insertion ordinal, so ties resolve FIFO and every run
// with the same inputs replays identically.
class Engine {
public:
    EventId schedule(Event ev, Time at);
    EventId schedule(Time at, EventKind kind, std::uint64_t entity, std::function<void()> action) {
        return schedule(Event{kind, entity, std::move(action)}, at);
    }

    // True if the event was still pending and is now removed.
    bool cancel(EventId id);

    RunResult run_until(const StopCondition& stop = {});

    Time now() const noexcept { return now_; }
    std::size_t pending() const noexcept { return live_.size(); }

    void enable_log() { logging_ = true; }
    const std::vector<EventLogEntry>& log() const noexcept { return log_; }

    // Renders the processed-event log, one "time kind entity" line per event.
    std::string log_text() const;

private:
    struct Pending {
        Time at;
        EventId id;
        EventKind kind;
        std::uint64_t entity;
        std::function<void()> action;
    };
    struct Later {
        // min-heap on (at, id)
        bool operator()(const Pending& a, const Pending& b) const {
            if (a.at != b.at) return a.at > b.at;
            return a.id > b.id;
        }
    };

    std::priority_queue<Pending, std::vector<Pending>, Later> heap_;
    std::unordered_set<EventId> live_;
    Time now_ = 0.0;
    EventId next_id_ = 1;
    bool logging_ = false;
    std::vector<EventLogEntry> log_;
};

// Formats a double so that re-parsing recovers the exact value (shortest
// round-trip form); all exported numbers go through this for reproducibility.
std::string format_number(double v);

}  // namespace rlsim

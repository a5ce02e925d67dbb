#include "rlsim/engine.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>

namespace rlsim {

const char* to_string(EventKind k) noexcept {
    switch (k) {
        case EventKind::task_start: return "task-start";
        case EventKind::task_finish: return "task-finish";
        case EventKind::env_step_finish: return "env-step-finish";
        case EventKind::reward_finish: return "reward-finish";
        case EventKind::model_update: return "model-update";
        case EventKind::buffer_put: return "buffer-put";
        case EventKind::buffer_get: return "buffer-get";
        case EventKind::abort: return "abort";
    }
    return "unknown";
}

EventId Engine::schedule(Event ev, Time at) {
    if (!(at >= now_)) {
        throw std::invalid_argument("Engine::schedule: event time " + format_number(at) +
                                    " is in the past (clock " + format_number(now_) + ")");
    }
    if (!std::isfinite(at)) {
        throw std::invalid_argument("Engine::schedule: event time must be finite");
    }
    const EventId id = next_id_++;
    heap_.push(Pending{at, id, ev.kind, ev.entity, std::move(ev.action)});
    live_.insert(id);
    return id;
}

bool Engine::cancel(EventId id) {
    // Lazy removal: drop the id from the live set, skip it when popped.
    // Fired or already-cancelled ids are no longer live and report false.
    return live_.erase(id) != 0;
}

RunResult Engine::run_until(const StopCondition& stop) {
    RunResult res;
    res.clock = now_;
    while (true) {
        if (stop.max_events && res.processed >= *stop.max_events) break;
        // Drop cancelled entries sitting at the top.
        while (!heap_.empty() && !live_.count(heap_.top().id)) heap_.pop();
        if (heap_.empty()) {
            res.queue_drained = true;
            break;
        }
        if (stop.clock_limit && heap_.top().at >= *stop.clock_limit) break;

        Pending ev = std::move(const_cast<Pending&>(heap_.top()));
        heap_.pop();
        live_.erase(ev.id);
        now_ = ev.at;
        if (logging_) log_.push_back(EventLogEntry{ev.at, ev.kind, ev.entity});
        if (ev.action) ev.action();
        ++res.processed;
        res.clock = now_;
        if (stop.predicate && stop.predicate()) break;
    }
    res.clock = now_;
    return res;
}

std::string Engine::log_text() const {
    std::string out;
    for (const auto& e : log_) {
        out += format_number(e.at);
        out += ' ';
        out += to_string(e.kind);
        out += ' ';
        out += std::to_string(e.entity);
        out += '\n';
    }
    return out;
}

std::string format_number(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) return "nan";
    return std::string(buf, ptr);
}

}  // namespace rlsim

#include "rlsim/trace.hpp"

#include "rlsim/engine.hpp"

namespace rlsim {

const char* to_string(TaskOutcome s) noexcept {
    switch (s) {
        case TaskOutcome::accepted: return "accepted";
        case TaskOutcome::rejected: return "rejected";
        case TaskOutcome::aborted: return "aborted";
        case TaskOutcome::pending: return "pending";
    }
    return "unknown";
}

std::string RolloutTrace::to_dsv(char delim) const {
    std::string out = "task,prompt,replica,start,finish,worker,status\n";
    if (delim != ',') {
        for (auto& ch : out) {
            if (ch == ',') ch = delim;
        }
    }
    for (const auto& t : tasks) {
        out += std::to_string(t.task);
        out += delim;
        out += std::to_string(t.prompt);
        out += delim;
        out += std::to_string(t.replica);
        out += delim;
        out += format_number(t.start);
        out += delim;
        out += format_number(t.finish);
        out += delim;
        out += std::to_string(t.worker);
        out += delim;
        out += to_string(t.outcome);
        out += '\n';
    }
    return out;
}

}  // namespace rlsim

#include "rlsim/workload.hpp"

#include <stdexcept>

namespace rlsim {

std::vector<RolloutTask> make_tasks(const std::vector<PromptId>& prompts, std::uint32_t replicas,
                                    std::int64_t version, const LatencyModel& model, const RngStream& rng) {
    if (replicas == 0) throw std::invalid_argument("make_tasks: replicas must be >= 1");
    model.validate();

    std::vector<RolloutTask> tasks;
    tasks.reserve(prompts.size() * replicas);
    TaskId next_id = 0;
    for (PromptId p : prompts) {
        RngStream prompt_rng = rng.substream("prompt", p);
        for (std::uint32_t k = 0; k < replicas; ++k) {
            RolloutTask t;
            t.id = next_id++;
            t.prompt = p;
            t.replica = k;
            t.init_version = version;
            t.service_time = sample_latency(model, prompt_rng);
            tasks.push_back(t);
        }
    }
    return tasks;
}

void EnvProfile::validate() const {
    step_latency.validate();
    if (max_steps == 0) throw std::invalid_argument("EnvProfile: max_steps must be >= 1");
    if (terminal_prob < 0.0 || terminal_prob > 1.0) throw std::invalid_argument("EnvProfile: terminal_prob must be in [0,1]");
    if (fail_slow_prob < 0.0 || fail_slow_prob > 1.0) throw std::invalid_argument("EnvProfile: fail_slow_prob must be in [0,1]");
    if (fail_slow_prob > 0.0 && fail_slow_multiplier <= 1.0) {
        throw std::invalid_argument("EnvProfile: fail_slow_multiplier must be > 1");
    }
    if (fail_stop_prob < 0.0 || fail_stop_prob > 1.0) throw std::invalid_argument("EnvProfile: fail_stop_prob must be in [0,1]");
    if (fail_stop_prob > 0.0 && fail_stop_timeout <= 0.0) {
        throw std::invalid_argument("EnvProfile: fail_stop_timeout must be > 0");
    }
}

EnvStepResult env_step(const EnvProfile& env, EpisodeState& episode, RngStream& rng) {
    if (episode.done || episode.failed) {
        throw std::invalid_argument("env_step: episode already finished");
    }

    EnvStepResult res;
    if (episode.steps_taken == 0 && env.fail_stop_prob > 0.0 && rng.bernoulli(env.fail_stop_prob)) {
        episode.failed = true;
        res.failed = true;
        res.latency = env.fail_stop_timeout;
        return res;
    }

    res.latency = sample_latency(env.step_latency, rng);
    if (env.fail_slow_prob > 0.0 && rng.bernoulli(env.fail_slow_prob)) {
        res.latency *= env.fail_slow_multiplier;
    }

    ++episode.steps_taken;
    if (episode.steps_taken >= env.max_steps ||
        (env.terminal_prob > 0.0 && rng.bernoulli(env.terminal_prob))) {
        episode.done = true;
        res.done = true;
    }
    return res;
}

}  // namespace rlsim

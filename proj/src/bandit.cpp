#include "rlsim/bandit.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "rlsim/engine.hpp"

namespace rlsim {

ContextualBandit::ContextualBandit(int contexts, int arms, std::uint64_t seed)
    : contexts_(contexts), arms_(arms) {
    RngStream rng(seed, "bandit-means");
    means_.resize(static_cast<std::size_t>(contexts) * arms);
    for (double& m : means_) m = rng.uniform01();
}

double ContextualBandit::best_reward(int context) const {
    const double* row = means_.data() + static_cast<std::size_t>(context) * arms_;
    return *std::max_element(row, row + arms_);
}

double ContextualBandit::expected_reward(const ToyPolicy& policy) const {
    double total = 0.0;
    for (int c = 0; c < contexts_; ++c) {
        const std::vector<double> p = policy.probs(c);
        for (int a = 0; a < arms_; ++a) total += p[a] * mean_reward(c, a);
    }
    return total / static_cast<double>(contexts_);
}

std::string TrainLoopResult::curve_csv() const {
    std::string out = "step,mean_reward,grad_norm,staleness\n";
    for (const auto& p : curve) {
        out += std::to_string(p.step) + "," + format_number(p.expected_reward) + "," +
               format_number(p.grad_norm) + "," + std::to_string(p.staleness) + "\n";
    }
    return out;
}

TrainLoopResult toy_train_loop(const TrainLoopConfig& config) {
    config.loss.validate();
    ContextualBandit bandit(config.contexts, config.arms, config.seed);
    ToyPolicy policy(config.contexts, config.arms);
    const ToyPolicy reference = policy;  // initial policy anchors the KL term

    RngStream root(config.seed, "train-loop");

    // Snapshots of past versions; the behavior policy trails by async_lag.
    std::deque<ToyPolicy> snapshots;
    snapshots.push_back(policy);

    TrainLoopResult res;
    std::vector<double> grad_norms;
    for (int step = 0; step < config.steps; ++step) {
        const ToyPolicy& behavior = snapshots.front();
        const std::int64_t staleness = static_cast<std::int64_t>(snapshots.size()) - 1;

        std::vector<Trajectory> batch;
        bool any_live_group = false;
        RngStream step_rng = root.substream("step", step);
        for (int c = 0; c < config.contexts; ++c) {
            std::vector<Trajectory> group =
                sample_trajectories(behavior, c, config.group_size, config.traj_len, step_rng);
            std::vector<double> rewards(group.size());
            for (std::size_t i = 0; i < group.size(); ++i) {
                double r = 0.0;
                for (int tok : group[i].tokens) r += bandit.mean_reward(c, tok);
                r /= static_cast<double>(group[i].tokens.size());
                if (config.reward_noise > 0.0) r += config.reward_noise * step_rng.normal();
                rewards[i] = r;
                group[i].reward = r;
            }
            const GroupAdvantages adv = grpo_advantages(rewards);
            if (!adv.degenerate) any_live_group = true;
            for (std::size_t i = 0; i < group.size(); ++i) {
                group[i].advantage = adv.values[i];
                batch.push_back(std::move(group[i]));
            }
        }

        double gnorm = 0.0;
        if (any_live_group) {
            LossInputs aux;
            aux.ref = &reference;
            aux.prox = &policy;  // proximal = current learner for decoupled runs
            const LossResult lr = loss_and_grad(config.loss, policy, batch, aux);
            for (std::size_t i = 0; i < lr.grad.size(); ++i) {
                policy.logits()[i] += config.lr * lr.grad[i];
                gnorm += lr.grad[i] * lr.grad[i];
            }
            gnorm = std::sqrt(gnorm);
        }
        grad_norms.push_back(gnorm);

        snapshots.push_back(policy);
        while (static_cast<std::int64_t>(snapshots.size()) > config.async_lag + 1) snapshots.pop_front();

        TrainCurvePoint pt;
        pt.step = step;
        pt.expected_reward = bandit.expected_reward(policy);
        pt.grad_norm = gnorm;
        pt.staleness = staleness;
        res.curve.push_back(pt);
    }

    const int tail = std::min<int>(10, static_cast<int>(res.curve.size()));
    for (int i = 0; i < tail; ++i) {
        res.final_reward += res.curve[res.curve.size() - 1 - i].expected_reward;
    }
    res.final_reward /= static_cast<double>(tail);

    double mean = 0.0;
    for (double g : grad_norms) mean += g;
    mean /= static_cast<double>(grad_norms.size());
    for (double g : grad_norms) res.grad_norm_variance += (g - mean) * (g - mean);
    res.grad_norm_variance /= static_cast<double>(grad_norms.size());
    return res;
}

}  // namespace rlsim

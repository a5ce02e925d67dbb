#pragma once

#include "rlsim/losses.hpp"

namespace rlsim {

// Deterministic-mean contextual bandit: rewards depend only on (context, arm),
// plus optional observation noise.
class ContextualBandit {
public:
    ContextualBandit(int contexts, int arms, std::uint64_t seed);

    int contexts() const noexcept { return contexts_; }
    int arms() const noexcept { return arms_; }
    double mean_reward(int context, int arm) const { return means_[static_cast<std::size_t>(context) * arms_ + arm]; }
    double best_reward(int context) const;

    // Exact expected reward of a policy, averaged over contexts.
    double expected_reward(const ToyPolicy& policy) const;

private:
    int contexts_;
    int arms_;
    std::vector<double> means_;
};

struct TrainLoopConfig {
    int contexts = 4;
    int arms = 10;
    int group_size = 8;          // responses per context per step
    int traj_len = 1;
    int steps = 200;
    double lr = 0.5;
    double reward_noise = 0.0;
    std::int64_t async_lag = 0;  // behavior policy trails by this many versions
    LossConfig loss;
    std::uint64_t seed = 0;
};

struct TrainCurvePoint {
    int step = 0;
    double expected_reward = 0.0;
    double grad_norm = 0.0;
    std::int64_t staleness = 0;
};

struct TrainLoopResult {
    std::vector<TrainCurvePoint> curve;
    double final_reward = 0.0;       // mean expected reward over the last 10 steps
    double grad_norm_variance = 0.0; // across all steps
    // Learning-curve export: step, mean reward, gradient norm, staleness.
    std::string curve_csv() const;
};

// Gradient-ascent training of a ToyPolicy on the bandit where trajectories
// are sampled from a snapshot `async_lag` versions behind the learner.
TrainLoopResult toy_train_loop(const TrainLoopConfig& config);

}  // namespace rlsim

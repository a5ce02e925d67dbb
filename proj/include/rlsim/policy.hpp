#pragma once

#include <cstdint>
#include <vector>

#include "rlsim/rng.hpp"

namespace rlsim {

// Tabular softmax policy over (context, token), temperature 1. Small enough
// that distributions and KL terms are computed exactly over the vocabulary.
class ToyPolicy {
public:
    ToyPolicy(int contexts, int vocab);
    ToyPolicy(int contexts, int vocab, std::vector<double> logits);

    int contexts() const noexcept { return contexts_; }
    int vocab() const noexcept { return vocab_; }

    double& logit(int context, int token) { return logits_[index(context, token)]; }
    double logit(int context, int token) const { return logits_[index(context, token)]; }
    std::vector<double>& logits() noexcept { return logits_; }
    const std::vector<double>& logits() const noexcept { return logits_; }

    // Log-probabilities of one context row (numerically stable log-softmax).
    std::vector<double> log_probs(int context) const;
    std::vector<double> probs(int context) const;
    double log_prob(int context, int token) const;

    int sample(int context, RngStream& rng) const;

    void randomize(RngStream& rng, double scale = 1.0);

private:
    std::size_t index(int context, int token) const { return static_cast<std::size_t>(context) * vocab_ + token; }

    int contexts_;
    int vocab_;
    std::vector<double> logits_;
};

// One sampled sequence with the behavior policy's log-probabilities recorded
// at generation time.
struct Trajectory {
    int context = 0;
    std::vector<int> tokens;
    double reward = 0.0;
    double advantage = 0.0;
    std::vector<double> behavior_logp;          // per token, under the behavior policy
    std::vector<double> engine_logp;            // optional: as reported by the serving engine
};

// Samples `count` trajectories of `length` tokens from `policy` in `context`,
// recording behavior log-probs.
std::vector<Trajectory> sample_trajectories(const ToyPolicy& policy, int context, int count, int length,
                                            RngStream& rng);

}  // namespace rlsim

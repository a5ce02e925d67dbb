#include "rlsim/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rlsim {

ToyPolicy::ToyPolicy(int contexts, int vocab) : contexts_(contexts), vocab_(vocab) {
    if (contexts < 1 || vocab < 2) {
        throw std::invalid_argument("ToyPolicy: need contexts >= 1 and vocab >= 2");
    }
    logits_.assign(static_cast<std::size_t>(contexts) * vocab, 0.0);
}

ToyPolicy::ToyPolicy(int contexts, int vocab, std::vector<double> logits) : ToyPolicy(contexts, vocab) {
    if (logits.size() != logits_.size()) throw std::invalid_argument("ToyPolicy: logits size mismatch");
    logits_ = std::move(logits);
}

std::vector<double> ToyPolicy::log_probs(int context) const {
    const double* row = logits_.data() + index(context, 0);
    const double mx = *std::max_element(row, row + vocab_);
    double sum = 0.0;
    for (int v = 0; v < vocab_; ++v) sum += std::exp(row[v] - mx);
    const double lse = mx + std::log(sum);
    std::vector<double> out(vocab_);
    for (int v = 0; v < vocab_; ++v) out[v] = row[v] - lse;
    return out;
}

std::vector<double> ToyPolicy::probs(int context) const {
    std::vector<double> out = log_probs(context);
    for (double& v : out) v = std::exp(v);
    return out;
}

double ToyPolicy::log_prob(int context, int token) const {
    return log_probs(context)[token];
}

int ToyPolicy::sample(int context, RngStream& rng) const {
    const std::vector<double> p = probs(context);
    double u = rng.uniform01();
    for (int v = 0; v < vocab_; ++v) {
        u -= p[v];
        if (u < 0.0) return v;
    }
    return vocab_ - 1;
}

void ToyPolicy::randomize(RngStream& rng, double scale) {
    for (double& v : logits_) v = scale * rng.normal();
}

std::vector<Trajectory> sample_trajectories(const ToyPolicy& policy, int context, int count, int length,
                                            RngStream& rng) {
    if (length < 1) throw std::invalid_argument("sample_trajectories: length must be >= 1");
    std::vector<Trajectory> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) {
        Trajectory t;
        t.context = context;
        const std::vector<double> lp = policy.log_probs(context);
        for (int s = 0; s < length; ++s) {
            const int tok = policy.sample(context, rng);
            t.tokens.push_back(tok);
            t.behavior_logp.push_back(lp[tok]);
        }
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace rlsim

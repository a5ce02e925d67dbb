#pragma once

// Independent oracles used by the tests. These deliberately avoid the library
// implementations they are checking against.

#include <algorithm>
#include <cmath>
#include <vector>

namespace oracle {

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Mean of a normal(mu, sigma) truncated to [lo, hi].
inline double truncated_normal_mean(double mu, double sigma, double lo, double hi) {
    const double a = (lo - mu) / sigma;
    const double b = (hi - mu) / sigma;
    const double z = normal_cdf(b) - normal_cdf(a);
    return mu + sigma * (normal_pdf(a) - normal_pdf(b)) / z;
}

// Greedy list-scheduling makespan: tasks in order, each to the earliest-free
// worker, implemented with a plain vector scan (no heap, no event engine).
inline double list_schedule_makespan(const std::vector<double>& times, int workers) {
    std::vector<double> free_at(workers, 0.0);
    double makespan = 0.0;
    for (double t : times) {
        auto it = std::min_element(free_at.begin(), free_at.end());
        *it += t;
        makespan = std::max(makespan, *it);
    }
    return makespan;
}

// Plain REINFORCE gradient for a tabular softmax policy: for every token,
// advantage/|o|/n flows into grad log pi. Layout matches ToyPolicy logits.
struct ReinforceTraj {
    int context;
    std::vector<int> tokens;
    double advantage;
    std::vector<double> weights;  // optional per-token weights (importance etc.)
};

inline std::vector<double> reinforce_grad(int contexts, int vocab,
                                          const std::vector<std::vector<double>>& probs_by_context,
                                          const std::vector<ReinforceTraj>& batch) {
    std::vector<double> grad(static_cast<std::size_t>(contexts) * vocab, 0.0);
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    for (const auto& traj : batch) {
        const double scale = inv_n / static_cast<double>(traj.tokens.size());
        for (std::size_t t = 0; t < traj.tokens.size(); ++t) {
            const double w = (traj.weights.empty() ? 1.0 : traj.weights[t]) * traj.advantage * scale;
            for (int v = 0; v < vocab; ++v) {
                const double indicator = v == traj.tokens[t] ? 1.0 : 0.0;
                grad[static_cast<std::size_t>(traj.context) * vocab + v] +=
                    w * (indicator - probs_by_context[traj.context][v]);
            }
        }
    }
    return grad;
}

}  // namespace oracle

#pragma once

#include <optional>
#include <string>

#include "rlsim/policy.hpp"

namespace rlsim {

enum class LossVariant : std::uint8_t {
    ppo,
    decoupled_ppo,
    tis,        // truncated importance sampling, weight clipped to [0, c]
    cispo,      // weight clipped to [1-eps_low, 1+eps_high]
    topr,       // truncation applied only to negative-signal trajectories
    grpo,       // clipped surrogate with an exact KL penalty
    naive_is,   // unclipped importance weight; diagnostic baseline
};

const char* to_string(LossVariant v) noexcept;
LossVariant loss_variant_from_string(const std::string& s);

enum class RatioAggregation : std::uint8_t {
    token_mean,        // per-token ratios, sequence averaged by length
    sequence_product,  // one trajectory-level ratio (product over tokens)
};

struct LossConfig {
    LossVariant variant = LossVariant::ppo;
    double clip_eps = 0.2;          // PPO / decoupled PPO / GRPO
    double eps_low = 0.2;           // CISPO lower clip
    double eps_high = 0.2;          // CISPO upper clip
    double trunc_cap = 5.0;         // c for TIS / TOPR
    double kl_weight = 0.0;         // GRPO KL coefficient
    double w_plus = 1.0;            // weighted TOPR multipliers
    double w_minus = 1.0;
    double engine_mismatch_cap = 0.0;  // > 0 enables the capped engine correction
    RatioAggregation aggregation = RatioAggregation::token_mean;

    void validate() const;
};

struct GroupAdvantages {
    std::vector<double> values;
    bool degenerate = false;  // all-equal rewards: zero advantages
};

// Group-normalized advantages: (r - mean)/std with population std. Groups
// with (near-)zero variance yield all zeros plus the degenerate flag.
GroupAdvantages grpo_advantages(const std::vector<double>& rewards);

// Per-token importance ratios and their product, computed in log space.
struct TrajectoryRatio {
    std::vector<double> per_token;
    double product = 1.0;
};
TrajectoryRatio trajectory_ratio(const ToyPolicy& policy, const Trajectory& traj);

struct LossResult {
    double value = 0.0;
    std::vector<double> grad;     // d value / d policy logits, same layout
    bool used_degenerate_group = false;
};

struct LossInputs {
    const ToyPolicy* prox = nullptr;  // decoupled_ppo
    const ToyPolicy* ref = nullptr;   // grpo KL term
    // Gradient-stopped weights are evaluated on this policy when set; the
    // finite-difference oracle pins it to the unperturbed policy so the
    // differenced objective matches the stop-gradient semantics.
    const ToyPolicy* sg_anchor = nullptr;
};

// Objective value and exact analytic gradient for a batch of trajectories
// (advantages already attached). Clipped importance weights in TIS/CISPO/TOPR
// are gradient-stopped: their gradient is weight * advantage * grad log pi.
LossResult loss_and_grad(const LossConfig& config, const ToyPolicy& policy,
                         const std::vector<Trajectory>& batch, const LossInputs& aux = {});

}  // namespace rlsim

#include "rlsim/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace rlsim {

namespace {

// A context is kink-near if any of its sampled tokens has a log-ratio within
// `band` of a boundary where the objective's derivative jumps.
std::vector<bool> kink_contexts(const LossConfig& config, const ToyPolicy& policy,
                                const std::vector<Trajectory>& batch, double band,
                                const LossInputs& aux) {
    std::vector<bool> flag(policy.contexts(), false);
    auto near = [band](double log_ratio, double boundary) {
        return boundary > 0.0 && std::abs(log_ratio - std::log(boundary)) < band;
    };

    for (const auto& traj : batch) {
        const std::vector<double> lp = policy.log_probs(traj.context);
        const std::vector<double> lprox = config.variant == LossVariant::decoupled_ppo
                                              ? aux.prox->log_probs(traj.context)
                                              : std::vector<double>{};
        bool hit = false;
        for (std::size_t t = 0; t < traj.tokens.size() && !hit; ++t) {
            const int tok = traj.tokens[t];
            const double lr = lp[tok] - traj.behavior_logp[t];
            switch (config.variant) {
                case LossVariant::ppo:
                case LossVariant::grpo:
                    hit = near(lr, 1.0 - config.clip_eps) || near(lr, 1.0 + config.clip_eps);
                    break;
                case LossVariant::decoupled_ppo: {
                    const double lrq = lp[tok] - lprox[tok];
                    hit = near(lrq, 1.0 - config.clip_eps) || near(lrq, 1.0 + config.clip_eps);
                    break;
                }
                case LossVariant::tis:
                    hit = near(lr, config.trunc_cap);
                    break;
                case LossVariant::cispo:
                    hit = near(lr, 1.0 - config.eps_low) || near(lr, 1.0 + config.eps_high);
                    break;
                case LossVariant::topr:
                    hit = traj.advantage <= 0.0 && near(lr, config.trunc_cap);
                    break;
                case LossVariant::naive_is:
                    break;
            }
        }
        if (hit) flag[traj.context] = true;
    }
    return flag;
}

}  // namespace

GradReport finite_diff_check(const LossConfig& config, const ToyPolicy& policy,
                             const std::vector<Trajectory>& batch, double h, const LossInputs& aux) {
    if (h <= 0.0) throw std::invalid_argument("finite_diff_check: h must be > 0");

    GradReport rep;
    rep.analytic = loss_and_grad(config, policy, batch, aux).grad;
    rep.finite_diff.resize(rep.analytic.size());
    rep.kink_flag.resize(rep.analytic.size(), false);

    const std::vector<bool> ctx_flag = kink_contexts(config, policy, batch, 10.0 * h, aux);

    // Differencing must respect the stop-gradient: sg'd weights stay pinned to
    // the unperturbed policy while the probe moves.
    LossInputs pinned = aux;
    pinned.sg_anchor = &policy;

    ToyPolicy probe = policy;
    for (std::size_t i = 0; i < probe.logits().size(); ++i) {
        const double saved = probe.logits()[i];
        probe.logits()[i] = saved + h;
        const double up = loss_and_grad(config, probe, batch, pinned).value;
        probe.logits()[i] = saved - h;
        const double down = loss_and_grad(config, probe, batch, pinned).value;
        probe.logits()[i] = saved;
        rep.finite_diff[i] = (up - down) / (2.0 * h);

        const int context = static_cast<int>(i) / policy.vocab();
        rep.kink_flag[i] = ctx_flag[context];
        if (rep.kink_flag[i]) {
            ++rep.flagged;
            continue;
        }
        ++rep.checked;
        const double denom = std::max({std::abs(rep.analytic[i]), std::abs(rep.finite_diff[i]), 1e-6});
        rep.max_rel_error = std::max(rep.max_rel_error, std::abs(rep.analytic[i] - rep.finite_diff[i]) / denom);
    }
    return rep;
}

}  // namespace rlsim

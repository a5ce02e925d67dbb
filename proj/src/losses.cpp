#include "rlsim/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace rlsim {

const char* to_string(LossVariant v) noexcept {
    switch (v) {
        case LossVariant::ppo: return "ppo";
        case LossVariant::decoupled_ppo: return "decoupled_ppo";
        case LossVariant::tis: return "tis";
        case LossVariant::cispo: return "cispo";
        case LossVariant::topr: return "topr";
        case LossVariant::grpo: return "grpo";
        case LossVariant::naive_is: return "naive_is";
    }
    return "unknown";
}

LossVariant loss_variant_from_string(const std::string& s) {
    if (s == "ppo") return LossVariant::ppo;
    if (s == "decoupled_ppo") return LossVariant::decoupled_ppo;
    if (s == "tis") return LossVariant::tis;
    if (s == "cispo") return LossVariant::cispo;
    if (s == "topr") return LossVariant::topr;
    if (s == "grpo") return LossVariant::grpo;
    if (s == "naive_is") return LossVariant::naive_is;
    throw std::invalid_argument("unknown loss variant: " + s);
}

void LossConfig::validate() const {
    if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw std::invalid_argument("LossConfig: clip_eps must be in (0,1)");
    if (eps_low < 0.0 || eps_high < 0.0) throw std::invalid_argument("LossConfig: eps_low/eps_high must be >= 0");
    if (trunc_cap <= 0.0) throw std::invalid_argument("LossConfig: trunc_cap must be > 0");
    if (kl_weight < 0.0) throw std::invalid_argument("LossConfig: kl_weight must be >= 0");
    if (w_plus < 0.0 || w_minus < 0.0) throw std::invalid_argument("LossConfig: TOPR weights must be >= 0");
    if (engine_mismatch_cap < 0.0) throw std::invalid_argument("LossConfig: engine_mismatch_cap must be >= 0");
}

GroupAdvantages grpo_advantages(const std::vector<double>& rewards) {
    if (rewards.size() < 2) throw std::invalid_argument("grpo_advantages: group size must be >= 2");
    const double n = static_cast<double>(rewards.size());
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= n;
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    var /= n;  // population std
    const double sd = std::sqrt(var);

    GroupAdvantages out;
    out.values.resize(rewards.size());
    if (sd < 1e-8) {
        out.degenerate = true;
        return out;  // zeros
    }
    for (std::size_t i = 0; i < rewards.size(); ++i) out.values[i] = (rewards[i] - mean) / sd;
    return out;
}

TrajectoryRatio trajectory_ratio(const ToyPolicy& policy, const Trajectory& traj) {
    if (traj.tokens.empty()) throw std::invalid_argument("trajectory_ratio: empty trajectory");
    if (traj.behavior_logp.size() != traj.tokens.size()) {
        throw std::invalid_argument("trajectory_ratio: behavior log-probs missing");
    }
    TrajectoryRatio out;
    const std::vector<double> lp = policy.log_probs(traj.context);
    double log_sum = 0.0;
    for (std::size_t t = 0; t < traj.tokens.size(); ++t) {
        const double lr = lp[traj.tokens[t]] - traj.behavior_logp[t];
        if (!std::isfinite(lr)) throw std::invalid_argument("trajectory_ratio: non-finite log ratio");
        out.per_token.push_back(std::exp(lr));
        log_sum += lr;
    }
    out.product = std::exp(log_sum);
    if (!std::isfinite(out.product)) throw std::invalid_argument("trajectory_ratio: non-finite product");
    return out;
}

namespace {

inline double clip(double x, double lo, double hi) { return x < lo ? lo : (x > hi ? hi : x); }

// Accumulates d value / d logits through log pi(theta): each token adds
// weight w to its own logit and -w * p(u) to every logit u of its context row.
class LogProbGrad {
public:
    LogProbGrad(const ToyPolicy& policy, std::vector<double>& grad) : policy_(policy), grad_(grad) {
        row_weight_.assign(policy.contexts(), 0.0);
        touched_.assign(policy.contexts(), false);
    }

    void add(int context, int token, double w) {
        grad_[static_cast<std::size_t>(context) * policy_.vocab() + token] += w;
        row_weight_[context] += w;
        touched_[context] = true;
    }

    void flush() {
        for (int c = 0; c < policy_.contexts(); ++c) {
            if (!touched_[c] || row_weight_[c] == 0.0) continue;
            const std::vector<double> p = policy_.probs(c);
            for (int v = 0; v < policy_.vocab(); ++v) {
                grad_[static_cast<std::size_t>(c) * policy_.vocab() + v] -= row_weight_[c] * p[v];
            }
        }
    }

private:
    const ToyPolicy& policy_;
    std::vector<double>& grad_;
    std::vector<double> row_weight_;
    std::vector<bool> touched_;
};

// Exact KL(pi_theta || pi_ref) at one context, plus its gradient in logits.
double kl_and_grad(const ToyPolicy& policy, const ToyPolicy& ref, int context, double coeff,
                   std::vector<double>& grad) {
    const std::vector<double> lp = policy.log_probs(context);
    const std::vector<double> lq = ref.log_probs(context);
    double kl = 0.0;
    const int V = policy.vocab();
    std::vector<double> p(V);
    for (int v = 0; v < V; ++v) {
        p[v] = std::exp(lp[v]);
        kl += p[v] * (lp[v] - lq[v]);
    }
    for (int v = 0; v < V; ++v) {
        grad[static_cast<std::size_t>(context) * V + v] += coeff * p[v] * ((lp[v] - lq[v]) - kl);
    }
    return kl;
}

}  // namespace

LossResult loss_and_grad(const LossConfig& config, const ToyPolicy& policy,
                         const std::vector<Trajectory>& batch, const LossInputs& aux) {
    config.validate();
    if (batch.empty()) throw std::invalid_argument("loss_and_grad: empty batch");
    const bool needs_prox = config.variant == LossVariant::decoupled_ppo;
    if (needs_prox && aux.prox == nullptr) {
        throw std::invalid_argument("loss_and_grad: decoupled_ppo requires a proximal policy");
    }
    const bool needs_ref = config.variant == LossVariant::grpo && config.kl_weight > 0.0;
    if (needs_ref && aux.ref == nullptr) {
        throw std::invalid_argument("loss_and_grad: grpo with kl_weight > 0 requires a reference policy");
    }

    LossResult res;
    res.grad.assign(policy.logits().size(), 0.0);
    LogProbGrad lg(policy, res.grad);
    const double inv_n = 1.0 / static_cast<double>(batch.size());

    const ToyPolicy* anchor = aux.sg_anchor ? aux.sg_anchor : &policy;
    for (const auto& traj : batch) {
        if (traj.tokens.empty()) throw std::invalid_argument("loss_and_grad: empty trajectory");
        const double A = traj.advantage;
        const std::vector<double> lp = policy.log_probs(traj.context);
        // Log-probs feeding the gradient-stopped weights.
        const std::vector<double> lsg =
            anchor == &policy ? lp : anchor->log_probs(traj.context);
        const std::vector<double> lprox =
            needs_prox ? aux.prox->log_probs(traj.context) : std::vector<double>{};

        const std::size_t len = traj.tokens.size();
        const double token_scale = inv_n / static_cast<double>(len);

        // Optional capped correction for the generation-engine mismatch,
        // constant with respect to theta.
        auto mismatch = [&](std::size_t t) {
            if (config.engine_mismatch_cap <= 0.0) return 1.0;
            if (traj.engine_logp.size() != len) {
                throw std::invalid_argument("loss_and_grad: engine log-probs missing for mismatch correction");
            }
            return std::min(std::exp(traj.behavior_logp[t] - traj.engine_logp[t]),
                            config.engine_mismatch_cap);
        };

        if (config.aggregation == RatioAggregation::sequence_product) {
            // One trajectory-level ratio; gradient weights are shared by all
            // of the trajectory's tokens.
            double log_ratio = 0.0;
            double log_ratio_sg = 0.0;
            double log_prox_ratio = 0.0;
            double logp_sum = 0.0;
            double log_mismatch = 0.0;
            for (std::size_t t = 0; t < len; ++t) {
                log_ratio += lp[traj.tokens[t]] - traj.behavior_logp[t];
                log_ratio_sg += lsg[traj.tokens[t]] - traj.behavior_logp[t];
                logp_sum += lp[traj.tokens[t]];
                if (needs_prox) log_prox_ratio += lp[traj.tokens[t]] - lprox[traj.tokens[t]];
                if (config.engine_mismatch_cap > 0.0) {
                    if (traj.engine_logp.size() != len) {
                        throw std::invalid_argument("loss_and_grad: engine log-probs missing");
                    }
                    log_mismatch += traj.behavior_logp[t] - traj.engine_logp[t];
                }
            }
            const double m = config.engine_mismatch_cap > 0.0
                                 ? std::min(std::exp(log_mismatch), config.engine_mismatch_cap)
                                 : 1.0;
            const double r = std::exp(log_ratio);
            const double r_sg = std::exp(log_ratio_sg);
            if (!std::isfinite(r)) throw std::invalid_argument("loss_and_grad: non-finite ratio");

            double value = 0.0;
            double gw = 0.0;  // weight on grad log pi per token
            switch (config.variant) {
                case LossVariant::ppo:
                case LossVariant::grpo: {
                    const double clipped = clip(r, 1.0 - config.clip_eps, 1.0 + config.clip_eps);
                    const double v1 = r * A, v2 = clipped * A;
                    value = std::min(v1, v2);
                    gw = v1 <= v2 ? r * A : (r == clipped ? r * A : 0.0);
                    break;
                }
                case LossVariant::decoupled_ppo: {
                    const double prox_ratio = std::exp(log_ratio - log_prox_ratio);  // prox/old
                    const double theta_prox = std::exp(log_prox_ratio);              // theta/prox
                    const double clipped = clip(theta_prox, 1.0 - config.clip_eps, 1.0 + config.clip_eps);
                    const double v1 = r * A, v2 = prox_ratio * clipped * A;
                    value = std::min(v1, v2);
                    gw = v1 <= v2 ? r * A : (theta_prox == clipped ? prox_ratio * theta_prox * A : 0.0);
                    break;
                }
                case LossVariant::tis: {
                    const double w = clip(r_sg, 0.0, config.trunc_cap);
                    value = w * A * logp_sum;
                    gw = w * A;
                    break;
                }
                case LossVariant::naive_is: {
                    value = r_sg * A * logp_sum;
                    gw = r_sg * A;
                    break;
                }
                case LossVariant::cispo: {
                    const double w = clip(r_sg, 1.0 - config.eps_low, 1.0 + config.eps_high);
                    value = w * A * logp_sum;
                    gw = w * A;
                    break;
                }
                case LossVariant::topr: {
                    const double w = A > 0.0 ? config.w_plus
                                             : config.w_minus * clip(r_sg, 0.0, config.trunc_cap);
                    value = w * A * logp_sum;
                    gw = w * A;
                    break;
                }
            }
            res.value += inv_n * m * value;
            for (std::size_t t = 0; t < len; ++t) lg.add(traj.context, traj.tokens[t], inv_n * m * gw);
            if (config.variant == LossVariant::grpo && config.kl_weight > 0.0) {
                res.value -= inv_n * config.kl_weight *
                             kl_and_grad(policy, *aux.ref, traj.context, -inv_n * config.kl_weight, res.grad);
            }
            continue;
        }

        // token_mean aggregation: per-token ratios, averaged over the length.
        for (std::size_t t = 0; t < len; ++t) {
            const int tok = traj.tokens[t];
            const double lr = lp[tok] - traj.behavior_logp[t];
            const double r = std::exp(lr);
            const double r_sg = std::exp(lsg[tok] - traj.behavior_logp[t]);
            if (!std::isfinite(r)) throw std::invalid_argument("loss_and_grad: non-finite ratio");
            const double m = mismatch(t);

            double value = 0.0;
            double gw = 0.0;
            switch (config.variant) {
                case LossVariant::ppo:
                case LossVariant::grpo: {
                    const double clipped = clip(r, 1.0 - config.clip_eps, 1.0 + config.clip_eps);
                    const double v1 = r * A, v2 = clipped * A;
                    value = std::min(v1, v2);
                    // min selects the unclipped branch on ties; the clipped
                    // branch only carries gradient while the clip is inactive.
                    gw = v1 <= v2 ? r * A : (r == clipped ? r * A : 0.0);
                    break;
                }
                case LossVariant::decoupled_ppo: {
                    const double lq = lprox[tok];
                    const double prox_old = std::exp(lq - traj.behavior_logp[t]);  // constant in theta
                    const double theta_prox = std::exp(lp[tok] - lq);
                    const double clipped = clip(theta_prox, 1.0 - config.clip_eps, 1.0 + config.clip_eps);
                    const double v1 = r * A, v2 = prox_old * clipped * A;
                    value = std::min(v1, v2);
                    gw = v1 <= v2 ? r * A : (theta_prox == clipped ? prox_old * theta_prox * A : 0.0);
                    break;
                }
                case LossVariant::tis: {
                    const double w = clip(r_sg, 0.0, config.trunc_cap);
                    value = w * A * lp[tok];
                    gw = w * A;
                    break;
                }
                case LossVariant::naive_is: {
                    value = r_sg * A * lp[tok];
                    gw = r_sg * A;
                    break;
                }
                case LossVariant::cispo: {
                    const double w = clip(r_sg, 1.0 - config.eps_low, 1.0 + config.eps_high);
                    value = w * A * lp[tok];
                    gw = w * A;
                    break;
                }
                case LossVariant::topr: {
                    const double w = A > 0.0 ? config.w_plus
                                             : config.w_minus * clip(r_sg, 0.0, config.trunc_cap);
                    value = w * A * lp[tok];
                    gw = w * A;
                    break;
                }
            }
            res.value += token_scale * m * value;
            lg.add(traj.context, tok, token_scale * m * gw);
        }
        if (config.variant == LossVariant::grpo && config.kl_weight > 0.0) {
            // The KL penalty is constant across the trajectory's tokens, so
            // the token mean reduces to one term per trajectory.
            res.value -= inv_n * config.kl_weight *
                         kl_and_grad(policy, *aux.ref, traj.context, -inv_n * config.kl_weight, res.grad);
        }
    }

    lg.flush();
    return res;
}

}  // namespace rlsim

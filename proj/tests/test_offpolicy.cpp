#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "rlsim/bandit.hpp"
#include "rlsim/gradcheck.hpp"

using namespace rlsim;

namespace {

// One single-token trajectory in context 0 whose importance ratio against the
// recorded behavior log-prob equals `ratio` exactly.
Trajectory traj_with_ratio(const ToyPolicy& policy, int token, double ratio, double advantage) {
    Trajectory t;
    t.context = 0;
    t.tokens = {token};
    t.behavior_logp = {policy.log_prob(0, token) - std::log(ratio)};
    t.advantage = advantage;
    return t;
}

std::vector<Trajectory> random_batch(const ToyPolicy& behavior, RngStream& rng, int contexts,
                                     int per_context, int len) {
    std::vector<Trajectory> batch;
    for (int c = 0; c < contexts; ++c) {
        auto group = sample_trajectories(behavior, c, per_context, len, rng);
        std::vector<double> rewards;
        for (std::size_t i = 0; i < group.size(); ++i) rewards.push_back(rng.uniform01());
        const auto adv = grpo_advantages(rewards);
        for (std::size_t i = 0; i < group.size(); ++i) {
            group[i].advantage = adv.values[i];
            batch.push_back(std::move(group[i]));
        }
    }
    return batch;
}

}  // namespace

TEST_CASE("policy rows are normalized distributions") {
    RngStream rng(2, "pol");
    ToyPolicy p(5, 12);
    p.randomize(rng, 3.0);
    for (int c = 0; c < 5; ++c) {
        const auto probs = p.probs(c);
        double sum = 0.0;
        for (double v : probs) sum += v;
        CHECK(std::abs(sum - 1.0) < 1e-12);
    }
}

TEST_CASE("grpo advantages: hand-checked groups") {
    const auto a = grpo_advantages({1, 0, 1, 0});
    CHECK_FALSE(a.degenerate);
    CHECK(a.values == std::vector<double>{1, -1, 1, -1});

    const auto b = grpo_advantages({2, 0});
    CHECK(b.values == std::vector<double>{1, -1});

    const auto flat = grpo_advantages({0.5, 0.5, 0.5});
    CHECK(flat.degenerate);
    CHECK(flat.values == std::vector<double>{0, 0, 0});

    CHECK_THROWS_AS(grpo_advantages({1.0}), std::invalid_argument);
}

TEST_CASE("grpo advantages: zero mean, unit population std, affine invariance") {
    RngStream rng(3, "adv");
    for (int round = 0; round < 200; ++round) {
        const int G = 2 + static_cast<int>(rng.below(14));
        std::vector<double> rewards(G);
        for (auto& r : rewards) r = rng.uniform(-3.0, 3.0);
        const auto adv = grpo_advantages(rewards);
        if (adv.degenerate) continue;
        double mean = 0.0, var = 0.0;
        for (double v : adv.values) mean += v;
        mean /= G;
        for (double v : adv.values) var += (v - mean) * (v - mean);
        var /= G;
        CHECK(std::abs(mean) < 1e-10);
        CHECK(std::abs(std::sqrt(var) - 1.0) < 1e-10);

        // r -> a*r + b with a > 0 leaves the advantages untouched.
        const double scale = rng.uniform(0.1, 5.0), shift = rng.uniform(-10.0, 10.0);
        std::vector<double> mapped(rewards);
        for (auto& r : mapped) r = scale * r + shift;
        const auto adv2 = grpo_advantages(mapped);
        for (int i = 0; i < G; ++i) CHECK(adv.values[i] == doctest::Approx(adv2.values[i]).epsilon(1e-10));
    }
}

TEST_CASE("trajectory ratios multiply in log space") {
    ToyPolicy p(1, 4);
    Trajectory t;
    t.context = 0;
    t.tokens = {1, 2};
    t.behavior_logp = {p.log_prob(0, 1), p.log_prob(0, 2)};

    SUBCASE("identity policy gives ratio one") {
        const auto r = trajectory_ratio(p, t);
        CHECK(r.per_token == std::vector<double>{1.0, 1.0});
        CHECK(r.product == doctest::Approx(1.0));
    }
    SUBCASE("a log-two gap doubles the ratio") {
        t.tokens = {1};
        t.behavior_logp = {p.log_prob(0, 1) - std::log(2.0)};
        const auto r = trajectory_ratio(p, t);
        CHECK(r.per_token[0] == doctest::Approx(2.0));
    }
    SUBCASE("two tokens of ratio two give product four") {
        t.behavior_logp = {p.log_prob(0, 1) - std::log(2.0), p.log_prob(0, 2) - std::log(2.0)};
        const auto r = trajectory_ratio(p, t);
        CHECK(r.product == doctest::Approx(4.0));
    }
}

TEST_CASE("loss term arithmetic at pinned ratios") {
    ToyPolicy p(1, 4);
    LossConfig cfg;
    cfg.clip_eps = 0.2;

    SUBCASE("ppo clips a ratio of 1.5 at 1.2") {
        cfg.variant = LossVariant::ppo;
        const auto res = loss_and_grad(cfg, p, {traj_with_ratio(p, 0, 1.5, 1.0)});
        CHECK(res.value == doctest::Approx(1.2));
    }
    SUBCASE("ppo keeps the pessimistic branch for negative advantage") {
        cfg.variant = LossVariant::ppo;
        const auto res = loss_and_grad(cfg, p, {traj_with_ratio(p, 0, 0.5, -1.0)});
        CHECK(res.value == doctest::Approx(-0.8));
    }
    SUBCASE("tis caps the weight") {
        cfg.variant = LossVariant::tis;
        cfg.trunc_cap = 5.0;
        const Trajectory t = traj_with_ratio(p, 0, 10.0, 1.0);
        const auto res = loss_and_grad(cfg, p, {t});
        CHECK(res.value == doctest::Approx(5.0 * p.log_prob(0, 0)));
        const Trajectory low = traj_with_ratio(p, 0, 0.5, 1.0);
        CHECK(loss_and_grad(cfg, p, {low}).value == doctest::Approx(0.5 * p.log_prob(0, 0)));
    }
    SUBCASE("cispo clips into its interval") {
        cfg.variant = LossVariant::cispo;
        cfg.eps_low = 0.2;
        cfg.eps_high = 0.2;
        CHECK(loss_and_grad(cfg, p, {traj_with_ratio(p, 0, 1.5, 1.0)}).value ==
              doctest::Approx(1.2 * p.log_prob(0, 0)));
        CHECK(loss_and_grad(cfg, p, {traj_with_ratio(p, 0, 0.7, 1.0)}).value ==
              doctest::Approx(0.8 * p.log_prob(0, 0)));
    }
    SUBCASE("topr truncates only the negative set") {
        cfg.variant = LossVariant::topr;
        cfg.trunc_cap = 1.0;
        // Positive advantage: weight one regardless of the ratio.
        CHECK(loss_and_grad(cfg, p, {traj_with_ratio(p, 0, 3.0, 1.0)}).value ==
              doctest::Approx(1.0 * p.log_prob(0, 0)));
        // Negative set: ratio 3 truncates to the cap, ratio 0.4 passes through.
        CHECK(loss_and_grad(cfg, p, {traj_with_ratio(p, 0, 3.0, -1.0)}).value ==
              doctest::Approx(-1.0 * p.log_prob(0, 0)));
        CHECK(loss_and_grad(cfg, p, {traj_with_ratio(p, 0, 0.4, -1.0)}).value ==
              doctest::Approx(-0.4 * p.log_prob(0, 0)));
    }
    SUBCASE("weighted topr scales each set") {
        cfg.variant = LossVariant::topr;
        cfg.trunc_cap = 1.0;
        cfg.w_plus = 2.0;
        cfg.w_minus = 0.5;
        CHECK(loss_and_grad(cfg, p, {traj_with_ratio(p, 0, 3.0, 1.0)}).value ==
              doctest::Approx(2.0 * p.log_prob(0, 0)));
        CHECK(loss_and_grad(cfg, p, {traj_with_ratio(p, 0, 0.4, -1.0)}).value ==
              doctest::Approx(-0.5 * 0.4 * p.log_prob(0, 0)));
    }
    SUBCASE("a kl term against the policy itself changes nothing") {
        cfg.variant = LossVariant::grpo;
        RngStream rng(4, "kl");
        ToyPolicy q(1, 4);
        q.randomize(rng, 1.0);
        const Trajectory t = traj_with_ratio(q, 0, 1.1, 1.0);
        LossInputs aux;
        aux.ref = &q;
        cfg.kl_weight = 0.0;
        const auto without = loss_and_grad(cfg, q, {t}, aux);
        cfg.kl_weight = 0.7;
        const auto with = loss_and_grad(cfg, q, {t}, aux);
        CHECK(with.value == doctest::Approx(without.value).epsilon(1e-12));
        for (std::size_t i = 0; i < with.grad.size(); ++i) {
            CHECK(with.grad[i] == doctest::Approx(without.grad[i]).epsilon(1e-10));
        }
    }
    SUBCASE("missing auxiliary policies are reported") {
        cfg.variant = LossVariant::decoupled_ppo;
        CHECK_THROWS_AS(loss_and_grad(cfg, p, {traj_with_ratio(p, 0, 1.0, 1.0)}),
                        std::invalid_argument);
        cfg.variant = LossVariant::grpo;
        cfg.kl_weight = 0.5;
        CHECK_THROWS_AS(loss_and_grad(cfg, p, {traj_with_ratio(p, 0, 1.0, 1.0)}),
                        std::invalid_argument);
    }
}

TEST_CASE("stop-gradient weights reduce to weighted REINFORCE exactly") {
    RngStream rng(5, "sg");
    ToyPolicy policy(3, 6);
    policy.randomize(rng, 0.8);
    ToyPolicy behavior = policy;
    behavior.randomize(rng, 0.8);
    const auto batch = random_batch(behavior, rng, 3, 4, 2);

    LossConfig cfg;
    cfg.variant = LossVariant::tis;
    cfg.trunc_cap = 2.0;
    const auto res = loss_and_grad(cfg, policy, batch);

    // Independent oracle: clipped-weight x advantage through grad log pi.
    std::vector<std::vector<double>> probs;
    for (int c = 0; c < 3; ++c) probs.push_back(policy.probs(c));
    std::vector<oracle::ReinforceTraj> obatch;
    for (const auto& t : batch) {
        oracle::ReinforceTraj o;
        o.context = t.context;
        o.tokens = t.tokens;
        o.advantage = t.advantage;
        const auto ratios = trajectory_ratio(policy, t);
        for (double r : ratios.per_token) o.weights.push_back(std::min(std::max(r, 0.0), 2.0));
        obatch.push_back(std::move(o));
    }
    const auto want = oracle::reinforce_grad(3, 6, probs, obatch);
    REQUIRE(res.grad.size() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
        CHECK(res.grad[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
}

TEST_CASE("degenerate equivalences at ratio one") {
    RngStream rng(6, "deg");
    ToyPolicy policy(2, 5);
    policy.randomize(rng, 1.0);
    // Behavior = policy: every ratio is exactly one.
    const auto batch = random_batch(policy, rng, 2, 4, 2);

    std::vector<std::vector<double>> probs;
    for (int c = 0; c < 2; ++c) probs.push_back(policy.probs(c));
    std::vector<oracle::ReinforceTraj> obatch;
    for (const auto& t : batch) {
        obatch.push_back(oracle::ReinforceTraj{t.context, t.tokens, t.advantage, {}});
    }
    const auto reinforce = oracle::reinforce_grad(2, 5, probs, obatch);

    LossConfig cfg;
    for (LossVariant v : {LossVariant::ppo, LossVariant::tis, LossVariant::cispo,
                          LossVariant::naive_is, LossVariant::decoupled_ppo}) {
        cfg.variant = v;
        LossInputs aux;
        aux.prox = &policy;  // prox = old = theta
        const auto res = loss_and_grad(cfg, policy, batch, aux);
        for (std::size_t i = 0; i < reinforce.size(); ++i) {
            CHECK(std::abs(res.grad[i] - reinforce[i]) < 1e-10);
        }
    }

    // Decoupled PPO with prox = old reduces to PPO on any batch.
    ToyPolicy behavior = policy;
    behavior.randomize(rng, 0.7);
    const auto off_batch = random_batch(behavior, rng, 2, 4, 2);
    cfg.variant = LossVariant::ppo;
    const auto ppo = loss_and_grad(cfg, policy, off_batch);
    cfg.variant = LossVariant::decoupled_ppo;
    LossInputs aux;
    aux.prox = &behavior;  // proximal equals the behavior policy
    const auto dppo = loss_and_grad(cfg, policy, off_batch, aux);
    CHECK(dppo.value == doctest::Approx(ppo.value).epsilon(1e-12));
    for (std::size_t i = 0; i < ppo.grad.size(); ++i) {
        CHECK(std::abs(dppo.grad[i] - ppo.grad[i]) < 1e-10);
    }
}

TEST_CASE("tis with an inactive cap equals naive importance weighting") {
    RngStream rng(7, "cap");
    ToyPolicy policy(2, 5);
    policy.randomize(rng, 0.5);
    ToyPolicy behavior = policy;
    behavior.randomize(rng, 0.5);
    const auto batch = random_batch(behavior, rng, 2, 4, 2);

    LossConfig tis;
    tis.variant = LossVariant::tis;
    tis.trunc_cap = 1e9;
    LossConfig naive;
    naive.variant = LossVariant::naive_is;
    const auto a = loss_and_grad(tis, policy, batch);
    const auto b = loss_and_grad(naive, policy, batch);
    CHECK(a.value == doctest::Approx(b.value).epsilon(1e-12));
    for (std::size_t i = 0; i < a.grad.size(); ++i) CHECK(a.grad[i] == b.grad[i]);
}

TEST_CASE("ppo objective is flat beyond the clip for positive advantage") {
    ToyPolicy p(1, 4);
    LossConfig cfg;
    cfg.variant = LossVariant::ppo;
    cfg.clip_eps = 0.2;
    double prev = 1e300;
    for (double ratio : {1.3, 1.6, 2.4, 4.0}) {
        const double v = loss_and_grad(cfg, p, {traj_with_ratio(p, 0, ratio, 1.0)}).value;
        CHECK(v == doctest::Approx(1.2));
        CHECK(v <= prev + 1e-12);
        prev = v;
    }
}

TEST_CASE("finite differences agree with the analytic gradients") {
    RngStream rng(8, "fd");
    for (LossVariant v : {LossVariant::ppo, LossVariant::decoupled_ppo, LossVariant::tis,
                          LossVariant::cispo, LossVariant::topr, LossVariant::grpo,
                          LossVariant::naive_is}) {
        ToyPolicy policy(3, 6);
        policy.randomize(rng, 0.5);
        ToyPolicy behavior = policy;
        behavior.randomize(rng, 0.5);
        ToyPolicy prox = policy;
        prox.randomize(rng, 0.3);
        ToyPolicy ref = policy;
        ref.randomize(rng, 0.3);
        auto batch = random_batch(behavior, rng, 3, 4, 3);

        LossConfig cfg;
        cfg.variant = v;
        if (v == LossVariant::grpo) cfg.kl_weight = 0.1;
        LossInputs aux;
        aux.prox = &prox;
        aux.ref = &ref;
        const GradReport rep = finite_diff_check(cfg, policy, batch, 1e-5, aux);
        INFO("variant ", to_string(v));
        CHECK(rep.checked > 0);
        CHECK(rep.max_rel_error < 1e-5);
    }
}

TEST_CASE("sequence-product aggregation also passes finite differences") {
    RngStream rng(9, "fd-seq");
    ToyPolicy policy(2, 5);
    policy.randomize(rng, 0.4);
    ToyPolicy behavior = policy;
    behavior.randomize(rng, 0.4);
    auto batch = random_batch(behavior, rng, 2, 3, 3);
    for (LossVariant v : {LossVariant::ppo, LossVariant::tis, LossVariant::topr}) {
        LossConfig cfg;
        cfg.variant = v;
        cfg.aggregation = RatioAggregation::sequence_product;
        const GradReport rep = finite_diff_check(cfg, policy, batch, 1e-5);
        INFO("variant ", to_string(v));
        CHECK(rep.max_rel_error < 1e-5);
    }
}

TEST_CASE("engine-mismatch correction caps the constant weight") {
    RngStream rng(10, "mismatch");
    ToyPolicy policy(1, 4);
    policy.randomize(rng, 0.5);
    Trajectory t = traj_with_ratio(policy, 1, 1.0, 1.0);
    // The serving engine under-reported the behavior prob by a factor of e^2,
    // so the correction weight saturates at the cap.
    t.engine_logp = {t.behavior_logp[0] - 2.0};

    LossConfig plain;
    plain.variant = LossVariant::tis;
    LossConfig capped = plain;
    capped.engine_mismatch_cap = 5.0;
    const auto base = loss_and_grad(plain, policy, {t});
    const auto adj = loss_and_grad(capped, policy, {t});
    CHECK(adj.value == doctest::Approx(5.0 * base.value).epsilon(1e-12));
    // And the mismatch mode still passes finite differences (theta-constant).
    const GradReport rep = finite_diff_check(capped, policy, {t}, 1e-5);
    CHECK(rep.max_rel_error < 1e-5);
}

TEST_CASE("toy train loop is deterministic and learns on-policy") {
    TrainLoopConfig cfg;
    cfg.contexts = 3;
    cfg.arms = 6;
    cfg.steps = 60;
    cfg.lr = 0.8;
    cfg.seed = 12;
    cfg.loss.variant = LossVariant::grpo;

    const TrainLoopResult a = toy_train_loop(cfg);
    const TrainLoopResult b = toy_train_loop(cfg);
    REQUIRE(a.curve.size() == b.curve.size());
    for (std::size_t i = 0; i < a.curve.size(); ++i) {
        CHECK(a.curve[i].expected_reward == b.curve[i].expected_reward);
        CHECK(a.curve[i].grad_norm == b.curve[i].grad_norm);
    }
    // Learning happened: the final reward clears the uniform-policy baseline.
    CHECK(a.final_reward > a.curve.front().expected_reward + 0.05);
    // Staleness is zero on-policy.
    for (const auto& pt : a.curve) CHECK(pt.staleness == 0);

    const std::string csv = a.curve_csv();
    CHECK(csv.rfind("step,mean_reward,grad_norm,staleness\n", 0) == 0);
}

TEST_CASE("lagged behavior snapshots report their staleness") {
    TrainLoopConfig cfg;
    cfg.contexts = 2;
    cfg.arms = 5;
    cfg.steps = 12;
    cfg.async_lag = 4;
    cfg.seed = 3;
    cfg.loss.variant = LossVariant::tis;
    const TrainLoopResult res = toy_train_loop(cfg);
    CHECK(res.curve[0].staleness == 0);
    CHECK(res.curve[3].staleness == 3);
    for (std::size_t i = 4; i < res.curve.size(); ++i) CHECK(res.curve[i].staleness == 4);
}

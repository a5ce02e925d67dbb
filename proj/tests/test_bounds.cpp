#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "rlsim/bounds.hpp"
#include "rlsim/rng.hpp"

using namespace rlsim;

TEST_CASE("completion time bound") {
    CHECK(completion_time_bound(256, 16, 10, 50) == doctest::Approx(210.0));
    // Constant latency: bound 2L contains the true makespan L.
    CHECK(completion_time_bound(8, 8, 5, 5) == doctest::Approx(10.0));
    CHECK(completion_time_bound(1, 1, 5, 5) == doctest::Approx(10.0));
    CHECK_THROWS_AS(completion_time_bound(1, 0, 1, 1), std::invalid_argument);
}

TEST_CASE("per-sample bounds and the alpha limit") {
    const auto b = per_sample_bounds(256, 16, 10, 50, 2);
    CHECK(b.sync == doctest::Approx(0.8203125));
    CHECK(b.async == doctest::Approx(0.690104).epsilon(1e-5));

    const auto same = per_sample_bounds(256, 16, 10, 50, 0);
    CHECK(same.sync == same.async);

    const auto limit = per_sample_bounds(256, 16, 10, 50, 1e12);
    CHECK(limit.async == doctest::Approx(10.0 / 16.0).epsilon(1e-6));
}

TEST_CASE("sync end-to-end bound") {
    CHECK(sync_end2end_bound(256, 32, 10, 50, 2, 1) == doctest::Approx(146.0));
    // E = 0 reduces to the completion bound at Q = N.
    CHECK(sync_end2end_bound(256, 32, 10, 50, 2, 0) == doctest::Approx(completion_time_bound(256, 32, 10, 50)));
    CHECK(sync_end2end_bound(256, 32, 10, 0, 2, 1) == doctest::Approx((256.0 / 32.0) * 12.0));
}

TEST_CASE("async bound balances at beta star") {
    const double beta = optimal_beta(256, 32, 2, 10, 50, 2, 1);
    CHECK(beta == doctest::Approx(0.142012).epsilon(1e-5));

    const double at_star = async_end2end_bound(256, 32, beta, 2, 10, 50, 2, 1);
    CHECK(at_star == doctest::Approx(112.6667).epsilon(1e-5));
    // Closed form at beta*: (N/K)(gen + E*train) + L/(alpha+1).
    CHECK(at_star == doctest::Approx((256.0 / 32.0) * 12.0 + 50.0 / 3.0).epsilon(1e-9));

    CHECK(optimal_beta(256, 32, 2, 10, 50, 0, 1) == 0.0);
    CHECK_THROWS_AS(async_end2end_bound(256, 32, 0.0, 2, 10, 50, 2, 1), std::invalid_argument);
    CHECK_THROWS_AS(async_end2end_bound(256, 32, 1.0, 2, 10, 50, 2, 1), std::invalid_argument);
}

TEST_CASE("speedup limits") {
    const auto lim = speedup_limits(256, 32, 10, 50, 2, 1);
    CHECK(lim.gen_only == doctest::Approx(6.0));
    CHECK(lim.end2end == doctest::Approx(1.5208333).epsilon(1e-6));

    const auto flat = speedup_limits(256, 32, 10, 0, 2, 1);
    CHECK(flat.gen_only == doctest::Approx(1.0));
    CHECK(flat.end2end == doctest::Approx(1.0));
}

TEST_CASE("beta star properties over random inputs") {
    RngStream rng(123, "beta-star");
    double prev_beta_mu = -1.0;
    for (int i = 0; i < 2000; ++i) {
        const double N = 1 + rng.below(1024);
        const double K = 1 + rng.below(128);
        const double mu = rng.uniform(0.1, 50.0);
        const double L = mu * rng.uniform(1.0, 10.0);
        const double mt = rng.uniform(0.0, 10.0);
        const double E = 1 + rng.below(4);
        const double alpha = rng.uniform(0.0, 8.0);

        const double beta = optimal_beta(N, K, alpha, mu, L, mt, E);
        CHECK(beta >= 0.0);
        CHECK(beta < 1.0);
        if (beta > 0.0 && beta < 1.0) {
            // Both terms of the bound agree at beta* to 1e-9 relative.
            const double infer_share = 1.0 - beta;
            const double gen_term = N * mu / (infer_share * K) + L / ((alpha + 1.0) * infer_share);
            const double train_term = E * N * mt / (beta * K);
            CHECK(std::abs(gen_term - train_term) <= 1e-9 * std::max(gen_term, train_term));
        }

        // The balanced async bound never exceeds the sync bound; the gap is
        // exactly L - L/(alpha+1).
        const double sync_bound = sync_end2end_bound(N, K, mu, L, mt, E);
        const double async_at_star = (N / K) * (mu + E * mt) + L / (alpha + 1.0);
        CHECK(async_at_star <= sync_bound + 1e-9);
        CHECK(sync_bound - async_at_star == doctest::Approx(L - L / (alpha + 1.0)).epsilon(1e-9));
        (void)prev_beta_mu;
    }

    // Monotonicity: beta* increases with train cost. It also increases with
    // alpha (the tail term K*L/(alpha+1) in the denominator shrinks, so the
    // generation side needs a smaller share).
    double last = -1.0;
    for (double mt : {0.5, 1.0, 2.0, 4.0, 8.0}) {
        const double b = optimal_beta(256, 32, 2, 10, 50, mt, 1);
        CHECK(b > last);
        last = b;
    }
    last = -1.0;
    for (double alpha : {0.0, 1.0, 2.0, 4.0, 8.0}) {
        const double b = optimal_beta(256, 32, alpha, 10, 50, 2, 1);
        CHECK(b > last);
        last = b;
    }
}

TEST_CASE("bounds report lists all quantities in stable order") {
    BoundInputs in;
    in.total_samples = 256;
    in.batch_samples = 256;
    in.workers = 16;
    in.gen_mean = 10;
    in.gen_max = 50;
    in.train_mean = 2;
    in.reuse = 1;
    in.async_ratio = 2;
    in.train_share = 0.5;
    const std::string report = bounds_report(in);
    CHECK(report.find("completion_time_bound=210") == 0);
    CHECK(report.find("optimal_beta=") != std::string::npos);
    CHECK(report.find("speedup_limit_end2end=") != std::string::npos);
}

TEST_CASE("worker split keeps one worker per side") {
    const WorkerSplit s = split_workers(32, 0.14201);
    CHECK(s.train == 4);
    CHECK(s.infer == 28);
    CHECK(split_workers(2, 0.99).train == 1);
    CHECK(split_workers(2, 0.01).train == 1);
    CHECK_THROWS_AS(split_workers(1, 0.5), std::invalid_argument);
}

#pragma once

#include <string>

namespace rlsim {

// Inputs for the completion-time / end-to-end bounds.
//   total_samples   Q  -- samples a rollout must produce
//   batch_samples   N  -- samples consumed per training step
//   workers         K  -- worker count
//   gen_mean        mean per-sample generation time
//   gen_max         max per-sample generation time
//   train_mean      per-sample training time
//   reuse           E  -- passes over each sample during training
//   async_ratio     alpha
//   train_share     beta, fraction of workers that train
struct BoundInputs {
    double total_samples = 0.0;
    double batch_samples = 0.0;
    double workers = 1.0;
    double gen_mean = 0.0;
    double gen_max = 0.0;
    double train_mean = 0.0;
    double reuse = 1.0;
    double async_ratio = 0.0;
    double train_share = 0.5;

    void validate() const;
};

// List-scheduling makespan bound for Q samples on K work-conserving workers:
// (Q/K) * gen_mean + gen_max.
double completion_time_bound(double total_samples, double workers, double gen_mean, double gen_max);

struct PerSampleBounds {
    double sync = 0.0;    // gen_mean/K + gen_max/N
    double async = 0.0;   // gen_mean/K + gen_max/((alpha+1)N)
};
PerSampleBounds per_sample_bounds(double batch_samples, double workers, double gen_mean, double gen_max,
                                  double async_ratio);

// Sequential pipeline: (N/K)(gen_mean + E*train_mean) + gen_max.
double sync_end2end_bound(double batch_samples, double workers, double gen_mean, double gen_max,
                          double train_mean, double reuse);

// Partitioned pipeline: max of the generation-side and training-side terms.
double async_end2end_bound(double batch_samples, double workers, double train_share, double async_ratio,
                           double gen_mean, double gen_max, double train_mean, double reuse);

// The train share that balances both terms of the async bound.
double optimal_beta(double batch_samples, double workers, double async_ratio, double gen_mean,
                    double gen_max, double train_mean, double reuse);

struct SpeedupLimits {
    double gen_only = 1.0;   // (gen_max + gen_mean)/gen_mean, at K = N
    double end2end = 1.0;    // 1 + K*gen_max/(N(gen_mean + E*train_mean))
};
SpeedupLimits speedup_limits(double batch_samples, double workers, double gen_mean, double gen_max,
                             double train_mean, double reuse);

// All six quantities, one "key=value" pair per line, stable order.
std::string bounds_report(const BoundInputs& in);

// Integer worker split used by simulations: floor(beta*K) trainers (at least
// one) and the remainder generating (at least one). Requires K >= 2.
struct WorkerSplit {
    int train = 1;
    int infer = 1;
};
WorkerSplit split_workers(int workers, double train_share);

}  // namespace rlsim

#include "rlsim/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rlsim/engine.hpp"

namespace rlsim {

void BoundInputs::validate() const {
    if (total_samples < 0 || batch_samples < 0 || gen_mean < 0 || gen_max < 0 || train_mean < 0 ||
        reuse < 0 || async_ratio < 0) {
        throw std::invalid_argument("BoundInputs: all quantities must be non-negative");
    }
    if (workers < 1) throw std::invalid_argument("BoundInputs: workers must be >= 1");
    if (gen_max < gen_mean) throw std::invalid_argument("BoundInputs: gen_max must be >= gen_mean");
}

double completion_time_bound(double total_samples, double workers, double gen_mean, double gen_max) {
    if (workers <= 0) throw std::invalid_argument("completion_time_bound: workers must be > 0");
    return (total_samples / workers) * gen_mean + gen_max;
}

PerSampleBounds per_sample_bounds(double batch_samples, double workers, double gen_mean, double gen_max,
                                  double async_ratio) {
    if (batch_samples < 1) throw std::invalid_argument("per_sample_bounds: batch_samples must be >= 1");
    if (workers <= 0) throw std::invalid_argument("per_sample_bounds: workers must be > 0");
    PerSampleBounds b;
    b.sync = gen_mean / workers + gen_max / batch_samples;
    b.async = gen_mean / workers + gen_max / ((async_ratio + 1.0) * batch_samples);
    return b;
}

double sync_end2end_bound(double batch_samples, double workers, double gen_mean, double gen_max,
                          double train_mean, double reuse) {
    if (workers <= 0) throw std::invalid_argument("sync_end2end_bound: workers must be > 0");
    return (batch_samples / workers) * (gen_mean + reuse * train_mean) + gen_max;
}

double async_end2end_bound(double batch_samples, double workers, double train_share, double async_ratio,
                           double gen_mean, double gen_max, double train_mean, double reuse) {
    if (!(train_share > 0.0 && train_share < 1.0)) {
        throw std::invalid_argument("async_end2end_bound: train_share must lie in (0,1)");
    }
    if (workers <= 0) throw std::invalid_argument("async_end2end_bound: workers must be > 0");
    const double infer_share = 1.0 - train_share;
    const double gen_term = batch_samples * gen_mean / (infer_share * workers) +
                            gen_max / ((async_ratio + 1.0) * infer_share);
    const double train_term = reuse * batch_samples * train_mean / (train_share * workers);
    return std::max(gen_term, train_term);
}

double optimal_beta(double batch_samples, double workers, double async_ratio, double gen_mean,
                    double gen_max, double train_mean, double reuse) {
    const double train_work = reuse * batch_samples * train_mean;
    const double denom = batch_samples * gen_mean + workers * gen_max / (async_ratio + 1.0) + train_work;
    if (denom <= 0.0) throw std::invalid_argument("optimal_beta: degenerate inputs (zero total work)");
    return train_work / denom;
}

SpeedupLimits speedup_limits(double batch_samples, double workers, double gen_mean, double gen_max,
                             double train_mean, double reuse) {
    if (gen_mean <= 0.0) throw std::invalid_argument("speedup_limits: gen_mean must be > 0");
    const double step_work = batch_samples * (gen_mean + reuse * train_mean);
    if (step_work <= 0.0) throw std::invalid_argument("speedup_limits: zero per-step work");
    SpeedupLimits s;
    s.gen_only = (gen_max + gen_mean) / gen_mean;
    s.end2end = 1.0 + workers * gen_max / step_work;
    return s;
}

std::string bounds_report(const BoundInputs& in) {
    in.validate();
    const auto per = per_sample_bounds(in.batch_samples, in.workers, in.gen_mean, in.gen_max, in.async_ratio);
    const double beta_star = optimal_beta(in.batch_samples, in.workers, in.async_ratio, in.gen_mean,
                                          in.gen_max, in.train_mean, in.reuse);
    // Evaluate the async bound at the requested share, or at beta* when the
    // requested share is degenerate.
    const double beta = (in.train_share > 0.0 && in.train_share < 1.0) ? in.train_share
                        : std::clamp(beta_star, 1e-9, 1.0 - 1e-9);
    const auto lim = speedup_limits(in.batch_samples, in.workers, in.gen_mean, in.gen_max,
                                    in.train_mean, in.reuse);

    std::string out;
    auto put = [&out](const char* key, double v) {
        out += key;
        out += '=';
        out += format_number(v);
        out += '\n';
    };
    put("completion_time_bound", completion_time_bound(in.total_samples, in.workers, in.gen_mean, in.gen_max));
    put("per_sample_sync", per.sync);
    put("per_sample_async", per.async);
    put("sync_end2end", sync_end2end_bound(in.batch_samples, in.workers, in.gen_mean, in.gen_max,
                                           in.train_mean, in.reuse));
    put("async_end2end", async_end2end_bound(in.batch_samples, in.workers, beta, in.async_ratio,
                                             in.gen_mean, in.gen_max, in.train_mean, in.reuse));
    put("optimal_beta", beta_star);
    put("speedup_limit_gen_only", lim.gen_only);
    put("speedup_limit_end2end", lim.end2end);
    return out;
}

WorkerSplit split_workers(int workers, double train_share) {
    if (workers < 2) throw std::invalid_argument("split_workers: need at least 2 workers to partition");
    WorkerSplit s;
    s.train = std::clamp(static_cast<int>(std::floor(train_share * workers)), 1, workers - 1);
    s.infer = workers - s.train;
    return s;
}

}  // namespace rlsim

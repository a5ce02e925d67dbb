#pragma once

#include "rlsim/losses.hpp"

namespace rlsim {

struct GradReport {
    std::vector<double> analytic;
    std::vector<double> finite_diff;
    std::vector<bool> kink_flag;      // true: logit excluded from the pass criterion
    double max_rel_error = 0.0;       // over unflagged logits
    std::size_t flagged = 0;
    std::size_t checked = 0;
};

// Central finite differences over every logit of `policy`, compared against
// the analytic gradient. Logits of contexts whose tokens sit within 10*h (in
// log-ratio space) of a clip boundary or a min-branch tie are flagged and
// excluded from max_rel_error.
GradReport finite_diff_check(const LossConfig& config, const ToyPolicy& policy,
                             const std::vector<Trajectory>& batch, double h,
                             const LossInputs& aux = {});

}  // namespace rlsim
